//! The geometric law on `k = 1, 2, ...` with mean `mu`, the maximum-entropy
//! distribution on the positive integers under a mean constraint.
//!
//! ```text
//! p_k = r^(k-1) / mu,   r = (mu - 1) / mu
//! H(mu) = mu ln mu - (mu - 1) ln(mu - 1)
//! ```
//!
//! `mu = 1` is the point mass at `k = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::solver::{solve_moments, MomentProblem, MomentSolution, SolverConfig};
use crate::table::entropy_of;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricModel {
    mu: f64,
}

impl GeometricModel {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 1.0) {
            return argument(format!("geometric mean must be finite and >= 1, got {mu}"));
        }
        Ok(GeometricModel { mu })
    }

    pub fn mu(self) -> f64 {
        self.mu
    }

    /// Common ratio `p_{k+1} / p_k`.
    pub fn ratio(self) -> f64 {
        (self.mu - 1.0) / self.mu
    }

    pub fn pmf(self, k: u64) -> Result<f64> {
        if k < 1 {
            return argument("geometric support starts at k = 1");
        }
        if self.mu == 1.0 {
            return Ok(if k == 1 { 1.0 } else { 0.0 });
        }
        Ok(self.ratio().powf((k - 1) as f64) / self.mu)
    }

    /// Entropy in nats.
    pub fn entropy_closed(self) -> f64 {
        let m1 = self.mu - 1.0;
        let tail = if m1 > 0.0 { m1 * m1.ln() } else { 0.0 };
        self.mu * self.mu.ln() - tail
    }

    /// Number of leading terms after which the entropy left out falls
    /// below `tail_tolerance`.
    ///
    /// The omitted part is exactly
    /// `r^K ln mu + (-ln r) r^K (K + r / (1 - r))`.
    pub fn cutoff(self, tail_tolerance: f64) -> Result<u64> {
        if tail_tolerance.is_nan() || tail_tolerance <= 0.0 {
            return argument("tail tolerance must be > 0");
        }
        if self.mu == 1.0 {
            return Ok(1);
        }
        let r = self.ratio();
        let (ln_mu, neg_ln_r) = (self.mu.ln(), -r.ln());
        let tail = |k: f64| {
            let rk = r.powf(k);
            rk * ln_mu + neg_ln_r * rk * (k + r / (1.0 - r))
        };
        let mut k = 1u64;
        while tail(k as f64) > tail_tolerance {
            k *= 2;
        }
        // Smallest k with tail below tolerance; the tail decreases for k >= 1.
        let (mut lo, mut hi) = (k / 2, k);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail(mid as f64) > tail_tolerance {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi.max(1))
    }

    /// `-Σ p_k ln p_k`, summed up to [`GeometricModel::cutoff`].
    pub fn entropy_numeric(self, tail_tolerance: f64) -> Result<f64> {
        let k_max = self.cutoff(tail_tolerance)?;
        if self.mu == 1.0 {
            return Ok(0.0);
        }
        let (ln_mu, ln_r) = (self.mu.ln(), self.ratio().ln());
        let mut h = 0.0;
        for k in 1..=k_max {
            let ln_p = (k - 1) as f64 * ln_r - ln_mu;
            h -= ln_p.exp() * ln_p;
        }
        Ok(h)
    }

    /// Total mass and mean summed up to the cutoff for `tail_tolerance`.
    pub fn moments_numeric(self, tail_tolerance: f64) -> Result<(f64, f64)> {
        let k_max = self.cutoff(tail_tolerance)?;
        let mut total = 0.0;
        let mut mean = 0.0;
        for k in 1..=k_max {
            let p = self.pmf(k)?;
            total += p;
            mean += k as f64 * p;
        }
        Ok((total, mean))
    }

    /// `max p - min p = p_1 - 0 = 1 / mu`.
    pub fn spread(self) -> f64 {
        1.0 / self.mu
    }
}

/// Entropy of the geometric law with mean `mu`.
pub fn entropy_closed(mu: f64) -> Result<f64> {
    Ok(GeometricModel::new(mu)?.entropy_closed())
}

pub fn spread_geometric(mu: f64) -> Result<f64> {
    Ok(GeometricModel::new(mu)?.spread())
}

/// Maximum-entropy distribution on `{1..=k_max}` with mean `mu`, from the
/// generic moment solver. Index `i` holds `p(k = i + 1)`.
pub fn maxent_with_mean(mu: f64, k_max: usize, config: &SolverConfig) -> Result<MomentSolution> {
    if k_max < 1 || !(mu >= 1.0 && mu <= k_max as f64) {
        return argument(format!("mean {mu} is not attainable on 1..={k_max}"));
    }
    let problem = MomentProblem {
        features: vec![(1..=k_max).map(|k| k as f64).collect()],
        targets: vec![mu],
    };
    solve_moments(&problem, config)
}

/// Entropy of a distribution on `{1..=K}` given as a probability list.
pub fn support_entropy(probs: &[f64]) -> f64 {
    entropy_of(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::seeded_rng;
    use rand::Rng;

    const GRID: [f64; 7] = [1.01, 1.1, 1.5, 2.0, 5.0, 10.0, 100.0];

    #[test]
    fn pmf_examples() {
        let g = GeometricModel::new(2.0).unwrap();
        assert_eq!(g.pmf(1).unwrap(), 0.5);
        assert_eq!(g.pmf(2).unwrap(), 0.25);
        assert!(g.pmf(0).is_err());
        for mu in GRID {
            let g = GeometricModel::new(mu).unwrap();
            for k in 1..20 {
                let ratio = g.pmf(k + 1).unwrap() / g.pmf(k).unwrap();
                assert!((ratio - (mu - 1.0) / mu).abs() < 1e-14);
            }
        }
        let near = GeometricModel::new(1.0 + 1e-9).unwrap();
        assert!((near.pmf(1).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(GeometricModel::new(1.0).unwrap().pmf(1).unwrap(), 1.0);
        assert!(GeometricModel::new(0.5).is_err());
        assert!(GeometricModel::new(f64::NAN).is_err());
    }

    #[test]
    fn normalization_and_mean() {
        for mu in [1.1, 2.0, 5.0, 10.0, 100.0] {
            let (total, mean) = GeometricModel::new(mu).unwrap().moments_numeric(1e-15).unwrap();
            assert!((total - 1.0).abs() < 1e-10, "mu {mu}: total {total}");
            assert!((mean - mu).abs() < 1e-10 * mu.max(1.0) * 10.0, "mu {mu}: mean {mean}");
        }
    }

    #[test]
    fn entropy_examples() {
        let g = GeometricModel::new(2.0).unwrap();
        assert!((g.entropy_closed() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(GeometricModel::new(1.0).unwrap().entropy_closed(), 0.0);
        for mu in GRID {
            let g = GeometricModel::new(mu).unwrap();
            let diff = (g.entropy_numeric(1e-12).unwrap() - g.entropy_closed()).abs();
            assert!(diff < 1e-10, "mu {mu}: {diff}");
        }
    }

    #[test]
    fn monotone_on_grid() {
        let h: Vec<f64> = GRID.iter().map(|&m| entropy_closed(m).unwrap()).collect();
        let s: Vec<f64> = GRID.iter().map(|&m| spread_geometric(m).unwrap()).collect();
        assert!(h.windows(2).all(|w| w[1] > w[0]));
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(spread_geometric(2.0).unwrap(), 0.5);
        assert_eq!(spread_geometric(1.0).unwrap(), 1.0);
        assert!(spread_geometric(1e12).unwrap() < 1e-11);
    }

    #[test]
    fn solver_finds_truncated_geometric() {
        let (mu, k_max) = (2.0, 50);
        let s = maxent_with_mean(mu, k_max, &SolverConfig::newton()).unwrap();
        assert!(s.converged);
        let g = GeometricModel::new(mu).unwrap();
        for (i, p) in s.probs.iter().enumerate() {
            assert!((p - g.pmf(i as u64 + 1).unwrap()).abs() < 1e-12, "k = {}", i + 1);
        }
        let best = support_entropy(&s.probs);
        assert!((best - g.entropy_closed()).abs() < 1e-10);

        // Feasible rivals: random two-point laws mixed with f*, all with mean mu.
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let lo = rng.random_range(1..=2usize);
            let hi = rng.random_range(2..=k_max).max(lo + 1);
            let w = (hi as f64 - mu) / (hi - lo) as f64;
            let t: f64 = rng.random_range(0.0..1.0);
            let mut q: Vec<f64> = s.probs.iter().map(|p| t * p).collect();
            q[lo - 1] += (1.0 - t) * w;
            q[hi - 1] += (1.0 - t) * (1.0 - w);
            let mean: f64 = q.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum();
            assert!((mean - mu).abs() < 1e-9);
            assert!(support_entropy(&q) <= best + 1e-12);
        }
        assert!(maxent_with_mean(60.0, k_max, &SolverConfig::newton()).is_err());
    }
}
