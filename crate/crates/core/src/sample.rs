//! Temperature sampling from conditional slices and seeded random tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, Result};
use crate::table::{Alphabet, ConditionalSlice, JointTable, VarId};

/// Deterministic generator used for every seeded operation in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Highest-probability symbol; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Weights proportional to `probs^(1/temperature)`, computed in log space so
/// tiny temperatures collapse onto the mode instead of underflowing to zero.
fn tempered(probs: &[f64], temperature: f64) -> Vec<f64> {
    let top = probs.iter().copied().fold(0.0, f64::max);
    let log_top = top.ln();
    probs
        .iter()
        .map(|&p| {
            if p <= 0.0 {
                0.0
            } else {
                ((p.ln() - log_top) / temperature).exp()
            }
        })
        .collect()
}

/// Draws one symbol from `slice` at the given temperature using `rng`.
///
/// A temperature of exactly zero is the greedy limit: [`argmax`].
pub fn sample_with<R: Rng + ?Sized>(
    slice: &ConditionalSlice,
    temperature: f64,
    rng: &mut R,
) -> Result<usize> {
    if !temperature.is_finite() || temperature < 0.0 {
        return argument(format!("temperature must be finite and >= 0, got {temperature}"));
    }
    if temperature == 0.0 {
        return Ok(argmax(&slice.probs));
    }
    let weights = tempered(&slice.probs, temperature);
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = argmax(&slice.probs);
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Ok(i);
            }
            u -= w;
            last_positive = i;
        }
    }
    // Rounding can leave u marginally above the last weight.
    Ok(last_positive)
}

/// Draws one symbol with a generator freshly seeded from `seed`.
pub fn sample(slice: &ConditionalSlice, temperature: f64, seed: u64) -> Result<usize> {
    sample_with(slice, temperature, &mut seeded_rng(seed))
}

/// A joint drawn uniformly from the probability simplex (Dirichlet(1)).
pub fn dirichlet_joint<R: Rng + ?Sized>(
    vars: Vec<VarId>,
    alphabet: Alphabet,
    rng: &mut R,
) -> Result<JointTable> {
    // Normalized Exp(1) draws; 1 - u keeps the argument of ln in (0, 1].
    let t = JointTable::from_fn(vars, alphabet, |_| -(1.0 - rng.random::<f64>()).ln())?;
    t.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice(p: &[f64]) -> ConditionalSlice {
        ConditionalSlice::marginal(0, p.to_vec()).unwrap()
    }

    #[test]
    fn point_mass_always_drawn() {
        for seed in 0..50 {
            for t in [0.0, 0.1, 1.0, 10.0] {
                assert_eq!(sample(&slice(&[0.0, 1.0]), t, seed).unwrap(), 1);
            }
        }
    }

    #[test]
    fn cold_limit_is_argmax() {
        for seed in 0..50 {
            assert_eq!(sample(&slice(&[0.9, 0.1]), 1e-300, seed).unwrap(), 0);
            assert_eq!(sample(&slice(&[0.9, 0.1]), 0.0, seed).unwrap(), 0);
        }
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
    }

    #[test]
    fn fair_coin_frequency() {
        let s = slice(&[0.5, 0.5]);
        assert_eq!(sample(&s, 1.0, 42).unwrap(), sample(&s, 1.0, 42).unwrap());
        let ones: usize = (0..100_000u64).map(|seed| sample(&s, 1.0, seed).unwrap()).sum();
        let freq = ones as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.51);
        // Much tighter than required; 5 sigma for 1e5 draws is ~0.008.
        assert!((freq - 0.5).abs() < 0.008, "freq {freq}");
    }

    #[test]
    fn temperature_sharpens() {
        let s = slice(&[0.75, 0.25]);
        let mut rng = seeded_rng(3);
        let hot: usize = (0..20_000).map(|_| sample_with(&s, 1.0, &mut rng).unwrap()).sum();
        let cold: usize = (0..20_000).map(|_| sample_with(&s, 0.5, &mut rng).unwrap()).sum();
        // T = 0.5 squares the odds: p(1) = 1/10.
        assert!((hot as f64 / 2e4 - 0.25).abs() < 0.02);
        assert!((cold as f64 / 2e4 - 0.1).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_temperature() {
        let s = slice(&[0.5, 0.5]);
        assert!(sample(&s, f64::NAN, 0).is_err());
        assert!(sample(&s, f64::INFINITY, 0).is_err());
        assert!(sample(&s, -1.0, 0).is_err());
    }

    #[test]
    fn dirichlet_is_normalized_and_seeded() {
        let a = Alphabet::new(3).unwrap();
        let t = dirichlet_joint(vec![1, 2], a, &mut seeded_rng(1)).unwrap();
        assert!(t.is_normalized());
        assert!(t.values().iter().all(|&x| x > 0.0));
        assert_eq!(t, dirichlet_joint(vec![1, 2], a, &mut seeded_rng(1)).unwrap());
    }
}
