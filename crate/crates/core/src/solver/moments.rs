//! Maximum entropy over an explicit outcome list under expectation
//! constraints `E[φ_j] = m_j`.

use serde::{Deserialize, Serialize};

use super::newton::{conjugate_gradient, dot, MAX_HALVINGS};
use super::problem::softmax;
use super::SolverConfig;
use crate::error::{argument, shape, Result};

/// Feature values per outcome and their target expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProblem {
    /// `features[j][x]` is `φ_j(x)`.
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSolution {
    pub probs: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Max-abs violation over the moment equations.
    pub max_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl MomentProblem {
    fn outcomes(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn logits(&self, lambda: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.outcomes()];
        for (phi, l) in self.features.iter().zip(lambda) {
            for (v, x) in s.iter_mut().zip(phi) {
                *v += l * x;
            }
        }
        s
    }

    fn moments(&self, p: &[f64]) -> Vec<f64> {
        self.features.iter().map(|phi| dot(phi, p)).collect()
    }
}

/// Newton on the dual `ln Z(λ) - λ·m`; the Hessian is the feature covariance.
pub fn solve_moments(problem: &MomentProblem, config: &SolverConfig) -> Result<MomentSolution> {
    let n = problem.outcomes();
    if n == 0 || problem.features.iter().any(|f| f.len() != n) {
        return shape("every feature needs one value per outcome");
    }
    if problem.targets.len() != problem.features.len() {
        return shape("one target per feature");
    }
    if config.residual_tolerance.is_nan() || config.residual_tolerance <= 0.0 || config.max_iterations == 0 {
        return argument("invalid solver configuration");
    }
    let dim = problem.features.len();
    let mut lambda = vec![0.0; dim];
    let evaluate = |l: &[f64]| {
        let (p, log_z) = softmax(&problem.logits(l));
        (p, log_z - dot(l, &problem.targets))
    };
    let (mut p, mut value) = evaluate(&lambda);
    let residual = |p: &[f64]| {
        problem
            .moments(p)
            .iter()
            .zip(&problem.targets)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let mut iterations = 0;
    while iterations < config.max_iterations && residual(&p) > config.residual_tolerance {
        let mean = problem.moments(&p);
        let rhs: Vec<f64> = problem.targets.iter().zip(&mean).map(|(t, m)| t - m).collect();
        let hv = |v: &[f64]| {
            let u = problem.logits(v);
            let eu = dot(&p, &u);
            let w: Vec<f64> = p.iter().zip(&u).map(|(a, b)| a * b).collect();
            problem
                .moments(&w)
                .iter()
                .zip(&mean)
                .map(|(a, m)| a - m * eu)
                .collect()
        };
        let step = conjugate_gradient(hv, &rhs, 4 * dim.max(1));
        iterations += 1;
        let slack = 1e-14 * value.abs().max(1.0);
        let mut t = config.damping;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = lambda.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            let (pt, vt) = evaluate(&trial);
            if vt.is_finite() && vt <= value + slack {
                lambda = trial;
                p = pt;
                value = vt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let max_residual = residual(&p);
    Ok(MomentSolution {
        probs: p,
        multipliers: lambda,
        max_residual,
        iterations,
        converged: max_residual <= config.residual_tolerance,
    })
}
