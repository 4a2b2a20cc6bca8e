//! Precomputed projections and targets shared by both strategies.

use log::warn;

use super::DualVariables;
use crate::constraints::ConstraintSystem;
use crate::error::{shape, Error, Result};
use crate::table::Projection;

/// Smallest target mass representable by a strictly positive maxent joint.
pub const TARGET_FLOOR: f64 = 1e-13;

pub(crate) struct Problem<'a> {
    pub(crate) system: &'a ConstraintSystem,
    pub(crate) projections: Vec<Projection>,
    /// Targets with cells below [`TARGET_FLOOR`] raised and renormalized.
    pub(crate) targets: Vec<Vec<f64>>,
    pub(crate) joint_len: usize,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(system: &'a ConstraintSystem) -> Result<Self> {
        let joint_len = system
            .joint_len()
            .ok_or_else(|| Error::Argument("joint table size overflows".into()))?;
        let projections = system
            .constraints()
            .iter()
            .map(|c| Projection::new(system.full_vars(), system.alphabet(), c.vars()))
            .collect::<Result<Vec<_>>>()?;
        let mut floored = 0usize;
        let targets = system
            .constraints()
            .iter()
            .map(|c| {
                let raw = c.target().values();
                if raw.iter().all(|&x| x >= TARGET_FLOOR) {
                    return raw.to_vec();
                }
                let mut v: Vec<f64> = raw
                    .iter()
                    .map(|&x| {
                        if x < TARGET_FLOOR {
                            floored += 1;
                            TARGET_FLOOR
                        } else {
                            x
                        }
                    })
                    .collect();
                let total: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= total);
                v
            })
            .collect();
        if floored > 0 {
            warn!("{floored} target cells below {TARGET_FLOOR:e} raised to the floor");
        }
        Ok(Problem {
            system,
            projections,
            targets,
            joint_len,
        })
    }

    pub(crate) fn check_dual(&self, dual: &DualVariables) -> Result<()> {
        if dual.blocks.len() != self.targets.len()
            || dual.blocks.iter().zip(&self.targets).any(|(b, t)| b.len() != t.len())
        {
            return shape("dual blocks do not match the constraint tables");
        }
        Ok(())
    }

    /// `Σ_c λ_c(x restricted to c)` at every outcome.
    pub(crate) fn logits(&self, dual: &DualVariables) -> Vec<f64> {
        let mut s = vec![0.0; self.joint_len];
        for (proj, block) in self.projections.iter().zip(&dual.blocks) {
            for (v, cell) in s.iter_mut().zip(proj.iter()) {
                *v += block[cell];
            }
        }
        s
    }

    /// Marginal of `f` on every constraint.
    pub(crate) fn marginals(&self, f: &[f64]) -> Vec<Vec<f64>> {
        self.projections.iter().map(|p| p.reduce(f)).collect()
    }

    /// Largest `|marginal - target|` per constraint, against the unfloored targets.
    pub(crate) fn residuals(&self, f: &[f64]) -> Vec<f64> {
        self.marginals(f)
            .iter()
            .zip(self.system.constraints())
            .map(|(m, c)| {
                m.iter()
                    .zip(c.target().values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// `Σ_c Σ_a λ_c(a) target_c(a)`.
    pub(crate) fn linear_term(&self, dual: &DualVariables) -> f64 {
        dual.blocks
            .iter()
            .zip(&self.targets)
            .map(|(b, t)| b.iter().zip(t).map(|(l, p)| l * p).sum::<f64>())
            .sum()
    }
}

/// Normalized `exp(logits)` and `ln Σ exp(logits)`, shifted by the max.
pub(crate) fn softmax(logits: &[f64]) -> (Vec<f64>, f64) {
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut f: Vec<f64> = logits.iter().map(|&s| (s - top).exp()).collect();
    let z: f64 = f.iter().sum();
    f.iter_mut().for_each(|x| *x /= z);
    (f, top + z.ln())
}
