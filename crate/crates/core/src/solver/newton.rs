//! Damped Newton on the kept multipliers, with a matrix-free CG inner solve.

use log::debug;
use rand::Rng;

use super::problem::{softmax, Problem};
use super::{DualVariables, Outcome, SolverConfig};
use crate::constraints::ReductionPlan;
use crate::sample::seeded_rng;

pub(crate) const MAX_HALVINGS: usize = 30;
const CG_RELATIVE_TOLERANCE: f64 = 1e-14;

struct Reduced<'p, 'a> {
    problem: &'p Problem<'a>,
    kept: Vec<Vec<usize>>,
}

impl Reduced<'_, '_> {
    fn dim(&self) -> usize {
        self.kept.iter().map(Vec::len).sum()
    }

    fn expand(&self, x: &[f64]) -> DualVariables {
        let mut dual = DualVariables {
            blocks: self.problem.targets.iter().map(|t| vec![0.0; t.len()]).collect(),
        };
        let mut k = 0;
        for (block, cells) in dual.blocks.iter_mut().zip(&self.kept) {
            for &cell in cells {
                block[cell] = x[k];
                k += 1;
            }
        }
        dual
    }

    fn gather(&self, blocks: &[Vec<f64>]) -> Vec<f64> {
        self.kept
            .iter()
            .zip(blocks)
            .flat_map(|(cells, b)| cells.iter().map(move |&c| b[c]))
            .collect()
    }

    /// Joint, dual objective value.
    fn evaluate(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let dual = self.expand(x);
        let (f, log_z) = softmax(&self.problem.logits(&dual));
        (f, log_z - self.problem.linear_term(&dual))
    }

    /// Covariance of the kept cell indicators under `f`, applied to `v`.
    fn hessian_apply(&self, f: &[f64], marg: &[f64], v: &[f64]) -> Vec<f64> {
        let dual = self.expand(v);
        let u = self.problem.logits(&dual);
        let mean: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = f.iter().zip(&u).map(|(a, b)| a * b).collect();
        let wm = self.gather(&self.problem.marginals(&w));
        wm.iter().zip(marg).map(|(a, m)| a - m * mean).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn conjugate_gradient(op: impl Fn(&[f64]) -> Vec<f64>, rhs: &[f64], max_iter: usize) -> Vec<f64> {
    let mut x = vec![0.0; rhs.len()];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = (CG_RELATIVE_TOLERANCE * rr.sqrt()).powi(2);
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        let ap = op(&p);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

pub(crate) fn run(problem: &Problem<'_>, plan: &ReductionPlan, config: &SolverConfig) -> Outcome {
    let reduced = Reduced {
        problem,
        kept: plan.kept_by_constraint(problem.targets.len()),
    };
    let dim = reduced.dim();
    let mut x = match config.seed {
        Some(seed) => {
            let mut rng = seeded_rng(seed);
            (0..dim).map(|_| rng.random_range(-0.1..0.1)).collect()
        }
        None => vec![0.0; dim],
    };
    let (mut f, mut value) = reduced.evaluate(&x);
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let residual = problem.residuals(&f).into_iter().fold(0.0, f64::max);
        if residual <= config.residual_tolerance || dim == 0 {
            break;
        }
        let marg = reduced.gather(&problem.marginals(&f));
        let target = reduced.gather(&problem.targets);
        let grad: Vec<f64> = marg.iter().zip(&target).map(|(m, t)| m - t).collect();
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = conjugate_gradient(|v| reduced.hessian_apply(&f, &marg, v), &rhs, 4 * dim);
        iterations += 1;

        let slack = 1e-14 * value.abs().max(1.0);
        let mut t = config.damping;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            let (ft, vt) = reduced.evaluate(&trial);
            if vt.is_finite() && vt <= value + slack {
                x = trial;
                f = ft;
                value = vt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        debug!("newton step {iterations}: residual {residual:.3e}, step {t:.3e}, dual {value:.12}");
        if !accepted {
            debug!("line search stalled");
            break;
        }
    }
    Outcome {
        joint: f,
        dual: reduced.expand(&x),
        iterations,
    }
}
