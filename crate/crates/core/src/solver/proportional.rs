//! Cyclic proportional fitting.

use log::debug;
use rand::Rng;

use super::problem::{softmax, Problem};
use super::{DualVariables, Outcome, SolverConfig};
use crate::sample::seeded_rng;

pub(crate) fn run(problem: &Problem<'_>, config: &SolverConfig) -> Outcome {
    let mut dual = DualVariables {
        blocks: problem.targets.iter().map(|t| vec![0.0; t.len()]).collect(),
    };
    if let Some(seed) = config.seed {
        let mut rng = seeded_rng(seed);
        dual.blocks
            .iter_mut()
            .flatten()
            .for_each(|x| *x = rng.random_range(-0.1..0.1));
    }
    let (mut f, _) = softmax(&problem.logits(&dual));
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let residual = problem.residuals(&f).into_iter().fold(0.0, f64::max);
        if residual <= config.residual_tolerance {
            break;
        }
        for ((proj, target), block) in problem.projections.iter().zip(&problem.targets).zip(&mut dual.blocks) {
            let marg = proj.reduce(&f);
            let ratio: Vec<f64> = target.iter().zip(&marg).map(|(t, m)| t / m).collect();
            for (v, cell) in f.iter_mut().zip(proj.iter()) {
                *v *= ratio[cell];
            }
            for (l, r) in block.iter_mut().zip(&ratio) {
                *l += r.ln();
            }
            let z: f64 = f.iter().sum();
            f.iter_mut().for_each(|v| *v /= z);
        }
        iterations += 1;
        if iterations % 1000 == 0 {
            debug!("sweep {iterations}: residual {residual:.3e}");
        }
    }
    Outcome {
        joint: f,
        dual,
        iterations,
    }
}
