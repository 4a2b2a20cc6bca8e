//! Maximum-entropy joints from marginal constraints, solved in the dual.
//!
//! The maximum-entropy joint under marginal constraints has the
//! exponential-family form
//!
//! ```text
//! f(x) = exp( Σ_c λ_c(x_c) ) / Z(λ)
//! ```
//!
//! with one multiplier per constraint cell. Minimizing the convex dual
//! `D(λ) = ln Z(λ) - Σ_c Σ_a λ_c(a) p_c(a)` recovers it; the gradient of `D`
//! with respect to `λ_c(a)` is the constraint residual `f_c(a) - p_c(a)`.
//!
//! Two strategies are provided:
//!
//! * [`Strategy::Newton`]: damped Newton on the kept (independent)
//!   multipliers, with the Newton system solved by conjugate gradients.
//!   Hessian-vector products are formed from marginals of the current joint,
//!   so the Hessian is never materialized.
//! * [`Strategy::Multiplicative`]: cyclic proportional fitting, rescaling the
//!   joint to match one constraint marginal after another.

mod moments;
mod newton;
mod problem;
mod proportional;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::constraints::{check_consistency, ConstraintSystem, ReductionPlan};
use crate::error::{argument, shape, Error, Result};
use crate::table::{Assignment, ConditionalSlice, JointTable, VarId};

pub use moments::{solve_moments, MomentProblem, MomentSolution};
pub use problem::TARGET_FLOOR;
use problem::{softmax, Problem};

/// Lagrange multipliers, one table per constraint laid out like its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVariables {
    pub blocks: Vec<Vec<f64>>,
}

impl DualVariables {
    pub fn zeros(system: &ConstraintSystem) -> Self {
        DualVariables {
            blocks: system.constraints().iter().map(|c| vec![0.0; c.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[serde(alias = "MULTIPLICATIVE")]
    Multiplicative,
    #[serde(alias = "NEWTON")]
    Newton,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "multiplicative" | "ipf" => Ok(Strategy::Multiplicative),
            "newton" => Ok(Strategy::Newton),
            other => argument(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub strategy: Strategy,
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    /// Initial Newton step length; halved on dual increase.
    pub damping: f64,
    /// Random multiplier initialization; `None` starts from zero (uniform joint).
    pub seed: Option<u64>,
}

impl SolverConfig {
    pub fn newton() -> Self {
        SolverConfig {
            strategy: Strategy::Newton,
            max_iterations: 200,
            residual_tolerance: 1e-10,
            damping: 1.0,
            seed: None,
        }
    }

    pub fn multiplicative() -> Self {
        SolverConfig {
            strategy: Strategy::Multiplicative,
            max_iterations: 10_000,
            ..SolverConfig::newton()
        }
    }

    /// Defaults for `strategy`.
    pub fn for_strategy(strategy: Strategy) -> Self {
        match strategy {
            Strategy::Newton => SolverConfig::newton(),
            Strategy::Multiplicative => SolverConfig::multiplicative(),
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.residual_tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.residual_tolerance.is_nan() || self.residual_tolerance <= 0.0 {
            return argument("residual tolerance must be > 0");
        }
        if self.max_iterations == 0 {
            return argument("max_iterations must be >= 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return argument("damping must lie in (0, 1]");
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::newton()
    }
}

/// Optimized joint plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub joint: JointTable,
    pub dual: DualVariables,
    /// Max-abs violation per constraint.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub iterations: usize,
    pub entropy: f64,
    pub converged: bool,
    pub strategy: Strategy,
    pub wall_time_ms: f64,
}

/// Finds the maximum-entropy joint satisfying `system`.
///
/// Non-convergence is reported through [`SolveResult::converged`], not as
/// an error.
pub fn solve(system: &ConstraintSystem, plan: &ReductionPlan, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let report = check_consistency(system);
    if !report.is_consistent() {
        return Err(Error::Consistency(Box::new(report)));
    }
    let m = system.constraints().len();
    for at in plan.kept.iter().chain(plan.dropped.iter().map(|d| &d.cell)) {
        if at.constraint >= m || at.cell >= system.constraints()[at.constraint].len() {
            return shape("reduction plan does not belong to this system");
        }
    }
    let problem = Problem::new(system)?;
    let start = Instant::now();
    let outcome = match config.strategy {
        Strategy::Newton => newton::run(&problem, plan, config),
        Strategy::Multiplicative => proportional::run(&problem, config),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let residuals = problem.residuals(&outcome.joint);
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let joint = JointTable::new(system.full_vars().to_vec(), system.alphabet(), outcome.joint)?;
    Ok(SolveResult {
        entropy: joint.entropy(),
        joint,
        dual: outcome.dual,
        converged: max_residual <= config.residual_tolerance,
        residuals,
        max_residual,
        iterations: outcome.iterations,
        strategy: config.strategy,
        wall_time_ms,
    })
}

pub(crate) struct Outcome {
    pub(crate) joint: Vec<f64>,
    pub(crate) dual: DualVariables,
    pub(crate) iterations: usize,
}

/// Per-constraint max-abs difference between marginals of `joint` and targets.
pub fn residuals(joint: &JointTable, system: &ConstraintSystem) -> Result<Vec<f64>> {
    let marginals = system.marginals_of(joint)?;
    Ok(marginals
        .iter()
        .zip(system.constraints())
        .map(|(m, c)| m.max_abs_diff(c.target()).expect("canonical layout"))
        .collect())
}

/// Joint induced by multipliers: `exp(Σ λ) / Z`.
pub fn induced_joint(dual: &DualVariables, system: &ConstraintSystem) -> Result<JointTable> {
    let problem = Problem::new(system)?;
    problem.check_dual(dual)?;
    let (f, _) = softmax(&problem.logits(dual));
    JointTable::new(system.full_vars().to_vec(), system.alphabet(), f)
}

/// `ln Z(λ) - Σ λ·p`, evaluated with a max shift so it never overflows.
pub fn dual_objective(dual: &DualVariables, system: &ConstraintSystem) -> Result<f64> {
    let problem = Problem::new(system)?;
    problem.check_dual(dual)?;
    if !dual.is_finite() {
        return argument("dual variables must be finite");
    }
    let (_, log_z) = softmax(&problem.logits(dual));
    Ok(log_z - problem.linear_term(dual))
}

/// Gradient of [`dual_objective`]: signed residual `f_c(a) - p_c(a)` per cell.
pub fn dual_gradient(dual: &DualVariables, system: &ConstraintSystem) -> Result<Vec<Vec<f64>>> {
    let problem = Problem::new(system)?;
    problem.check_dual(dual)?;
    let (f, _) = softmax(&problem.logits(dual));
    Ok(problem
        .marginals(&f)
        .into_iter()
        .zip(&problem.targets)
        .map(|(m, t)| m.iter().zip(t).map(|(a, b)| a - b).collect())
        .collect())
}

/// Spread of `ln f(x) - Σ_c λ_c(x_c)` over outcomes; zero for an exact
/// exponential-family joint.
pub fn exponential_family_gap(result: &SolveResult, system: &ConstraintSystem) -> Result<f64> {
    let problem = Problem::new(system)?;
    problem.check_dual(&result.dual)?;
    let logits = problem.logits(&result.dual);
    let (lo, hi) = result
        .joint
        .values()
        .iter()
        .zip(&logits)
        .map(|(f, s)| f.ln() - s)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    Ok(hi - lo)
}

/// Conditional of `target` under the solved joint; unassigned variables
/// are summed out.
pub fn augmented_conditional(result: &SolveResult, target: VarId, context: &Assignment) -> Result<ConditionalSlice> {
    result.joint.condition(target, context)
}

/// Reduces and solves in one call.
pub fn solve_system(system: &ConstraintSystem, config: &SolverConfig) -> Result<SolveResult> {
    let plan = crate::constraints::reduce_redundancy(system)?;
    solve(system, &plan, config)
}
