//! The five subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mepkit::chains::fit_chain;
use mepkit::constraints::{check_consistency, reduce_redundancy};
use mepkit::geometric::GeometricModel;
use mepkit::inequalities::{
    context_chain, verify_chain_spread, verify_entropy_chain, verify_nested_spread, verify_pairwise_spread,
};
use mepkit::sample::{dirichlet_joint, sample_with, seeded_rng};
use mepkit::{Alphabet, Assignment, ConstraintSystem, JointTable, Method, SolveResult};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format, Source};

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
}

/// Writes `json` or `csv` to the configured output, stdout by default.
fn emit<T: Serialize>(cfg: &ExperimentConfig, default: Format, value: &T, csv: impl FnOnce() -> String) -> Result<()> {
    let text = match cfg.output.format.unwrap_or(default) {
        Format::Json => {
            let mut s = mepkit::io::to_json(value)?;
            s.push('\n');
            s
        }
        Format::Csv => csv(),
    };
    match &cfg.output.path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Contents of a `file` source.
#[derive(Deserialize)]
#[serde(untagged)]
enum SourceFile {
    System(ConstraintSystem),
    Truth(JointTable),
}

fn synthetic_truth(cfg: &ExperimentConfig, method: Method, t: usize, alphabet: usize, seed: u64) -> Result<JointTable> {
    if method == Method::Custom {
        bail!("custom systems can only be read from a file source");
    }
    cfg.check_budget(method, t, alphabet)?;
    let vars = method.full_vars(t).context("named method")?;
    Ok(dirichlet_joint(vars, Alphabet::new(alphabet)?, &mut seeded_rng(seed))?)
}

/// Constraint system described by the config's method and source.
pub fn build_system(cfg: &ExperimentConfig) -> Result<ConstraintSystem> {
    let (method, t, a) = (cfg.method, cfg.t, cfg.alphabet_size);
    let truth = match &cfg.source {
        Source::SyntheticRandom { seed } => synthetic_truth(cfg, method, t, a, *seed)?,
        Source::SyntheticMarkov { seed, order } => {
            let raw = synthetic_truth(cfg, method, t, a, *seed)?;
            fit_chain(&raw, *order)?.joint()
        }
        Source::File { path } => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json::from_str::<SourceFile>(&text)
                .with_context(|| format!("{} is neither a constraint system nor a joint table", path.display()))?
            {
                SourceFile::System(system) => {
                    let entries = system.joint_len().filter(|&n| n <= cfg.budget);
                    if entries.is_none() {
                        bail!("constraint system joint exceeds the budget of {} entries", cfg.budget);
                    }
                    return Ok(system);
                }
                SourceFile::Truth(truth) => {
                    cfg.check_budget(method, t, truth.alphabet().size())?;
                    truth
                }
            }
        }
    };
    Ok(ConstraintSystem::from_truth(method, t, &truth)?)
}

fn joint_csv(joint: &JointTable) -> String {
    let mut out = String::new();
    for v in joint.vars() {
        let _ = write!(out, "x{v},");
    }
    out.push_str("p\n");
    for (i, p) in joint.values().iter().enumerate() {
        for s in joint.outcome(i) {
            let _ = write!(out, "{s},");
        }
        let _ = writeln!(out, "{p}");
    }
    out
}

pub fn solve(cfg: &ExperimentConfig) -> Result<Status> {
    let system = build_system(cfg)?;
    let report = check_consistency(&system);
    if !report.is_consistent() {
        bail!("inconsistent constraints:\n{report}");
    }
    let plan = reduce_redundancy(&system)?;
    info!(
        "{}: {} cells, {} kept after reduction",
        system.method(),
        system.cell_count(),
        plan.kept.len()
    );
    let result = mepkit::solve(&system, &plan, &cfg.solver_config())?;
    info!(
        "{} iterations, max residual {:.3e}, entropy {:.12}",
        result.iterations, result.max_residual, result.entropy
    );
    emit(cfg, Format::Json, &result, || joint_csv(&result.joint))?;
    if result.converged {
        Ok(Status::Success)
    } else {
        warn!("not converged: max residual {:.3e}", result.max_residual);
        Ok(Status::NotConverged)
    }
}

/// Pass/fail tally of one family of checks.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Tally {
    pub checked: usize,
    pub failed: usize,
    /// Tightest observed margin; negative beyond the slack means a failure.
    pub worst_margin: Option<f64>,
}

impl Tally {
    fn record(&mut self, passed: bool, margin: f64) {
        self.checked += 1;
        if !passed {
            self.failed += 1;
        }
        if margin.is_finite() {
            self.worst_margin = Some(self.worst_margin.map_or(margin, |w: f64| w.min(margin)));
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub joints: usize,
    pub vars: usize,
    pub alphabet_size: usize,
    pub pairwise_spread: Tally,
    pub nested_spread: Tally,
    pub entropy_chain: Tally,
    pub chain_factor_bounds: Tally,
    /// Joints whose chain fits violate the cell-level min/max ordering;
    /// reported only, since that ordering does not hold in general.
    pub chain_cell_order_failures: usize,
    pub skipped_contexts: usize,
    pub passed: bool,
}

fn verify_one(joint: &JointTable, s: &mut VerifySummary) -> Result<()> {
    let pair = verify_pairwise_spread(joint)?;
    s.pairwise_spread.record(pair.passed, pair.worst_margin);
    s.skipped_contexts += pair.skipped_contexts;
    for &target in joint.vars() {
        let nest = context_chain(joint, target)?;
        let r = verify_nested_spread(joint, target, &nest)?;
        s.nested_spread.record(r.passed, r.worst_margin);
        s.skipped_contexts += r.skipped_contexts;
        let e = verify_entropy_chain(joint, target)?;
        s.entropy_chain.record(e.passed, e.worst_margin);
    }
    let c = verify_chain_spread(joint)?;
    s.chain_factor_bounds.record(c.factor_bounds_hold(), f64::INFINITY);
    if !c.joint_order_holds() {
        s.chain_cell_order_failures += 1;
    }
    Ok(())
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Status> {
    let joints: Vec<JointTable> = match &cfg.source {
        Source::File { path } => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let joint: JointTable =
                serde_json::from_str(&text).with_context(|| format!("{} is not a valid joint table", path.display()))?;
            vec![joint.normalize()?]
        }
        Source::SyntheticRandom { seed } | Source::SyntheticMarkov { seed, .. } => {
            if cfg.vars < 3 {
                bail!("the pairwise spread check needs at least 3 variables, got {}", cfg.vars);
            }
            let a = Alphabet::new(cfg.alphabet_size)?;
            if a.outcomes(cfg.vars).is_none_or(|n| n > cfg.budget) {
                bail!("{}^{} entries exceed the budget of {}", cfg.alphabet_size, cfg.vars, cfg.budget);
            }
            let vars: Vec<i32> = (1..=cfg.vars as i32).collect();
            let mut rng = seeded_rng(*seed);
            let order = match cfg.source {
                Source::SyntheticMarkov { order, .. } => Some(order),
                _ => None,
            };
            (0..cfg.trials)
                .map(|_| {
                    let j = dirichlet_joint(vars.clone(), a, &mut rng)?;
                    match order {
                        Some(n) => Ok(fit_chain(&j, n)?.joint()),
                        None => Ok(j),
                    }
                })
                .collect::<mepkit::Result<_>>()?
        }
    };
    let first = &joints[0];
    let mut s = VerifySummary {
        joints: joints.len(),
        vars: first.vars().len(),
        alphabet_size: first.alphabet().size(),
        pairwise_spread: Tally::default(),
        nested_spread: Tally::default(),
        entropy_chain: Tally::default(),
        chain_factor_bounds: Tally::default(),
        chain_cell_order_failures: 0,
        skipped_contexts: 0,
        passed: false,
    };
    for j in &joints {
        verify_one(j, &mut s)?;
    }
    s.passed = [&s.pairwise_spread, &s.nested_spread, &s.entropy_chain, &s.chain_factor_bounds]
        .iter()
        .all(|t| t.failed == 0);
    emit(cfg, Format::Json, &s, || {
        let mut out = String::from("check,checked,failed,worst_margin\n");
        for (name, t) in [
            ("pairwise_spread", &s.pairwise_spread),
            ("nested_spread", &s.nested_spread),
            ("entropy_chain", &s.entropy_chain),
            ("chain_factor_bounds", &s.chain_factor_bounds),
        ] {
            let margin = t.worst_margin.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{name},{},{},{margin}", t.checked, t.failed);
        }
        out
    })?;
    if !s.passed {
        bail!("inequality violations found");
    }
    Ok(Status::Success)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub method: Method,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "I")]
    pub alphabet: usize,
    pub dual_dimension: usize,
    pub wall_time_ms: f64,
    pub iterations: usize,
}

pub const BENCHMARK_COLUMNS: &str = "method,T,I,dual_dimension,wall_time_ms,iterations";

pub fn benchmark(cfg: &ExperimentConfig) -> Result<Status> {
    let seed = match cfg.source {
        Source::SyntheticRandom { seed } | Source::SyntheticMarkov { seed, .. } => seed,
        Source::File { .. } => bail!("benchmarks build their own synthetic problems"),
    };
    let solver = cfg.solver_config();
    let mut rows = Vec::new();
    let mut all_converged = true;
    for &method in &cfg.methods {
        for t in cfg.t_range.0..=cfg.t_range.1 {
            for &a in &cfg.alphabets {
                if method == Method::Custom || (method == Method::Gmep && t < 2) || t == 0 {
                    continue;
                }
                if let Err(e) = cfg.check_budget(method, t, a) {
                    warn!("skipping: {e}");
                    continue;
                }
                let truth = synthetic_truth(cfg, method, t, a, seed)?;
                let system = ConstraintSystem::from_truth(method, t, &truth)?;
                let dim = system.cell_count();
                let expected = method.dual_dimension(t, a).context("dual dimension overflows")?;
                if dim != expected {
                    bail!("{method} T = {t}, I = {a}: built {dim} cells, closed form gives {expected}");
                }
                let plan = reduce_redundancy(&system)?;
                let r = mepkit::solve(&system, &plan, &solver)?;
                all_converged &= r.converged;
                info!("{method} T = {t} I = {a}: {} iterations, {:.2} ms", r.iterations, r.wall_time_ms);
                rows.push(BenchmarkRow {
                    method,
                    t,
                    alphabet: a,
                    dual_dimension: dim,
                    wall_time_ms: r.wall_time_ms,
                    iterations: r.iterations,
                });
            }
        }
    }
    emit(cfg, Format::Csv, &rows, || {
        let mut out = format!("{BENCHMARK_COLUMNS}\n");
        for r in &rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{}",
                r.method, r.t, r.alphabet, r.dual_dimension, r.wall_time_ms, r.iterations
            );
        }
        out
    })?;
    Ok(if all_converged { Status::Success } else { Status::NotConverged })
}

#[derive(Debug, Clone, Serialize)]
pub struct Generated {
    pub window: Vec<i32>,
    pub sequence: Vec<usize>,
    /// Untempered `ln p` of each drawn symbol under its conditional.
    pub logprobs: Vec<f64>,
    pub total_logprob: f64,
}

/// Samples `length` symbols, each conditioned on as many preceding symbols
/// as the window holds; contexts of zero mass are shortened from the
/// oldest end.
pub fn generate_from(joint: &JointTable, length: usize, temperature: f64, seed: u64) -> Result<Generated> {
    if length == 0 {
        bail!("sequence length must be >= 1");
    }
    let window = joint.vars().to_vec();
    let w = window.len();
    let mut rng = seeded_rng(seed);
    let mut sequence = Vec::with_capacity(length);
    let mut logprobs = Vec::with_capacity(length);
    for i in 0..length {
        let k = i.min(w - 1);
        let target = window[k];
        let mut slice = None;
        for m in (0..=k).rev() {
            let given: Assignment = (k - m..k).map(|j| (window[j], sequence[i - k + j])).collect();
            match joint.condition(target, &given) {
                Ok(s) => {
                    slice = Some(s);
                    break;
                }
                Err(mepkit::Error::ConditioningOnNullEvent) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        let slice = slice.context("joint has zero mass")?;
        let s = sample_with(&slice, temperature, &mut rng)?;
        sequence.push(s);
        logprobs.push(slice.probs[s].ln());
    }
    Ok(Generated {
        window,
        total_logprob: logprobs.iter().sum(),
        sequence,
        logprobs,
    })
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Status> {
    let joint = match &cfg.input {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let r: SolveResult =
                serde_json::from_str(&text).with_context(|| format!("{} is not a solve result", path.display()))?;
            r.joint
        }
        None => {
            let system = build_system(cfg)?;
            let r = mepkit::solver::solve_system(&system, &cfg.solver_config())?;
            if !r.converged {
                warn!("sampling from an unconverged joint: max residual {:.3e}", r.max_residual);
            }
            r.joint
        }
    };
    let g = generate_from(&joint, cfg.length, cfg.temperature, cfg.sample_seed)?;
    emit(cfg, Format::Json, &g, || {
        let mut out = String::from("step,symbol,logprob\n");
        for (i, (s, lp)) in g.sequence.iter().zip(&g.logprobs).enumerate() {
            let _ = writeln!(out, "{i},{s},{lp}");
        }
        out
    })?;
    Ok(Status::Success)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometricRow {
    pub mu: f64,
    pub h_closed: f64,
    pub h_numeric: f64,
    pub spread: f64,
}

pub fn geometric(cfg: &ExperimentConfig) -> Result<Status> {
    let rows = cfg
        .mus
        .iter()
        .map(|&mu| {
            let g = GeometricModel::new(mu)?;
            Ok(GeometricRow {
                mu,
                h_closed: g.entropy_closed(),
                h_numeric: g.entropy_numeric(cfg.tail_tolerance)?,
                spread: g.spread(),
            })
        })
        .collect::<mepkit::Result<Vec<_>>>()?;
    emit(cfg, Format::Csv, &rows, || {
        let mut out = String::from("mu,H_closed,H_numeric,spread\n");
        for r in &rows {
            let _ = writeln!(out, "{},{},{},{}", r.mu, r.h_closed, r.h_numeric, r.spread);
        }
        out
    })?;
    Ok(Status::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copy_chain() -> JointTable {
        let a = Alphabet::new(2).unwrap();
        JointTable::from_fn(vec![1, 2, 3], a, |x| if x[0] == x[1] && x[1] == x[2] { 0.5 } else { 0.0 }).unwrap()
    }

    #[test]
    fn cold_generation_is_greedy() {
        let a = Alphabet::new(2).unwrap();
        let j = JointTable::from_fn(vec![1, 2], a, |x| [[0.1, 0.3], [0.5, 0.1]][x[0]][x[1]]).unwrap();
        let g = generate_from(&j, 6, 0.0, 0).unwrap();
        // p(x1) = (0.4, 0.6) -> 1; p(x2 | 1) = (5/6, 1/6) -> 0; p(x2 | 0) = (1/4, 3/4) -> 1.
        assert_eq!(g.sequence, vec![1, 0, 1, 0, 1, 0]);
        assert!((g.logprobs[0] - 0.6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn copy_chain_repeats_first_symbol() {
        for seed in 0..20 {
            let g = generate_from(&copy_chain(), 30, 1.0, seed).unwrap();
            assert!(g.sequence.iter().all(|&s| s == g.sequence[0]));
            assert!(g.logprobs[1..].iter().all(|&lp| lp == 0.0));
        }
    }

    #[test]
    fn generation_is_seeded() {
        let j = copy_chain();
        assert_eq!(generate_from(&j, 10, 1.0, 4).unwrap().sequence, generate_from(&j, 10, 1.0, 4).unwrap().sequence);
        assert!(generate_from(&j, 0, 1.0, 4).is_err());
        assert!(generate_from(&j, 3, -1.0, 4).is_err());
    }
}
