//! Experiment configuration: a TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mepkit::{Method, SolverConfig, Strategy};
use serde::{Deserialize, Serialize};

/// Largest full joint a run may allocate, in table entries.
pub const DEFAULT_BUDGET: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    /// Dirichlet(1) joint over the method's variables.
    SyntheticRandom { seed: u64 },
    /// Order-`order` chain fitted to a Dirichlet(1) joint.
    SyntheticMarkov { seed: u64, order: usize },
    /// A JSON constraint system, or a JSON joint table to take marginals from.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Output {
    pub path: Option<PathBuf>,
    /// Each subcommand picks its own default when absent.
    pub format: Option<Format>,
}

/// Solver settings as written in the file; missing fields take the
/// strategy's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub strategy: Option<Strategy>,
    pub max_iterations: Option<usize>,
    pub residual_tolerance: Option<f64>,
    pub damping: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(rename = "T")]
    pub t: usize,
    pub alphabet_size: usize,
    pub source: Source,
    pub solver: SolverSection,
    pub output: Output,
    pub budget: usize,
    /// `verify`: number of random joints and their variable count.
    pub trials: usize,
    pub vars: usize,
    /// `benchmark`: swept methods, `T` range (inclusive) and alphabet sizes.
    pub methods: Vec<Method>,
    pub t_range: (usize, usize),
    pub alphabets: Vec<usize>,
    /// `generate`: sequence length, sampling temperature, solved input.
    pub length: usize,
    pub temperature: f64,
    pub sample_seed: u64,
    pub input: Option<PathBuf>,
    /// `geometric`: mean grid and truncation tolerance.
    pub mus: Vec<f64>,
    pub tail_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::MepT,
            t: 1,
            alphabet_size: 2,
            source: Source::SyntheticRandom { seed: 0 },
            solver: SolverSection::default(),
            output: Output::default(),
            budget: DEFAULT_BUDGET,
            trials: 1000,
            vars: 3,
            methods: vec![Method::MepT, Method::Gmep, Method::Smep],
            t_range: (1, 3),
            alphabets: vec![2],
            length: 100,
            temperature: 1.0,
            sample_seed: 0,
            input: None,
            mus: vec![1.01, 1.1, 1.5, 2.0, 5.0, 10.0, 100.0],
            tail_tolerance: 1e-12,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// TOML experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// mep_t, gmep, smep or custom.
    #[arg(long, global = true, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long = "T", global = true)]
    pub t: Option<usize>,
    /// Alphabet size.
    #[arg(long, global = true)]
    pub alphabet: Option<usize>,
    /// Seed for synthetic joints and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// newton or multiplicative.
    #[arg(long, global = true, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long = "max-iters", global = true)]
    pub max_iters: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: mepkit::Error| e.to_string())
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: mepkit::Error| e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative source paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Source::File { path: p } = &mut cfg.source {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut cfg.input {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Config file (or defaults) with flags applied on top.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = args.method {
            cfg.method = m;
            cfg.methods = vec![m];
        }
        if let Some(t) = args.t {
            cfg.t = t;
            cfg.t_range = (t, t);
        }
        if let Some(a) = args.alphabet {
            cfg.alphabet_size = a;
            cfg.alphabets = vec![a];
        }
        if let Some(seed) = args.seed {
            cfg.sample_seed = seed;
            match &mut cfg.source {
                Source::SyntheticRandom { seed: s } | Source::SyntheticMarkov { seed: s, .. } => *s = seed,
                Source::File { .. } => {}
            }
            if cfg.solver.seed.is_some() {
                cfg.solver.seed = Some(seed);
            }
        }
        if let Some(s) = args.strategy {
            cfg.solver.strategy = Some(s);
        }
        if let Some(t) = args.tolerance {
            cfg.solver.residual_tolerance = Some(t);
        }
        if let Some(n) = args.max_iters {
            cfg.solver.max_iterations = Some(n);
        }
        if let Some(p) = &args.out {
            cfg.output.path = Some(p.clone());
        }
        if let Some(f) = args.format {
            cfg.output.format = Some(f);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.alphabet_size < 1 || self.alphabets.contains(&0) {
            bail!("alphabet size must be >= 1");
        }
        if self.t_range.0 > self.t_range.1 {
            bail!("empty T range {:?}", self.t_range);
        }
        if let Source::File { path } = &self.source {
            if !path.exists() {
                bail!("source file {} does not exist", path.display());
            }
        }
        if let Some(p) = &self.input {
            if !p.exists() {
                bail!("input file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let base = SolverConfig::for_strategy(s.strategy.unwrap_or(Strategy::Newton));
        SolverConfig {
            max_iterations: s.max_iterations.unwrap_or(base.max_iterations),
            residual_tolerance: s.residual_tolerance.unwrap_or(base.residual_tolerance),
            damping: s.damping.unwrap_or(base.damping),
            seed: s.seed,
            ..base
        }
    }

    /// Refuses methods whose full joint exceeds the entry budget.
    pub fn check_budget(&self, method: Method, t: usize, alphabet: usize) -> Result<usize> {
        let vars = method
            .full_vars(t)
            .map(|v| v.len())
            .unwrap_or(2 * t + 1);
        let entries = mepkit::Alphabet::new(alphabet)?
            .outcomes(vars)
            .filter(|&n| n <= self.budget);
        match entries {
            Some(n) => Ok(n),
            None => bail!(
                "{method} with T = {t}, I = {alphabet} needs {alphabet}^{vars} joint entries, over the budget of {}",
                self.budget
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = r#"
            method = "SMEP"
            T = 3
            alphabet_size = 2
            [source]
            kind = "synthetic_markov"
            seed = 7
            order = 1
            [solver]
            strategy = "multiplicative"
            residual_tolerance = 1e-11
            [output]
            format = "csv"
        "#;
        let cfg: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.method, Method::Smep);
        assert_eq!(cfg.t, 3);
        assert_eq!(cfg.source, Source::SyntheticMarkov { seed: 7, order: 1 });
        let s = cfg.solver_config();
        assert_eq!(s.strategy, Strategy::Multiplicative);
        assert_eq!(s.max_iterations, 10_000);
        assert_eq!(s.residual_tolerance, 1e-11);
        assert_eq!(cfg.output.format, Some(Format::Csv));
    }

    #[test]
    fn flags_override_defaults() {
        let args = CommonArgs {
            method: Some(Method::Gmep),
            t: Some(4),
            seed: Some(9),
            tolerance: Some(1e-9),
            ..CommonArgs::default()
        };
        let cfg = ExperimentConfig::resolve(&args).unwrap();
        assert_eq!(cfg.method, Method::Gmep);
        assert_eq!(cfg.t_range, (4, 4));
        assert_eq!(cfg.source, Source::SyntheticRandom { seed: 9 });
        assert_eq!(cfg.solver_config().residual_tolerance, 1e-9);
        assert_eq!(cfg.solver_config().max_iterations, 200);
    }

    #[test]
    fn budget_guard() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.check_budget(Method::MepT, 1, 2).unwrap(), 8);
        assert!(cfg.check_budget(Method::MepT, 13, 2).is_err());
        assert!(cfg.check_budget(Method::Smep, 40, 10).is_err());
        assert_eq!(cfg.check_budget(Method::Gmep, 4, 2).unwrap(), 16);
    }

    #[test]
    fn rejects_unknown_method() {
        assert!(parse_method("nope").is_err());
        assert_eq!(parse_method("MEP_T").unwrap(), Method::MepT);
    }
}
