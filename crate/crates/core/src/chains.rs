//! Order-n autoregressive chains fitted exactly from a ground-truth joint.
//!
//! An order-`n` chain over variables `x_1..x_N` factorizes as
//! `Π_i p(x_i | x_{i-1}, ..., x_{i-n})`, with contexts truncated at the first
//! variable. Order 0 is the independent model, order 1 the Markov chain,
//! order 2 the augmented Markov chain, and order `N - 1` reproduces the
//! truth exactly.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::table::{entropy_of, Alphabet, Assignment, ConditionalSlice, JointTable, Projection, VarId};

/// Conditional table `p(target | context)`, row-major over `(context..., target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainFactor {
    target: VarId,
    context: Vec<VarId>,
    probs: Vec<f64>,
    /// Truth mass of each context row; zero for unreachable contexts.
    context_mass: Vec<f64>,
}

impl ChainFactor {
    pub fn target(&self) -> VarId {
        self.target
    }

    pub fn context(&self) -> &[VarId] {
        &self.context
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn context_mass(&self) -> &[f64] {
        &self.context_mass
    }

    fn radix(&self) -> usize {
        self.probs.len() / self.context_mass.len()
    }

    /// Conditional row for context row `ctx` (row-major index over the context vars).
    pub fn row(&self, ctx: usize) -> &[f64] {
        let r = self.radix();
        &self.probs[ctx * r..(ctx + 1) * r]
    }

    /// Rows whose context has positive mass under the truth.
    pub fn reachable_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.context_mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(c, _)| self.row(c))
    }

    pub fn slice(&self, given: &[usize]) -> Result<ConditionalSlice> {
        if given.len() != self.context.len() {
            return argument(format!(
                "factor for {} needs {} context symbols",
                self.target,
                self.context.len()
            ));
        }
        let r = self.radix();
        let mut ctx = 0;
        for &s in given {
            if s >= r {
                return argument(format!("symbol {s} outside alphabet of size {r}"));
            }
            ctx = ctx * r + s;
        }
        let assignment: Assignment = self.context.iter().copied().zip(given.iter().copied()).collect();
        ConditionalSlice::new(self.target, assignment, self.row(ctx).to_vec())
    }
}

/// Log-probability of a sequence, with zero probability kept explicit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum LogProb {
    Impossible,
    Finite(f64),
}

impl LogProb {
    pub fn from_prob(p: f64) -> Self {
        if p > 0.0 {
            LogProb::Finite(p.ln())
        } else {
            LogProb::Impossible
        }
    }

    pub fn value(self) -> f64 {
        match self {
            LogProb::Impossible => f64::NEG_INFINITY,
            LogProb::Finite(x) => x,
        }
    }

    pub fn is_impossible(self) -> bool {
        matches!(self, LogProb::Impossible)
    }
}

/// Exact order-`n` factorization of a truth joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainFile", into = "ChainFile")]
pub struct ChainModel {
    order: usize,
    factors: Vec<ChainFactor>,
    truth: JointTable,
}

/// On-disk layout: the truth table plus the chain order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainFile {
    pub vars: Vec<VarId>,
    pub alphabet_size: usize,
    pub values: Vec<f64>,
    pub order: usize,
}

impl TryFrom<ChainFile> for ChainModel {
    type Error = Error;

    fn try_from(f: ChainFile) -> Result<Self> {
        let truth = JointTable::new(f.vars, Alphabet::new(f.alphabet_size)?, f.values)?;
        fit_chain(&truth, f.order)
    }
}

impl From<ChainModel> for ChainFile {
    fn from(m: ChainModel) -> Self {
        let order = m.order;
        let t = crate::table::TableFile::from(m.truth);
        ChainFile {
            vars: t.vars,
            alphabet_size: t.alphabet_size,
            values: t.values,
            order,
        }
    }
}

/// Fits the order-`order` chain whose factors are the exact conditionals of `truth`.
///
/// Contexts with zero truth mass get a uniform row.
pub fn fit_chain(truth: &JointTable, order: usize) -> Result<ChainModel> {
    let vars = truth.vars();
    if order >= vars.len() {
        return argument(format!(
            "chain order {order} needs more than {} variables",
            vars.len()
        ));
    }
    let truth = truth.normalize()?;
    let radix = truth.alphabet().size();
    let mut factors = Vec::with_capacity(vars.len());
    for i in 0..vars.len() {
        let context = vars[i.saturating_sub(order)..i].to_vec();
        let mut keep = context.clone();
        keep.push(vars[i]);
        let marg = truth.marginalize(&keep)?;
        let mut probs = marg.into_values();
        let mut context_mass = Vec::with_capacity(probs.len() / radix);
        for row in probs.chunks_mut(radix) {
            let mass: f64 = row.iter().sum();
            context_mass.push(mass);
            if mass > 0.0 {
                row.iter_mut().for_each(|p| *p /= mass);
            } else {
                row.fill(1.0 / radix as f64);
            }
        }
        factors.push(ChainFactor {
            target: vars[i],
            context,
            probs,
            context_mass,
        });
    }
    Ok(ChainModel {
        order,
        factors,
        truth,
    })
}

impl ChainModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn vars(&self) -> &[VarId] {
        self.truth.vars()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.truth.alphabet()
    }

    pub fn factors(&self) -> &[ChainFactor] {
        &self.factors
    }

    /// The joint the chain was fitted from.
    pub fn truth(&self) -> &JointTable {
        &self.truth
    }

    /// Product of all factors at every outcome.
    pub fn joint(&self) -> JointTable {
        let vars = self.vars().to_vec();
        let alphabet = self.alphabet();
        let n = self.truth.len();
        let mut values = vec![1.0; n];
        for f in &self.factors {
            let mut keep = f.context.clone();
            keep.push(f.target);
            let proj = Projection::new(&vars, alphabet, &keep).expect("factor vars are table vars");
            for (v, cell) in values.iter_mut().zip(proj.iter()) {
                *v *= f.probs[cell];
            }
        }
        JointTable::new(vars, alphabet, values).expect("product of conditionals is a valid table")
    }

    /// `Σ_i H(x_i | context_i)` with contexts weighted by the truth.
    pub fn entropy(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let r = f.radix();
                f.context_mass
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m > 0.0)
                    .map(|(c, &m)| m * entropy_of(&f.probs[c * r..(c + 1) * r]))
                    .sum::<f64>()
            })
            .sum()
    }

    /// `Σ_i ln p(x_i | context_i)` along `sequence`.
    pub fn sequence_logprob(&self, sequence: &[usize]) -> Result<LogProb> {
        if sequence.len() != self.len() {
            return argument(format!(
                "sequence has {} symbols, chain has {} variables",
                sequence.len(),
                self.len()
            ));
        }
        let r = self.alphabet().size();
        if let Some(&s) = sequence.iter().find(|&&s| s >= r) {
            return argument(format!("symbol {s} outside alphabet of size {r}"));
        }
        let mut total = 0.0;
        for (i, f) in self.factors.iter().enumerate() {
            let start = i - f.context.len();
            let cell = sequence[start..=i].iter().fold(0, |acc, &s| acc * r + s);
            match LogProb::from_prob(f.probs[cell]) {
                LogProb::Impossible => return Ok(LogProb::Impossible),
                LogProb::Finite(x) => total += x,
            }
        }
        Ok(LogProb::Finite(total))
    }
}
