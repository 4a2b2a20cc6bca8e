//! Numerical checks that conditioning widens probability bounds and lowers
//! entropy.
//!
//! For a target `X` and contexts `G ⊂ G'`, every conditional `p(x | g)` is a
//! mixture of the refined conditionals `p(x | g')` over the extensions of
//! `g`, so it lies between their minimum and maximum. Taking extremes over
//! all symbols and contexts gives
//!
//! ```text
//! min p(x | G') <= min p(x | G) <= max p(x | G) <= max p(x | G')
//! ```
//!
//! and averaging `-ln` gives `H(X | G') <= H(X | G)`. The verifiers enumerate
//! every term and report each inequality that fails by more than [`SLACK`].
//! Contexts of zero mass have no conditional and are skipped.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::chains::fit_chain;
use crate::error::{argument, Error, Result};
use crate::geometric::GeometricModel;
use crate::table::{Assignment, JointTable, Projection, VarId};

/// Absolute float slack on every inequality.
pub const SLACK: f64 = 1e-12;

/// Which side of the chain failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The refined minimum exceeds the coarse minimum.
    Min,
    /// The refined maximum falls below the coarse maximum.
    Max,
    /// A coarse conditional lies below every refinement of its context.
    BelowRefinements,
    /// A coarse conditional lies above every refinement of its context.
    AboveRefinements,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadViolation {
    pub kind: ViolationKind,
    /// Indices into [`SpreadReport::levels`] of the coarse and refined level.
    pub orders: (usize, usize),
    /// Target and context symbols where the offending value was found.
    pub outcome: Assignment,
    pub coarse: f64,
    pub fine: f64,
}

/// Extremes of `p(target | context)` over symbols and positive-mass contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadLevel {
    pub context: Vec<VarId>,
    pub min: f64,
    pub max: f64,
    pub positive_contexts: usize,
}

impl SpreadLevel {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub target: VarId,
    pub levels: Vec<SpreadLevel>,
    pub violations: Vec<SpreadViolation>,
    pub skipped_contexts: usize,
    /// Smallest `rhs - lhs` over every checked inequality; `+inf` if none.
    pub worst_margin: f64,
    pub passed: bool,
}

/// Conditionals of `target` for every outcome of `context`, `None` where
/// the context has zero mass.
struct Level {
    context: Vec<VarId>,
    rows: Vec<Option<Vec<f64>>>,
}

impl Level {
    fn build(joint: &JointTable, target: VarId, context: &[VarId]) -> Result<Self> {
        let mut order = context.to_vec();
        order.push(target);
        let m = joint.marginalize(&order)?.reorder(&order)?;
        let radix = joint.alphabet().size();
        let rows = m
            .values()
            .chunks(radix)
            .map(|r| {
                let mass: f64 = r.iter().sum();
                (mass > 0.0).then(|| r.iter().map(|p| p / mass).collect())
            })
            .collect();
        Ok(Level {
            context: context.to_vec(),
            rows,
        })
    }

    fn live(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_deref().map(|r| (i, r)))
    }

    fn skipped(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }

    /// Lowest and highest conditional with their (context, symbol).
    fn extremes(&self) -> ((f64, usize, usize), (f64, usize, usize)) {
        let mut lo = (f64::INFINITY, 0, 0);
        let mut hi = (f64::NEG_INFINITY, 0, 0);
        for (g, row) in self.live() {
            for (u, &p) in row.iter().enumerate() {
                if p < lo.0 {
                    lo = (p, g, u);
                }
                if p > hi.0 {
                    hi = (p, g, u);
                }
            }
        }
        (lo, hi)
    }

    fn summary(&self) -> SpreadLevel {
        let ((min, ..), (max, ..)) = self.extremes();
        SpreadLevel {
            context: self.context.clone(),
            min,
            max,
            positive_contexts: self.live().count(),
        }
    }

    fn assignment(&self, target: VarId, radix: usize, ctx: usize, symbol: usize) -> Assignment {
        let mut out = Assignment::new();
        let mut rest = ctx;
        for &v in self.context.iter().rev() {
            out.insert(v, rest % radix);
            rest /= radix;
        }
        out.insert(target, symbol);
        out
    }
}

struct Tally {
    violations: Vec<SpreadViolation>,
    worst: f64,
}

impl Tally {
    /// Records `lhs <= rhs`.
    fn check(&mut self, lhs: f64, rhs: f64, violation: impl FnOnce() -> SpreadViolation) {
        let margin = rhs - lhs;
        self.worst = self.worst.min(margin);
        if margin < -SLACK {
            self.violations.push(violation());
        }
    }
}

fn compare(joint: &JointTable, target: VarId, k: usize, coarse: &Level, fine: &Level, tally: &mut Tally) -> Result<()> {
    let radix = joint.alphabet().size();
    let ((cmin, ..), (cmax, ..)) = coarse.extremes();
    let ((fmin, fg, fu), (fmax, hg, hu)) = fine.extremes();
    if coarse.live().next().is_none() {
        return Ok(());
    }
    tally.check(fmin, cmin, || SpreadViolation {
        kind: ViolationKind::Min,
        orders: (k, k + 1),
        outcome: fine.assignment(target, radix, fg, fu),
        coarse: cmin,
        fine: fmin,
    });
    tally.check(cmax, fmax, || SpreadViolation {
        kind: ViolationKind::Max,
        orders: (k, k + 1),
        outcome: fine.assignment(target, radix, hg, hu),
        coarse: cmax,
        fine: fmax,
    });

    // Envelope of the refinements of each coarse context.
    let proj = Projection::new(&fine.context, joint.alphabet(), &coarse.context)?;
    let mut lo = vec![vec![f64::INFINITY; radix]; coarse.rows.len()];
    let mut hi = vec![vec![f64::NEG_INFINITY; radix]; coarse.rows.len()];
    for (row, g) in fine.rows.iter().zip(proj.iter()) {
        if let Some(row) = row {
            for (u, &p) in row.iter().enumerate() {
                lo[g][u] = lo[g][u].min(p);
                hi[g][u] = hi[g][u].max(p);
            }
        }
    }
    for (g, row) in coarse.live() {
        for (u, &p) in row.iter().enumerate() {
            tally.check(lo[g][u], p, || SpreadViolation {
                kind: ViolationKind::BelowRefinements,
                orders: (k, k + 1),
                outcome: coarse.assignment(target, radix, g, u),
                coarse: p,
                fine: lo[g][u],
            });
            tally.check(p, hi[g][u], || SpreadViolation {
                kind: ViolationKind::AboveRefinements,
                orders: (k, k + 1),
                outcome: coarse.assignment(target, radix, g, u),
                coarse: p,
                fine: hi[g][u],
            });
        }
    }
    Ok(())
}

/// Checks the spread chain for `target` over strictly growing contexts.
pub fn verify_nested_spread(joint: &JointTable, target: VarId, nesting: &[Vec<VarId>]) -> Result<SpreadReport> {
    if joint.position(target).is_none() {
        return Err(Error::UnknownVariable(target));
    }
    for (k, set) in nesting.iter().enumerate() {
        for (i, v) in set.iter().enumerate() {
            if joint.position(*v).is_none() {
                return Err(Error::UnknownVariable(*v));
            }
            if *v == target {
                return argument(format!("context {k} contains the target {target}"));
            }
            if set[..i].contains(v) {
                return argument(format!("context {k} repeats variable {v}"));
            }
        }
        if k > 0 {
            let prev = &nesting[k - 1];
            if set.len() <= prev.len() || prev.iter().any(|v| !set.contains(v)) {
                return argument(format!("context {k} does not strictly contain context {}", k - 1));
            }
        }
    }
    let levels = nesting
        .iter()
        .map(|ctx| Level::build(joint, target, ctx))
        .collect::<Result<Vec<_>>>()?;
    let mut tally = Tally {
        violations: Vec::new(),
        worst: f64::INFINITY,
    };
    for (k, pair) in levels.windows(2).enumerate() {
        compare(joint, target, k, &pair[0], &pair[1], &mut tally)?;
    }
    let skipped_contexts = levels.iter().map(Level::skipped).sum();
    if skipped_contexts > 0 {
        debug!("skipped {skipped_contexts} zero-mass contexts");
    }
    Ok(SpreadReport {
        target,
        levels: levels.iter().map(Level::summary).collect(),
        passed: tally.violations.is_empty(),
        violations: tally.violations,
        skipped_contexts,
        worst_margin: tally.worst,
    })
}

/// The three-variable case on the last three variables `(x1, x2, x3)` of
/// `joint`: target `x3`, contexts `{x2} ⊂ {x2, x1}`.
pub fn verify_pairwise_spread(joint: &JointTable) -> Result<SpreadReport> {
    let vars = joint.vars();
    let n = vars.len();
    if n < 3 {
        return argument(format!("pairwise spread needs at least 3 variables, got {n}"));
    }
    let (x1, x2, x3) = (vars[n - 3], vars[n - 2], vars[n - 1]);
    verify_nested_spread(joint, x3, &[vec![x2], vec![x2, x1]])
}

/// Growing contexts for `target`: empty, then nearest predecessors, then
/// nearest successors, one variable at a time.
pub fn context_chain(joint: &JointTable, target: VarId) -> Result<Vec<Vec<VarId>>> {
    let pos = joint.position(target).ok_or(Error::UnknownVariable(target))?;
    let vars = joint.vars();
    let order = vars[..pos].iter().rev().chain(&vars[pos + 1..]);
    let mut out = vec![Vec::new()];
    for &v in order {
        let mut next = out.last().cloned().unwrap_or_default();
        next.push(v);
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyViolation {
    pub orders: (usize, usize),
    pub coarse: f64,
    pub fine: f64,
}

/// Conditional entropies of one target over [`context_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyChainReport {
    pub target: VarId,
    pub contexts: Vec<Vec<VarId>>,
    pub entropies: Vec<f64>,
    pub violations: Vec<EntropyViolation>,
    pub worst_margin: f64,
    pub passed: bool,
}

pub fn verify_entropy_chain(joint: &JointTable, target: VarId) -> Result<EntropyChainReport> {
    let contexts = context_chain(joint, target)?;
    let entropies = contexts
        .iter()
        .map(|g| joint.conditional_entropy(target, g))
        .collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for (k, w) in entropies.windows(2).enumerate() {
        let margin = w[0] - w[1];
        worst_margin = worst_margin.min(margin);
        if margin < -SLACK {
            violations.push(EntropyViolation {
                orders: (k, k + 1),
                coarse: w[0],
                fine: w[1],
            });
        }
    }
    Ok(EntropyChainReport {
        target,
        contexts,
        entropies,
        passed: violations.is_empty(),
        violations,
        worst_margin,
    })
}

/// Extremes of an order-`n` chain fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOrderBounds {
    pub order: usize,
    /// Smallest and largest cell of the chain joint.
    pub joint_min: f64,
    pub joint_max: f64,
    /// Product over positions of the smallest (largest) reachable conditional.
    pub factor_min: f64,
    pub factor_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOrderViolation {
    pub orders: (usize, usize),
    pub kind: ViolationKind,
    pub lower_order: f64,
    pub higher_order: f64,
}

/// Bounds of chain fits of every order `0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpreadReport {
    pub orders: Vec<ChainOrderBounds>,
    /// Failures of `min joint(n+1) <= min joint(n)` and
    /// `max joint(n) <= max joint(n+1)`.
    pub joint_violations: Vec<ChainOrderViolation>,
    /// Failures of the same ordering for the per-factor bound products.
    pub factor_violations: Vec<ChainOrderViolation>,
}

impl ChainSpreadReport {
    pub fn joint_order_holds(&self) -> bool {
        self.joint_violations.is_empty()
    }

    pub fn factor_bounds_hold(&self) -> bool {
        self.factor_violations.is_empty()
    }
}

fn ordered(pairs: impl Iterator<Item = (usize, f64, f64, f64, f64)>) -> Vec<ChainOrderViolation> {
    let mut out = Vec::new();
    for (n, min0, min1, max0, max1) in pairs {
        if min1 > min0 + SLACK {
            out.push(ChainOrderViolation {
                orders: (n, n + 1),
                kind: ViolationKind::Min,
                lower_order: min0,
                higher_order: min1,
            });
        }
        if max0 > max1 + SLACK {
            out.push(ChainOrderViolation {
                orders: (n, n + 1),
                kind: ViolationKind::Max,
                lower_order: max0,
                higher_order: max1,
            });
        }
    }
    out
}

/// Fits chains of every order to `truth` and checks that their extremes
/// widen with the order.
///
/// Two readings are reported. The factor products widen by construction,
/// since each factor's context grows with the order. The joint cells
/// themselves need not: a product of marginals can have a smaller minimum
/// cell than the joint it approximates.
pub fn verify_chain_spread(truth: &JointTable) -> Result<ChainSpreadReport> {
    let mut orders = Vec::with_capacity(truth.vars().len());
    for n in 0..truth.vars().len() {
        let model = fit_chain(truth, n)?;
        let joint = model.joint();
        let (mut factor_min, mut factor_max) = (1.0, 1.0);
        for f in model.factors() {
            let (lo, hi) = f
                .reachable_rows()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
            factor_min *= lo;
            factor_max *= hi;
        }
        orders.push(ChainOrderBounds {
            order: n,
            joint_min: joint.min_value(),
            joint_max: joint.max_value(),
            factor_min,
            factor_max,
        });
    }
    let pairs = |f: fn(&ChainOrderBounds) -> (f64, f64)| {
        orders
            .windows(2)
            .map(move |w| {
                let (a_min, a_max) = f(&w[0]);
                let (b_min, b_max) = f(&w[1]);
                (w[0].order, a_min, b_min, a_max, b_max)
            })
            .collect::<Vec<_>>()
    };
    let joint_violations = ordered(pairs(|b| (b.joint_min, b.joint_max)).into_iter());
    let factor_violations = ordered(pairs(|b| (b.factor_min, b.factor_max)).into_iter());
    Ok(ChainSpreadReport {
        orders,
        joint_violations,
        factor_violations,
    })
}

/// Spread and entropy of the geometric family at each `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadEntropyPoint {
    pub mu: f64,
    pub spread: f64,
    pub entropy: f64,
}

/// Checks that on the geometric family the spread never rises while the
/// entropy never falls as `mu` grows. `mus` must be increasing.
pub fn spread_entropy_anticorrelated(mus: &[f64]) -> Result<(Vec<SpreadEntropyPoint>, bool)> {
    if mus.windows(2).any(|w| w[1] <= w[0]) {
        return argument("mu grid must be strictly increasing");
    }
    let points = mus
        .iter()
        .map(|&mu| {
            let g = GeometricModel::new(mu)?;
            Ok(SpreadEntropyPoint {
                mu,
                spread: g.spread(),
                entropy: g.entropy_closed(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ok = points
        .windows(2)
        .all(|w| w[1].spread <= w[0].spread && w[1].entropy >= w[0].entropy);
    Ok((points, ok))
}
