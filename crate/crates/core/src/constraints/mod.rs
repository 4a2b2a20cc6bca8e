//! Marginal constraint systems for the three reconstruction methods.
//!
//! Every method fixes a set of lower-order joint marginals of one larger
//! joint and asks for the maximum-entropy joint reproducing them:
//!
//! | method | variables | constraints | each over |
//! |--------|-----------|-------------|-----------|
//! | [`Method::MepT`] | `1..=2T+1` | 3 | `T+1` vars |
//! | [`Method::Gmep`] | `1..=T` | `T(T-1)/2` | 2 vars |
//! | [`Method::Smep`] | `-T..=T` | `2T+2` | `T+1` vars |
//!
//! Constraint targets are always stored with their variables in the
//! system's `full_vars` order.

mod rank;
mod reduce;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{argument, shape, Error, Result};
use crate::table::{Alphabet, JointTable, Projection, VarId};

pub use rank::{all_cells, constraint_matrix, matrix_rank};
#[cfg(test)]
pub(crate) use reduce::plan_unchecked;
pub use reduce::{reduce_redundancy, reduce_redundancy_with, CellRef, DropReason, DroppedCell, Elimination, ReductionPlan};

/// Tolerance for agreement between overlapping constraint marginals.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// A fixed joint marginal over a subset of the problem variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginalConstraint {
    target: JointTable,
}

impl MarginalConstraint {
    pub fn new(target: JointTable) -> Self {
        MarginalConstraint { target }
    }

    /// Turns a conditional table into a joint marginal by multiplying with
    /// the marginal of its context.
    ///
    /// `conditional` is over `context ∪ {target}` with each context row
    /// summing to one; `context_marginal` is over exactly the other variables.
    pub fn from_conditional(
        conditional: &JointTable,
        target: VarId,
        context_marginal: &JointTable,
    ) -> Result<Self> {
        if conditional.position(target).is_none() {
            return Err(Error::UnknownVariable(target));
        }
        let ctx: Vec<VarId> = conditional.vars().iter().copied().filter(|&v| v != target).collect();
        let mut want = ctx.clone();
        want.sort_unstable();
        let mut have = context_marginal.vars().to_vec();
        have.sort_unstable();
        if want != have || conditional.alphabet() != context_marginal.alphabet() {
            return shape("context marginal must cover exactly the conditioning variables");
        }
        let ctx_marg = context_marginal.reorder(&ctx)?;
        let proj = Projection::new(conditional.vars(), conditional.alphabet(), &ctx)?;
        let values: Vec<f64> = conditional
            .values()
            .iter()
            .zip(proj.iter())
            .map(|(p, c)| p * ctx_marg.values()[c])
            .collect();
        Ok(MarginalConstraint {
            target: JointTable::new(conditional.vars().to_vec(), conditional.alphabet(), values)?,
        })
    }

    pub fn vars(&self) -> &[VarId] {
        self.target.vars()
    }

    pub fn target(&self) -> &JointTable {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

impl From<JointTable> for MarginalConstraint {
    fn from(t: JointTable) -> Self {
        MarginalConstraint::new(t)
    }
}

/// Which construction produced a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MEP_T", alias = "mep_t")]
    MepT,
    #[serde(rename = "GMEP", alias = "gmep")]
    Gmep,
    #[serde(rename = "SMEP", alias = "smep")]
    Smep,
    #[serde(rename = "CUSTOM", alias = "custom")]
    Custom,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MepT => "mep_t",
            Method::Gmep => "gmep",
            Method::Smep => "smep",
            Method::Custom => "custom",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mep_t" | "mept" => Ok(Method::MepT),
            "gmep" => Ok(Method::Gmep),
            "smep" => Ok(Method::Smep),
            "custom" => Ok(Method::Custom),
            other => argument(format!("unknown method {other:?}")),
        }
    }
}

impl Method {
    /// Closed-form constraint count for context length `t`.
    pub fn constraint_count(self, t: usize) -> Option<usize> {
        match self {
            Method::MepT => Some(3),
            Method::Gmep => Some(t * t.saturating_sub(1) / 2),
            Method::Smep => Some(2 * t + 2),
            Method::Custom => None,
        }
    }

    /// Closed-form number of multiplier cells before redundancy reduction.
    pub fn dual_dimension(self, t: usize, alphabet: usize) -> Option<usize> {
        let pow = |k: usize| alphabet.checked_pow(k as u32);
        match self {
            Method::MepT => pow(t + 1).map(|c| 3 * c),
            Method::Gmep => pow(2).map(|c| t * t.saturating_sub(1) / 2 * c),
            Method::Smep => pow(t + 1).map(|c| (2 * t + 2) * c),
            Method::Custom => None,
        }
    }

    /// Variables of the joint being reconstructed.
    pub fn full_vars(self, t: usize) -> Option<Vec<VarId>> {
        let t = t as VarId;
        match self {
            Method::MepT => Some((1..=2 * t + 1).collect()),
            Method::Gmep => Some((1..=t).collect()),
            Method::Smep => Some((-t..=t).collect()),
            Method::Custom => None,
        }
    }

    /// Variable sets of every constraint, in canonical order.
    pub fn constraint_vars(self, t: usize) -> Option<Vec<Vec<VarId>>> {
        match self {
            Method::MepT => Some(mep_t_vars(t).to_vec()),
            Method::Gmep => Some(gmep_pairs(t).into_iter().map(|(a, b)| vec![a, b]).collect()),
            Method::Smep => Some(smep_vars(t)),
            Method::Custom => None,
        }
    }
}

/// `[p(2, g2), p(1, g1), p(1, g2)]` with `g1 = 2..=T+1`, `g2 = T+2..=2T+1`.
pub fn mep_t_vars(t: usize) -> [Vec<VarId>; 3] {
    let t = t as VarId;
    let g1: Vec<VarId> = (2..=t + 1).collect();
    let g2: Vec<VarId> = (t + 2..=2 * t + 1).collect();
    let with = |head: VarId, g: &[VarId]| {
        let mut v = vec![head];
        v.extend_from_slice(g);
        v
    };
    [with(2, &g2), with(1, &g1), with(1, &g2)]
}

/// Every pair `(t, t')` with `1 <= t < t' <= T`, lexicographically.
pub fn gmep_pairs(t: usize) -> Vec<(VarId, VarId)> {
    let t = t as VarId;
    (1..=t)
        .flat_map(|a| (a + 1..=t).map(move |b| (a, b)))
        .collect()
}

/// `p(-g, 1..T)` for `g = T..1`, `p(0, 1..T)`, `p(0, -1..-T)`, `p(+g, -1..-T)`
/// for `g = 1..T`; each listed in ascending label order.
pub fn smep_vars(t: usize) -> Vec<Vec<VarId>> {
    let t = t as VarId;
    let pos: Vec<VarId> = (1..=t).collect();
    let neg: Vec<VarId> = (-t..=-1).collect();
    let mut out = Vec::with_capacity(2 * t as usize + 2);
    for g in (0..=t).rev() {
        let mut v = vec![-g];
        v.extend_from_slice(&pos);
        out.push(v);
    }
    for g in 0..=t {
        let mut v = neg.clone();
        v.push(g);
        out.push(v);
    }
    out
}

/// All constraints of one maximum-entropy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemFile", into = "SystemFile")]
pub struct ConstraintSystem {
    full_vars: Vec<VarId>,
    alphabet: Alphabet,
    constraints: Vec<MarginalConstraint>,
    method: Method,
}

/// On-disk layout of a [`ConstraintSystem`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub full_vars: Vec<VarId>,
    pub alphabet_size: usize,
    pub method: Method,
    pub constraints: Vec<ConstraintFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintFile {
    pub vars: Vec<VarId>,
    pub values: Vec<f64>,
}

impl TryFrom<SystemFile> for ConstraintSystem {
    type Error = Error;

    fn try_from(f: SystemFile) -> Result<Self> {
        let alphabet = Alphabet::new(f.alphabet_size)?;
        let constraints = f
            .constraints
            .into_iter()
            .map(|c| JointTable::new(c.vars, alphabet, c.values).map(MarginalConstraint::new))
            .collect::<Result<Vec<_>>>()?;
        let sys = ConstraintSystem::custom(f.full_vars, alphabet, constraints)?;
        Ok(ConstraintSystem {
            method: f.method,
            ..sys
        })
    }
}

impl From<ConstraintSystem> for SystemFile {
    fn from(s: ConstraintSystem) -> Self {
        SystemFile {
            full_vars: s.full_vars,
            alphabet_size: s.alphabet.size(),
            method: s.method,
            constraints: s
                .constraints
                .into_iter()
                .map(|c| {
                    let t = crate::table::TableFile::from(c.target);
                    ConstraintFile {
                        vars: t.vars,
                        values: t.values,
                    }
                })
                .collect(),
        }
    }
}

fn sorted(vars: &[VarId]) -> Vec<VarId> {
    let mut v = vars.to_vec();
    v.sort_unstable();
    v
}

impl ConstraintSystem {
    /// A system over arbitrary constraints. Each target is reordered into
    /// `full_vars` order.
    pub fn custom(
        full_vars: Vec<VarId>,
        alphabet: Alphabet,
        constraints: Vec<MarginalConstraint>,
    ) -> Result<Self> {
        crate::table::check_vars(&full_vars)?;
        let mut canonical = Vec::with_capacity(constraints.len());
        for (i, c) in constraints.into_iter().enumerate() {
            if c.target.alphabet() != alphabet {
                return shape(format!("constraint {i} uses a different alphabet"));
            }
            if let Some(v) = c.vars().iter().find(|v| !full_vars.contains(v)) {
                return shape(format!("constraint {i} mentions variable {v} outside the system"));
            }
            let order: Vec<VarId> = full_vars
                .iter()
                .copied()
                .filter(|v| c.vars().contains(v))
                .collect();
            canonical.push(MarginalConstraint::new(c.target.reorder(&order)?));
        }
        Ok(ConstraintSystem {
            full_vars,
            alphabet,
            constraints: canonical,
            method: Method::Custom,
        })
    }

    pub fn full_vars(&self) -> &[VarId] {
        &self.full_vars
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn constraints(&self) -> &[MarginalConstraint] {
        &self.constraints
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Number of outcomes of the full joint.
    pub fn joint_len(&self) -> Option<usize> {
        self.alphabet.outcomes(self.full_vars.len())
    }

    /// Total constraint cells before redundancy reduction.
    pub fn cell_count(&self) -> usize {
        self.constraints.iter().map(MarginalConstraint::len).sum()
    }

    /// Builds the method's system from marginals of a known joint over
    /// exactly the method's variables.
    pub fn from_truth(method: Method, t: usize, truth: &JointTable) -> Result<Self> {
        let sets = method
            .constraint_vars(t)
            .ok_or_else(|| Error::Argument("custom systems have no canonical variable sets".into()))?;
        let full = method.full_vars(t).expect("named method");
        if sorted(truth.vars()) != full {
            return shape(format!("truth must be over variables {full:?}"));
        }
        let truth = truth.reorder(&full)?;
        let marginals = sets
            .iter()
            .map(|s| truth.marginalize(s).map(MarginalConstraint::new))
            .collect::<Result<Vec<_>>>()?;
        match method {
            Method::MepT => {
                let [a, b, c]: [MarginalConstraint; 3] =
                    marginals.try_into().expect("three MEP[T] constraints");
                // Canonical storage order is (2,g2), (1,g1), (1,g2).
                build_mep_t(t, b, c, a)
            }
            Method::Gmep => build_gmep(t, marginals),
            Method::Smep => build_smep(t, marginals),
            Method::Custom => unreachable!(),
        }
    }

    /// Marginals of `joint` on every constraint's variables.
    pub fn marginals_of(&self, joint: &JointTable) -> Result<Vec<JointTable>> {
        if joint.vars() != self.full_vars.as_slice() || joint.alphabet() != self.alphabet {
            return shape("joint must be over the system's variables in system order");
        }
        self.constraints.iter().map(|c| joint.marginalize(c.vars())).collect()
    }
}

fn check_alphabets(constraints: &[&MarginalConstraint]) -> Result<Alphabet> {
    let alphabet = constraints[0].target.alphabet();
    if constraints.iter().any(|c| c.target.alphabet() != alphabet) {
        return shape("constraints use different alphabets");
    }
    Ok(alphabet)
}

/// MEP[T]: reconstructs `f(1, g1, g2)` over `2T+1` variables from
/// `p(1, g1)`, `p(1, g2)` and `p(2, g2)`.
pub fn build_mep_t(
    t: usize,
    p_1g1: MarginalConstraint,
    p_1g2: MarginalConstraint,
    p_2g2: MarginalConstraint,
) -> Result<ConstraintSystem> {
    if t == 0 {
        return argument("MEP[T] needs T >= 1");
    }
    let [want_2g2, want_1g1, want_1g2] = mep_t_vars(t);
    for (name, c, want) in [
        ("p(1, g1)", &p_1g1, &want_1g1),
        ("p(1, g2)", &p_1g2, &want_1g2),
        ("p(2, g2)", &p_2g2, &want_2g2),
    ] {
        if sorted(c.vars()) != sorted(want) {
            return shape(format!("{name} must be over {want:?}, got {:?}", c.vars()));
        }
    }
    let alphabet = check_alphabets(&[&p_1g1, &p_1g2, &p_2g2])?;
    let full = Method::MepT.full_vars(t).expect("named method");
    let sys = ConstraintSystem::custom(full, alphabet, vec![p_2g2, p_1g1, p_1g2])?;
    Ok(ConstraintSystem {
        method: Method::MepT,
        ..sys
    })
}

/// GMEP: reconstructs `f(1..T)` from every pair marginal `p(t, t')`.
pub fn build_gmep(t: usize, pairs: Vec<MarginalConstraint>) -> Result<ConstraintSystem> {
    if t == 0 {
        return argument("GMEP needs T >= 1");
    }
    let wanted = gmep_pairs(t);
    let mut slots: Vec<Option<MarginalConstraint>> = vec![None; wanted.len()];
    for c in pairs {
        let vars = sorted(c.vars());
        let idx = match vars.as_slice() {
            &[a, b] => wanted.iter().position(|&p| p == (a, b)),
            _ => None,
        };
        let Some(idx) = idx else {
            return Err(Error::PairCoverage(format!(
                "{:?} is not a pair within 1..={t}",
                c.vars()
            )));
        };
        if slots[idx].is_some() {
            return Err(Error::PairCoverage(format!("pair {vars:?} given twice")));
        }
        slots[idx] = Some(c);
    }
    if let Some(i) = slots.iter().position(Option::is_none) {
        return Err(Error::PairCoverage(format!("pair {:?} missing", wanted[i])));
    }
    let constraints: Vec<MarginalConstraint> = slots.into_iter().flatten().collect();
    let alphabet = match constraints.first() {
        Some(_) => check_alphabets(&constraints.iter().collect::<Vec<_>>())?,
        None => return argument("GMEP with T = 1 has no constraints; pass an alphabet via a custom system"),
    };
    let sys = ConstraintSystem::custom(Method::Gmep.full_vars(t).expect("named"), alphabet, constraints)?;
    Ok(ConstraintSystem {
        method: Method::Gmep,
        ..sys
    })
}

/// SMEP: reconstructs `f(-T..=T)` from the `2T+2` marginals of `T+1`
/// variables each (see [`smep_vars`]). Input order is free.
pub fn build_smep(t: usize, marginals: Vec<MarginalConstraint>) -> Result<ConstraintSystem> {
    if t == 0 {
        return argument("SMEP needs T >= 1");
    }
    let wanted = smep_vars(t);
    if marginals.len() != wanted.len() {
        return shape(format!(
            "SMEP with T = {t} needs {} constraints, got {}",
            wanted.len(),
            marginals.len()
        ));
    }
    let mut slots: Vec<Option<MarginalConstraint>> = vec![None; wanted.len()];
    for c in marginals {
        let vars = sorted(c.vars());
        // At T = 1 the set {-1, 1} appears in both halves.
        let free = (0..wanted.len()).find(|&i| wanted[i] == vars && slots[i].is_none());
        match free {
            Some(i) => slots[i] = Some(c),
            None if wanted.contains(&vars) => return shape(format!("SMEP constraint {vars:?} given too often")),
            None => return shape(format!("{vars:?} is not an SMEP constraint set for T = {t}")),
        }
    }
    let constraints: Vec<MarginalConstraint> = slots.into_iter().flatten().collect();
    let alphabet = check_alphabets(&constraints.iter().collect::<Vec<_>>())?;
    let sys = ConstraintSystem::custom(Method::Smep.full_vars(t).expect("named"), alphabet, constraints)?;
    Ok(ConstraintSystem {
        method: Method::Smep,
        ..sys
    })
}

/// A constraint whose cells do not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationIssue {
    pub constraint: usize,
    pub total: f64,
}

/// Two constraints whose shared sub-marginal disagrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMismatch {
    pub first: usize,
    pub second: usize,
    pub shared: Vec<VarId>,
    pub max_diff: f64,
}

/// Outcome of [`check_consistency`]; empty means consistent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub unnormalized: Vec<NormalizationIssue>,
    pub mismatches: Vec<OverlapMismatch>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.unnormalized.is_empty() && self.mismatches.is_empty()
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_consistent() {
            return f.write_str("consistent");
        }
        let mut parts = Vec::new();
        for n in &self.unnormalized {
            parts.push(format!("constraint {} sums to {}", n.constraint, n.total));
        }
        for m in &self.mismatches {
            parts.push(format!(
                "constraints {} and {} disagree on {:?} by {:.3e}",
                m.first, m.second, m.shared, m.max_diff
            ));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Compares every overlapping pair of constraints on their shared variables
/// and checks each constraint's normalization, at [`CONSISTENCY_TOLERANCE`].
pub fn check_consistency(system: &ConstraintSystem) -> ConsistencyReport {
    let mut report = ConsistencyReport::default();
    let cs = system.constraints();
    for (i, c) in cs.iter().enumerate() {
        let total = c.target.total();
        if (total - 1.0).abs() > CONSISTENCY_TOLERANCE {
            report.unnormalized.push(NormalizationIssue { constraint: i, total });
        }
    }
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            let a: BTreeSet<VarId> = cs[i].vars().iter().copied().collect();
            let shared: Vec<VarId> = cs[j].vars().iter().copied().filter(|v| a.contains(v)).collect();
            if shared.is_empty() {
                continue;
            }
            let mi = cs[i].target.marginalize(&shared).expect("shared vars present");
            let mj = cs[j].target.marginalize(&shared).expect("shared vars present");
            // Both follow full_vars order, so layouts match.
            let diff = mi.max_abs_diff(&mj).expect("same layout");
            if diff > CONSISTENCY_TOLERANCE {
                report.mismatches.push(OverlapMismatch {
                    first: i,
                    second: j,
                    shared: mi.vars().to_vec(),
                    max_diff: diff,
                });
            }
        }
    }
    report
}
