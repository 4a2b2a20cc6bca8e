//! Elimination of linearly dependent constraint cells.
//!
//! Overlapping constraints share their lower-order marginals, and every
//! constraint table sums to one, so the full set of cell equations is
//! rank-deficient. The plan keeps, for each constraint `c` and each nonempty
//! subset `S` of its variables not already claimed by another constraint,
//! the cells where the variables of `S` sit at a non-last symbol and every
//! other variable of `c` sits at the last symbol. Everything else is fixed
//! by "last row = marginal minus the other rows", applied recursively, plus
//! normalization.
//!
//! Together with the all-ones normalization row, the kept cells are a basis
//! of the row space of the full constraint matrix, so
//! `kept.len() + 1 == rank` whenever the system has a constraint.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_consistency, ConstraintSystem};
use crate::error::{Error, Result};
use crate::table::{increment, VarId};

/// One cell of one constraint table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellRef {
    pub constraint: usize,
    pub cell: usize,
}

/// Why a cell is not an independent equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    /// The cell with every variable at the last symbol: one minus the rest
    /// of its table.
    Normalization,
    /// The cell carries the marginal over `subset`, already fixed by `owner`.
    SharedMarginal { owner: usize, subset: Vec<VarId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCell {
    pub cell: CellRef,
    pub reason: DropReason,
}

/// Which constraint keeps a lower-order marginal shared by several.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Elimination {
    /// The first constraint containing the subset keeps it; later copies
    /// have their last row fixed.
    #[default]
    Row,
    /// The last constraint containing the subset keeps it; earlier copies
    /// have their last column fixed.
    Column,
}

/// Independent subset of constraint cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionPlan {
    pub kept: Vec<CellRef>,
    pub dropped: Vec<DroppedCell>,
    pub elimination: Elimination,
}

impl ReductionPlan {
    /// `kept.len()` plus the normalization row.
    pub fn rank(&self) -> usize {
        if self.kept.is_empty() && self.dropped.is_empty() {
            0
        } else {
            self.kept.len() + 1
        }
    }

    /// Kept cell indices grouped per constraint.
    pub fn kept_by_constraint(&self, constraints: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); constraints];
        for c in &self.kept {
            out[c.constraint].push(c.cell);
        }
        out
    }
}

/// Row-based reduction of a consistent system.
pub fn reduce_redundancy(system: &ConstraintSystem) -> Result<ReductionPlan> {
    reduce_redundancy_with(system, Elimination::Row)
}

pub fn reduce_redundancy_with(
    system: &ConstraintSystem,
    elimination: Elimination,
) -> Result<ReductionPlan> {
    let report = check_consistency(system);
    if !report.is_consistent() {
        return Err(Error::Consistency(Box::new(report)));
    }
    Ok(plan_unchecked(system, elimination))
}

pub(crate) fn plan_unchecked(system: &ConstraintSystem, elimination: Elimination) -> ReductionPlan {
    let radix = system.alphabet().size();
    let last = radix - 1;
    let order: Vec<usize> = match elimination {
        Elimination::Row => (0..system.constraints().len()).collect(),
        Elimination::Column => (0..system.constraints().len()).rev().collect(),
    };
    let mut owner: BTreeMap<Vec<VarId>, usize> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in order {
        let vars = system.constraints()[c].vars();
        let mut digits = vec![0usize; vars.len()];
        for cell in 0..system.constraints()[c].len() {
            let subset: Vec<VarId> = vars
                .iter()
                .zip(&digits)
                .filter(|(_, &d)| d != last)
                .map(|(&v, _)| v)
                .collect();
            let at = CellRef { constraint: c, cell };
            if subset.is_empty() {
                dropped.push(DroppedCell {
                    cell: at,
                    reason: DropReason::Normalization,
                });
            } else {
                match owner.get(&subset) {
                    Some(&o) if o != c => dropped.push(DroppedCell {
                        cell: at,
                        reason: DropReason::SharedMarginal { owner: o, subset },
                    }),
                    Some(_) => kept.push(at),
                    None => {
                        owner.insert(subset, c);
                        kept.push(at);
                    }
                }
            }
            increment(&mut digits, radix);
        }
    }
    kept.sort_unstable();
    dropped.sort_unstable_by_key(|d| d.cell);
    ReductionPlan {
        kept,
        dropped,
        elimination,
    }
}
