//! Dense probability tables over discrete variables sharing one alphabet.
//!
//! A [`JointTable`] stores the probability of every outcome of an ordered
//! list of variables in row-major order: the last variable varies fastest.
//! Variable labels are arbitrary distinct integers (negative labels are
//! used by the symmetric method, which indexes tokens `-T..=T`).
//!
//! All entropies are in nats, with `0 ln 0 = 0`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{argument, shape, Error, Result};

/// Label of one random variable.
pub type VarId = i32;

/// Partial assignment of symbol indices to variables.
pub type Assignment = BTreeMap<VarId, usize>;

/// Tolerance on the total mass of a normalized table.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Number of symbol values each variable can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return argument("alphabet size must be at least 1");
        }
        Ok(Alphabet(size))
    }

    pub fn size(self) -> usize {
        self.0
    }

    /// Number of outcomes of `n` variables over this alphabet, or `None` on overflow.
    pub fn outcomes(self, n: usize) -> Option<usize> {
        let n = u32::try_from(n).ok()?;
        self.0.checked_pow(n)
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;

    fn try_from(size: usize) -> Result<Self> {
        Alphabet::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.0
    }
}

/// Maps outcome indices of a source variable list onto cell indices of a
/// sub-list, visiting source outcomes in row-major order.
#[derive(Debug, Clone)]
pub(crate) struct Projection {
    radix: usize,
    /// Stride in the target table for each source position (0 if dropped).
    strides: Vec<usize>,
    src_len: usize,
    dst_len: usize,
}

impl Projection {
    pub(crate) fn new(source: &[VarId], alphabet: Alphabet, target: &[VarId]) -> Result<Self> {
        let radix = alphabet.size();
        let mut strides = vec![0usize; source.len()];
        let mut stride = 1usize;
        for &v in target.iter().rev() {
            let pos = source
                .iter()
                .position(|&s| s == v)
                .ok_or(Error::UnknownVariable(v))?;
            strides[pos] = stride;
            stride *= radix;
        }
        let src_len = radix.pow(source.len() as u32);
        Ok(Projection {
            radix,
            strides,
            src_len,
            dst_len: stride,
        })
    }

    /// Target cell index of every source outcome, in source order.
    pub(crate) fn iter(&self) -> ProjectionIter<'_> {
        ProjectionIter {
            proj: self,
            digits: vec![0; self.strides.len()],
            cell: 0,
            remaining: self.src_len,
        }
    }

    /// Sums `src` into target cells.
    pub(crate) fn reduce(&self, src: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dst_len];
        for (x, cell) in src.iter().zip(self.iter()) {
            out[cell] += x;
        }
        out
    }
}

pub(crate) struct ProjectionIter<'a> {
    proj: &'a Projection,
    digits: Vec<usize>,
    cell: usize,
    remaining: usize,
}

impl Iterator for ProjectionIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.cell;
        for pos in (0..self.digits.len()).rev() {
            self.digits[pos] += 1;
            self.cell += self.proj.strides[pos];
            if self.digits[pos] < self.proj.radix {
                break;
            }
            self.cell -= self.proj.radix * self.proj.strides[pos];
            self.digits[pos] = 0;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for ProjectionIter<'_> {}

/// Dense table of non-negative masses over every outcome of `vars`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableFile", into = "TableFile")]
pub struct JointTable {
    vars: Vec<VarId>,
    alphabet: Alphabet,
    values: Vec<f64>,
}

/// On-disk layout of a [`JointTable`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    pub vars: Vec<VarId>,
    pub alphabet_size: usize,
    pub values: Vec<f64>,
}

impl TryFrom<TableFile> for JointTable {
    type Error = Error;

    fn try_from(f: TableFile) -> Result<Self> {
        JointTable::new(f.vars, Alphabet::new(f.alphabet_size)?, f.values)
    }
}

impl From<JointTable> for TableFile {
    fn from(t: JointTable) -> Self {
        TableFile {
            vars: t.vars,
            alphabet_size: t.alphabet.size(),
            values: t.values,
        }
    }
}

pub(crate) fn check_vars(vars: &[VarId]) -> Result<()> {
    if vars.is_empty() {
        return argument("a table needs at least one variable");
    }
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].contains(v) {
            return argument(format!("variable {v} listed twice"));
        }
    }
    Ok(())
}

impl JointTable {
    /// Builds a table from row-major masses. Masses need not be normalized.
    pub fn new(vars: Vec<VarId>, alphabet: Alphabet, values: Vec<f64>) -> Result<Self> {
        check_vars(&vars)?;
        let expected = alphabet
            .outcomes(vars.len())
            .ok_or_else(|| Error::Argument("table size overflows".into()))?;
        if values.len() != expected {
            return shape(format!(
                "{} values for {} variables over alphabet {} (expected {expected})",
                values.len(),
                vars.len(),
                alphabet.size()
            ));
        }
        if let Some(bad) = values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return argument(format!("table entries must be finite and >= 0, got {bad}"));
        }
        Ok(JointTable {
            vars,
            alphabet,
            values,
        })
    }

    pub fn uniform(vars: Vec<VarId>, alphabet: Alphabet) -> Result<Self> {
        check_vars(&vars)?;
        let n = alphabet
            .outcomes(vars.len())
            .ok_or_else(|| Error::Argument("table size overflows".into()))?;
        Ok(JointTable {
            vars,
            alphabet,
            values: vec![1.0 / n as f64; n],
        })
    }

    /// Builds a table by evaluating `mass` at every outcome, in row-major order.
    pub fn from_fn(
        vars: Vec<VarId>,
        alphabet: Alphabet,
        mut mass: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        check_vars(&vars)?;
        let n = alphabet
            .outcomes(vars.len())
            .ok_or_else(|| Error::Argument("table size overflows".into()))?;
        let mut digits = vec![0usize; vars.len()];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(mass(&digits));
            increment(&mut digits, alphabet.size());
        }
        JointTable::new(vars, alphabet, values)
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    /// Row-major index of an outcome given as one symbol per variable.
    pub fn index_of(&self, outcome: &[usize]) -> Result<usize> {
        if outcome.len() != self.vars.len() {
            return shape(format!(
                "outcome has {} symbols, table has {} variables",
                outcome.len(),
                self.vars.len()
            ));
        }
        let radix = self.alphabet.size();
        outcome.iter().try_fold(0usize, |acc, &s| {
            if s >= radix {
                argument(format!("symbol {s} outside alphabet of size {radix}"))
            } else {
                Ok(acc * radix + s)
            }
        })
    }

    /// Symbols of the outcome stored at `index`.
    pub fn outcome(&self, mut index: usize) -> Vec<usize> {
        let radix = self.alphabet.size();
        let mut out = vec![0; self.vars.len()];
        for slot in out.iter_mut().rev() {
            *slot = index % radix;
            index /= radix;
        }
        out
    }

    pub fn get(&self, outcome: &[usize]) -> Result<f64> {
        Ok(self.values[self.index_of(outcome)?])
    }

    /// Rescales the table to unit mass.
    pub fn normalize(&self) -> Result<JointTable> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(JointTable {
            vars: self.vars.clone(),
            alphabet: self.alphabet,
            values: self.values.iter().map(|x| x / total).collect(),
        })
    }

    fn check_subset(&self, keep: &[VarId]) -> Result<()> {
        check_vars(keep)?;
        match keep.iter().find(|v| !self.vars.contains(v)) {
            Some(&v) => Err(Error::UnknownVariable(v)),
            None => Ok(()),
        }
    }

    /// Variables of `keep`, listed in this table's order.
    pub(crate) fn in_table_order(&self, keep: &[VarId]) -> Vec<VarId> {
        self.vars
            .iter()
            .copied()
            .filter(|v| keep.contains(v))
            .collect()
    }

    /// Sums out every variable not in `keep`. The result lists the kept
    /// variables in this table's order.
    pub fn marginalize(&self, keep: &[VarId]) -> Result<JointTable> {
        self.check_subset(keep)?;
        let kept = self.in_table_order(keep);
        let proj = Projection::new(&self.vars, self.alphabet, &kept)?;
        Ok(JointTable {
            vars: kept,
            alphabet: self.alphabet,
            values: proj.reduce(&self.values),
        })
    }

    /// Same distribution with variables permuted into `order`.
    pub fn reorder(&self, order: &[VarId]) -> Result<JointTable> {
        self.check_subset(order)?;
        if order.len() != self.vars.len() {
            return shape("reorder needs every variable exactly once");
        }
        // Iterate the new layout; project each new outcome to the old index.
        let proj = Projection::new(order, self.alphabet, &self.vars)?;
        Ok(JointTable {
            vars: order.to_vec(),
            alphabet: self.alphabet,
            values: proj.iter().map(|old| self.values[old]).collect(),
        })
    }

    /// Conditional distribution of `target` given a partial assignment.
    /// Variables absent from `given` are summed out.
    pub fn condition(&self, target: VarId, given: &Assignment) -> Result<ConditionalSlice> {
        if self.position(target).is_none() {
            return Err(Error::UnknownVariable(target));
        }
        if given.contains_key(&target) {
            return argument(format!("target {target} also appears in the conditioning set"));
        }
        let radix = self.alphabet.size();
        for (&v, &s) in given {
            if self.position(v).is_none() {
                return Err(Error::UnknownVariable(v));
            }
            if s >= radix {
                return argument(format!("symbol {s} outside alphabet of size {radix}"));
            }
        }
        let mut keep: Vec<VarId> = given.keys().copied().collect();
        keep.push(target);
        let marg = self.marginalize(&keep)?;
        let mut outcome: Vec<usize> = marg
            .vars
            .iter()
            .map(|v| given.get(v).copied().unwrap_or(0))
            .collect();
        let tpos = marg.position(target).expect("target kept");
        let mut probs = Vec::with_capacity(radix);
        for s in 0..radix {
            outcome[tpos] = s;
            probs.push(marg.get(&outcome)?);
        }
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return Err(Error::ConditioningOnNullEvent);
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        Ok(ConditionalSlice {
            target,
            given: given.clone(),
            probs,
        })
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.values)
    }

    /// `H(target | given)`, computed as `H(target, given) - H(given)`.
    pub fn conditional_entropy(&self, target: VarId, given: &[VarId]) -> Result<f64> {
        if given.contains(&target) {
            return argument(format!("target {target} also appears in the conditioning set"));
        }
        if given.is_empty() {
            return Ok(self.marginalize(&[target])?.entropy());
        }
        let mut all = given.to_vec();
        all.push(target);
        let joint = self.marginalize(&all)?.entropy();
        let context = self.marginalize(given)?.entropy();
        Ok(joint - context)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute cell difference against a table over the same layout.
    pub fn max_abs_diff(&self, other: &JointTable) -> Result<f64> {
        if self.vars != other.vars || self.alphabet != other.alphabet {
            return shape("tables have different layouts");
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn increment(digits: &mut [usize], radix: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return;
        }
        *d = 0;
    }
}

/// `-Σ p ln p` over a slice of masses.
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Converts an entropy in nats to another logarithm base.
pub fn nats_to_base(nats: f64, base: f64) -> f64 {
    nats / base.ln()
}

/// `max - min` of a non-empty slice of probabilities.
pub fn spread(probs: &[f64]) -> f64 {
    let (lo, hi) = probs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(p), hi.max(p))
        });
    if probs.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Distribution of one variable under a fixed assignment of others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSlice {
    pub target: VarId,
    pub given: Assignment,
    pub probs: Vec<f64>,
}

impl ConditionalSlice {
    pub fn new(target: VarId, given: Assignment, probs: Vec<f64>) -> Result<Self> {
        if given.contains_key(&target) {
            return argument(format!("target {target} also appears in the conditioning set"));
        }
        if probs.is_empty() {
            return argument("a conditional slice needs at least one symbol");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return argument("conditional probabilities must be finite and >= 0");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return argument(format!("conditional probabilities sum to {total}, not 1"));
        }
        Ok(ConditionalSlice {
            target,
            given,
            probs,
        })
    }

    /// Unconditioned distribution of one variable.
    pub fn marginal(target: VarId, probs: Vec<f64>) -> Result<Self> {
        ConditionalSlice::new(target, Assignment::new(), probs)
    }

    pub fn spread(&self) -> f64 {
        spread(&self.probs)
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: usize) -> Alphabet {
        Alphabet::new(n).unwrap()
    }

    /// p(1) p(2|1) p(3|2) with p(1) = (0.5, 0.5), rows (0.9, 0.1) / (0.2, 0.8).
    fn markov3() -> JointTable {
        let t = [[0.9, 0.1], [0.2, 0.8]];
        JointTable::from_fn(vec![1, 2, 3], a(2), |x| 0.5 * t[x[0]][x[1]] * t[x[1]][x[2]]).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn normalize_examples() {
        let t = JointTable::new(vec![1, 2], a(2), vec![1.0; 4]).unwrap();
        assert_eq!(t.normalize().unwrap().values(), &[0.25; 4]);
        let t = JointTable::new(vec![1], a(2), vec![2.0, 0.0]).unwrap();
        assert_eq!(t.normalize().unwrap().values(), &[1.0, 0.0]);
        let t = JointTable::new(vec![1], a(2), vec![0.3, 0.3]).unwrap();
        assert_eq!(t.normalize().unwrap().values(), &[0.5, 0.5]);
        let z = JointTable::new(vec![1], a(2), vec![0.0, 0.0]).unwrap();
        assert!(matches!(z.normalize(), Err(Error::ZeroMass)));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(Alphabet::new(0).is_err());
        assert!(JointTable::new(vec![1, 1], a(2), vec![0.25; 4]).is_err());
        assert!(JointTable::new(vec![], a(2), vec![1.0]).is_err());
        assert!(JointTable::new(vec![1], a(2), vec![1.0]).is_err());
        assert!(JointTable::new(vec![1], a(2), vec![1.5, -0.5]).is_err());
        assert!(JointTable::new(vec![1], a(2), vec![f64::NAN, 0.5]).is_err());
    }

    #[test]
    fn marginalize_examples() {
        let u = JointTable::uniform(vec![1, 2, 3], a(2)).unwrap();
        assert!(close(u.marginalize(&[1]).unwrap().values(), &[0.5, 0.5], 1e-15));

        let p = [0.9, 0.1];
        let prod = JointTable::from_fn(vec![1, 2], a(2), |x| p[x[0]] * p[x[1]]).unwrap();
        assert!(close(prod.marginalize(&[2]).unwrap().values(), &p, 1e-15));

        // Enumeration oracle: sum the 8 outcomes by hand.
        let mc = markov3();
        let mut expected = [0.0; 4];
        for x1 in 0..2 {
            for x2 in 0..2 {
                for x3 in 0..2 {
                    expected[x2 * 2 + x3] += mc.get(&[x1, x2, x3]).unwrap();
                }
            }
        }
        let m = mc.marginalize(&[3, 2]).unwrap();
        assert_eq!(m.vars(), &[2, 3]);
        assert!(close(m.values(), &expected, 1e-15));
        // Frozen: p(2,3) = (0.55*0.9, 0.55*0.1, 0.45*0.2, 0.45*0.8).
        assert!(close(m.values(), &[0.495, 0.055, 0.09, 0.36], 1e-12));

        assert!(matches!(mc.marginalize(&[4]), Err(Error::UnknownVariable(4))));
    }

    #[test]
    fn condition_examples() {
        let u = JointTable::uniform(vec![1, 2], a(2)).unwrap();
        let s = u.condition(2, &Assignment::from([(1, 0)])).unwrap();
        assert!(close(&s.probs, &[0.5, 0.5], 1e-15));

        let s = markov3().condition(3, &Assignment::from([(2, 0)])).unwrap();
        assert!(close(&s.probs, &[0.9, 0.1], 1e-12));

        let copy = JointTable::from_fn(vec![1, 2], a(2), |x| if x[0] == x[1] { 0.5 } else { 0.0 })
            .unwrap();
        let s = copy.condition(2, &Assignment::from([(1, 1)])).unwrap();
        assert_eq!(s.probs, vec![0.0, 1.0]);

        let point = JointTable::new(vec![1, 2], a(2), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            point.condition(2, &Assignment::from([(1, 1)])),
            Err(Error::ConditioningOnNullEvent)
        ));
        assert!(point.condition(2, &Assignment::from([(2, 0)])).is_err());
    }

    #[test]
    fn entropy_examples() {
        let u = JointTable::uniform(vec![1, 2, 3], a(2)).unwrap();
        assert!((u.entropy() - 3.0 * 2f64.ln()).abs() < 1e-12);
        let point = JointTable::new(vec![1], a(3), vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(point.entropy(), 0.0);
        let t = JointTable::new(vec![1], a(3), vec![0.5, 0.25, 0.25]).unwrap();
        let by_sum = -(0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((t.entropy() - 1.5 * 2f64.ln()).abs() < 1e-12);
        assert!((t.entropy() - by_sum).abs() < 1e-15);
        assert!((nats_to_base(t.entropy(), 2.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn conditional_entropy_examples() {
        let p = [0.7, 0.3];
        let ind = JointTable::from_fn(vec![1, 2], a(2), |x| p[x[0]] * p[x[1]]).unwrap();
        let h2 = ind.marginalize(&[2]).unwrap().entropy();
        assert!((ind.conditional_entropy(2, &[1]).unwrap() - h2).abs() < 1e-12);

        let copy = JointTable::from_fn(vec![1, 2], a(2), |x| if x[0] == x[1] { 0.5 } else { 0.0 })
            .unwrap();
        assert!(copy.conditional_entropy(2, &[1]).unwrap().abs() < 1e-12);

        // H(3|2) for the chain is Σ_j p(2=j) H(row j).
        let h_row = |r: [f64; 2]| entropy_of(&r);
        let expected = 0.55 * h_row([0.9, 0.1]) + 0.45 * h_row([0.2, 0.8]);
        assert!((markov3().conditional_entropy(3, &[2]).unwrap() - expected).abs() < 1e-12);

        assert!(markov3().conditional_entropy(3, &[3]).is_err());
    }

    #[test]
    fn spread_examples() {
        assert_eq!(spread(&[0.5, 0.5]), 0.0);
        assert_eq!(spread(&[1.0, 0.0]), 1.0);
        assert_eq!(spread(&[0.5, 0.25, 0.25]), 0.25);
    }

    #[test]
    fn reorder_roundtrip() {
        let mc = markov3();
        let r = mc.reorder(&[3, 1, 2]).unwrap();
        assert_eq!(r.get(&[1, 0, 1]).unwrap(), mc.get(&[0, 1, 1]).unwrap());
        assert_eq!(r.reorder(&[1, 2, 3]).unwrap(), mc);
    }

    #[test]
    fn outcome_index_inverse() {
        let t = JointTable::uniform(vec![-1, 0, 1], a(3)).unwrap();
        for i in 0..t.len() {
            assert_eq!(t.index_of(&t.outcome(i)).unwrap(), i);
        }
        assert!(t.index_of(&[0, 3, 0]).is_err());
    }
}
