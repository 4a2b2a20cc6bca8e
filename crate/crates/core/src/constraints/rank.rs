//! Dense constraint matrices and an exact rank computation, used to audit
//! redundancy plans on small instances.

use super::{CellRef, ConstraintSystem};
use crate::table::Projection;

/// Every cell of every constraint, in order.
pub fn all_cells(system: &ConstraintSystem) -> Vec<CellRef> {
    system
        .constraints()
        .iter()
        .enumerate()
        .flat_map(|(c, m)| (0..m.len()).map(move |cell| CellRef { constraint: c, cell }))
        .collect()
}

/// One 0/1 row per cell over all outcomes of the full joint: entry `x` is 1
/// when outcome `x` restricted to the constraint's variables is that cell.
pub fn constraint_matrix(system: &ConstraintSystem, cells: &[CellRef]) -> Vec<Vec<f64>> {
    let projections: Vec<Projection> = system
        .constraints()
        .iter()
        .map(|c| Projection::new(system.full_vars(), system.alphabet(), c.vars()).expect("validated"))
        .collect();
    cells
        .iter()
        .map(|at| {
            projections[at.constraint]
                .iter()
                .map(|cell| if cell == at.cell { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

const PRIME: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    // 2^61 = 1 (mod p): fold the high bits onto the low ones.
    let x = a as u128 * b as u128;
    let folded = (x as u64 & PRIME) + (x >> 61) as u64;
    if folded >= PRIME {
        folded - PRIME
    } else {
        folded
    }
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

/// Rank of a matrix with integer entries, by Gaussian elimination modulo the
/// Mersenne prime `2^61 - 1`.
///
/// Entries are rounded to the nearest integer. Modular rank equals rational
/// rank unless the prime divides every maximal nonzero minor, which cannot
/// happen for the 0/1 matrices built here at audit sizes.
pub fn matrix_rank(rows: &[Vec<f64>]) -> usize {
    let to_mod = |x: f64| {
        let r = x.round() as i64;
        r.rem_euclid(PRIME as i64) as u64
    };
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|&x| to_mod(x)).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = pow_mod(m[rank][col], PRIME - 2);
        for r in rank + 1..m.len() {
            if m[r][col] == 0 {
                continue;
            }
            let factor = mul_mod(m[r][col], inv);
            let (top, rest) = m.split_at_mut(r);
            for (x, &p) in rest[0][col..cols].iter_mut().zip(&top[rank][col..cols]) {
                let v = *x + PRIME - mul_mod(factor, p);
                *x = if v >= PRIME { v - PRIME } else { v };
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_small_matrices() {
        assert_eq!(matrix_rank(&[]), 0);
        assert_eq!(matrix_rank(&[vec![0.0, 0.0]]), 0);
        assert_eq!(matrix_rank(&[vec![1.0, 2.0], vec![2.0, 4.0]]), 1);
        assert_eq!(matrix_rank(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 2.0]]), 2);
        assert_eq!(matrix_rank(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]), 2);
        assert_eq!(matrix_rank(&[vec![-1.0, 1.0], vec![1.0, 1.0]]), 2);
    }
}
