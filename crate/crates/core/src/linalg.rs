//! Exact linear algebra for cofactor searches: find polynomial multipliers
//! of bounded degree by solving for their coefficients.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::poly::{Monomial, Polynomial, Rational};

/// All monomials in `n` variables of total degree at most `d`, ascending.
pub(crate) fn monomials_up_to(n: usize, d: u32) -> Vec<Monomial> {
    fn go(i: usize, n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if i == n {
            out.push(Monomial::from_exponents(cur));
            return;
        }
        for e in 0..=left {
            cur[i] = e;
            go(i + 1, n, left - e, cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    go(0, n, d, &mut vec![0; n], &mut out);
    out.sort();
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of monomials in `n` variables of degree at most `d`.
pub(crate) fn count_monomials(n: usize, d: u32) -> usize {
    binomial(n + d as usize, n)
}

/// Solves `A x = b`, `A` given as sparse columns; free unknowns are zero.
fn solve(columns: &[Vec<(usize, Rational)>], rhs: &[(usize, Rational)], rows: usize) -> Option<Vec<Rational>> {
    let unknowns = columns.len();
    // row-major sparse rows: unknown index -> coefficient, plus rhs
    let mut m: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); rows];
    for (j, col) in columns.iter().enumerate() {
        for (r, c) in col {
            m[*r].insert(j, c.clone());
        }
    }
    let mut b = vec![Rational::zero(); rows];
    for (r, c) in rhs {
        b[*r] = c.clone();
    }
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut done = vec![false; rows];
    for col in 0..unknowns {
        // sparsest unused row with a nonzero in this column
        let Some(sel) = (0..rows)
            .filter(|&r| !done[r] && m[r].contains_key(&col))
            .min_by_key(|&r| m[r].len())
        else {
            continue;
        };
        done[sel] = true;
        let inv = m[sel][&col].recip();
        for v in m[sel].values_mut() {
            *v *= &inv;
        }
        b[sel] *= &inv;
        let prow = m[sel].clone();
        let pb = b[sel].clone();
        for r in 0..rows {
            if r == sel {
                continue;
            }
            let Some(f) = m[r].get(&col).cloned() else {
                continue;
            };
            for (k, v) in &prow {
                let e = m[r].entry(*k).or_insert_with(Rational::zero);
                *e -= &f * v;
                if e.is_zero() {
                    m[r].remove(k);
                }
            }
            let d = &f * &pb;
            b[r] -= d;
        }
        pivots.push((sel, col));
    }
    if (0..rows).any(|r| !done[r] && !b[r].is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); unknowns];
    for (r, c) in pivots {
        x[c] = b[r].clone();
    }
    Some(x)
}

/// Finds `g_j` with `target = Σ_j g_j · basis_j` and `deg g_j ≤ degs[j]`
/// (`None` forces `g_j = 0`), over monomials in `n` variables.
pub(crate) fn combination(target: &Polynomial, basis: &[Polynomial], degs: &[Option<u32>], n: usize) -> Option<Vec<Polynomial>> {
    let monos: Vec<Vec<Monomial>> = degs
        .iter()
        .map(|d| d.map_or_else(Vec::new, |d| monomials_up_to(n, d)))
        .collect();
    let mut index: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut row_of = |t: &Monomial| {
        let next = index.len();
        *index.entry(t.clone()).or_insert(next)
    };
    let mut columns: Vec<Vec<(usize, Rational)>> = Vec::new();
    for (b, ms) in basis.iter().zip(&monos) {
        for m in ms {
            let col = b.mul_term(m, &Rational::one()).terms().iter().map(|(t, c)| (row_of(t), c.clone())).collect();
            columns.push(col);
        }
    }
    let rhs: Vec<(usize, Rational)> = target.terms().iter().map(|(t, c)| (row_of(t), c.clone())).collect();
    let x = solve(&columns, &rhs, index.len())?;
    let mut out = Vec::with_capacity(basis.len());
    let mut k = 0;
    for ms in &monos {
        out.push(Polynomial::from_terms(ms.iter().cloned().zip(x[k..k + ms.len()].iter().cloned())));
        k += ms.len();
    }
    debug_assert_eq!(
        &out.iter().zip(basis).fold(Polynomial::zero(), |a, (g, b)| &a + &(g * b)),
        target
    );
    Some(out)
}
