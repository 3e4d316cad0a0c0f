//! Cofactor search by linear algebra over the rationals.

use super::Certificate;
use crate::ideals::RankResult;
use crate::linalg::combination;
use crate::ode::OdeSystem;
use crate::poly::{PolyMatrix, Polynomial};

/// Degree bound `max(0, deg Lp - deg p)`.
pub fn default_degree_bound(p: &Polynomial, sys: &OdeSystem) -> u32 {
    let lp = sys.lie_derivative(p);
    lp.degree().saturating_sub(p.degree())
}

/// `g` with `L p = g·p`, searching cofactors of degree at most `deg_bound`.
pub fn find_darboux_cofactor(p: &Polynomial, sys: &OdeSystem, deg_bound: u32) -> Option<Polynomial> {
    if p.is_zero() {
        return Some(Polynomial::zero());
    }
    let lp = sys.lie_derivative(p);
    combination(&lp, std::slice::from_ref(p), &[Some(deg_bound)], sys.table().len()).map(|mut g| g.remove(0))
}

/// `G` with `L p_i = Σ_j G_ij p_j`; all entries share the degree bound.
pub fn find_vectorial_darboux(ps: &[Polynomial], sys: &OdeSystem, deg_bound: u32) -> Option<PolyMatrix> {
    if ps.is_empty() {
        return None;
    }
    let n = sys.table().len();
    let mut rows = Vec::with_capacity(ps.len());
    for p in ps {
        rows.push(combination(&sys.lie_derivative(p), ps, &vec![Some(deg_bound); ps.len()], n)?);
    }
    Some(PolyMatrix::from_rows(rows).expect("square by construction"))
}

/// Companion matrix of a rank result: ones on the superdiagonal, the
/// cofactors in the last row, acting on `(p, Lp, …, L^{N-1} p)`.
pub fn dri_companion(rank: &RankResult, p: &Polynomial, sys: &OdeSystem) -> Certificate {
    let n = rank.rank;
    let mut g = PolyMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        g.set(i, i + 1, Polynomial::one());
    }
    for (j, c) in rank.cofactors.iter().enumerate() {
        g.set(n - 1, j, c.clone());
    }
    Certificate::VectorialDarboux {
        sys: sys.clone(),
        ps: sys.lie_chain(p, n),
        g,
    }
}
