//! Counterexample search at random rational points.
//!
//! Coordinates are `n/d` with `|n| ≤ 100` and `1 ≤ d ≤ 10`. Every other
//! sample is moved onto the zero set of a random hypothesis atom by solving
//! for one coordinate exactly (linear, or quadratic with a rational square
//! discriminant) or, failing that, by one Newton step.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SideCondition;
use crate::poly::{Polynomial, Rational};
use crate::semialg::Evaluator;

pub(crate) fn random_rational(rng: &mut impl Rng) -> Rational {
    Rational::new(BigInt::from(rng.gen_range(-100i64..=100)), BigInt::from(rng.gen_range(1i64..=10)))
}

pub(crate) fn random_point(n: usize, rng: &mut impl Rng) -> Vec<Rational> {
    (0..n).map(|_| random_rational(rng)).collect()
}

/// A point refuting `c`, verified exactly, if one is found.
pub(crate) fn search(c: &SideCondition, samples: usize, seed: u64) -> Option<Vec<Rational>> {
    let n = c.vars.len();
    let mut atoms: Vec<&Polynomial> = Vec::new();
    for a in c.hypothesis.atoms() {
        if !a.poly.is_constant() && !atoms.contains(&&a.poly) {
            atoms.push(&a.poly);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let mut point = random_point(n, &mut rng);
        if k % 2 == 1 {
            if let Some(a) = atoms.choose(&mut rng) {
                project(&mut point, a, &mut rng);
            }
        }
        let mut ev = Evaluator::new(&point);
        if ev.eval(&c.hypothesis) == Some(true) && ev.eval(&c.conclusion) == Some(false) {
            debug_assert!(c.refuted_by(&point));
            return Some(point);
        }
    }
    None
}

fn rational_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let (n, d) = (r.numer(), r.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    (&sn * &sn == *n && &sd * &sd == *d).then(|| Rational::new(sn, sd))
}

// Moves one coordinate of `point` towards the zero set of `p`.
fn project(point: &mut [Rational], p: &Polynomial, rng: &mut impl Rng) {
    let vars = p.variables();
    let Some(&j) = vars.choose(rng) else { return };
    let others: BTreeMap<usize, Polynomial> = (0..point.len())
        .filter(|&i| i != j)
        .map(|i| (i, Polynomial::constant(point[i].clone())))
        .collect();
    let uni = p.substitute(&others);
    let deg = uni.degree_in(j);
    let coeff = |e: u32| {
        uni.terms()
            .iter()
            .find(|(m, _)| m.exponent(j) == e)
            .map_or_else(Rational::zero, |(_, c)| c.clone())
    };
    match deg {
        1 => point[j] = -coeff(0) / coeff(1),
        2 => {
            let (a, b, c) = (coeff(2), coeff(1), coeff(0));
            let disc = &b * &b - Rational::from_integer(4.into()) * &a * &c;
            if let Some(s) = rational_sqrt(&disc) {
                let s = if rng.gen_bool(0.5) { s } else { -s };
                point[j] = (-b + s) / (Rational::from_integer(2.into()) * a);
            } else {
                newton(point, j, &uni);
            }
        }
        0 => {}
        _ => newton(point, j, &uni),
    }
}

fn newton(point: &mut [Rational], j: usize, uni: &Polynomial) {
    let f = uni.eval(point);
    let df = uni.partial_derivative(j).eval(point);
    if !df.is_zero() {
        point[j] = &point[j] - f / df;
    }
}
