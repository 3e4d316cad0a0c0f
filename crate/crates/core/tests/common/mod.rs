//! Independent oracles and random generators shared by integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use odeinv_core::hp::HybridProgram;
use odeinv_core::poly::{Monomial, PolyMatrix, Polynomial, Rational, VarTable};
use odeinv_core::semialg::{Conjunct, Formula, NormalForm, Rel};
use odeinv_core::OdeSystem;
use rand::Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Dense polynomial over a fixed number of variables, implemented from
/// scratch: a map from full exponent vectors to coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub terms: BTreeMap<Vec<u32>, Rational>,
}

impl Dense {
    pub fn zero(n: usize) -> Self {
        Dense { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut d = Dense::zero(n);
        if !c.is_zero() {
            d.terms.insert(vec![0; n], c);
        }
        d
    }

    pub fn from_poly(p: &Polynomial, n: usize) -> Self {
        let mut d = Dense::zero(n);
        for (m, c) in p.terms() {
            let e: Vec<u32> = (0..n).map(|i| m.exponent(i)).collect();
            d.terms.insert(e, c.clone());
        }
        d
    }

    pub fn to_poly(&self) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(e, c)| (Monomial::from_exponents(e), c.clone())))
    }

    fn clean(mut self) -> Self {
        self.terms.retain(|_, c| !c.is_zero());
        self
    }

    pub fn add(&self, o: &Dense) -> Dense {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            *out.terms.entry(e.clone()).or_insert_with(Rational::zero) += c;
        }
        out.clean()
    }

    pub fn neg(&self) -> Dense {
        Dense {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, o: &Dense) -> Dense {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let mut out = Dense::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_insert_with(Rational::zero) += ca * cb;
            }
        }
        out.clean()
    }

    pub fn deriv(&self, i: usize) -> Dense {
        let mut out = Dense::zero(self.n);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                *out.terms.entry(f).or_insert_with(Rational::zero) += c * Rational::from_integer(BigInt::from(e[i]));
            }
        }
        out.clean()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                for _ in 0..k {
                    t *= &x[i];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Lie derivative by the textbook formula, over `Dense`.
pub fn lie_oracle(p: &Polynomial, sys: &OdeSystem) -> Polynomial {
    let n = sys.table().len();
    let dp = Dense::from_poly(p, n);
    let mut acc = Dense::zero(n);
    for (&x, f) in sys.vars().iter().zip(sys.rhs()) {
        acc = acc.add(&dp.deriv(x).mul(&Dense::from_poly(f, n)));
    }
    acc.to_poly()
}

pub fn lie_chain_oracle(p: &Polynomial, sys: &OdeSystem, len: usize) -> Vec<Polynomial> {
    let mut out = vec![p.clone()];
    while out.len() < len {
        let next = lie_oracle(out.last().unwrap(), sys);
        out.push(next);
    }
    out
}

/// Determinant by permutation expansion.
pub fn det_oracle(m: &PolyMatrix, n_vars: usize) -> Polynomial {
    let k = m.rows();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut acc = Dense::zero(n_vars);
    permutations(&mut perm, 0, &mut |p| {
        let mut inversions = 0;
        for i in 0..k {
            for j in i + 1..k {
                if p[i] > p[j] {
                    inversions += 1;
                }
            }
        }
        let mut t = Dense::constant(n_vars, Rational::one());
        for (i, &j) in p.iter().enumerate() {
            t = t.mul(&Dense::from_poly(m.get(i, j), n_vars));
        }
        acc = if inversions % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
    });
    acc.to_poly()
}

fn permutations(p: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permutations(p, i + 1, f);
        p.swap(i, j);
    }
}

/// Formula truth by direct recursion with `Dense` evaluation of atoms.
pub fn holds_oracle(f: &Formula, x: &[Rational]) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => {
            let v = Dense::from_poly(&a.poly, x.len()).eval(x);
            let z = Rational::zero();
            match a.rel {
                Rel::Ge => v >= z,
                Rel::Gt => v > z,
                Rel::Eq => v == z,
                Rel::Le => v <= z,
                Rel::Lt => v < z,
                Rel::Ne => v != z,
            }
        }
        Formula::Not(g) => !holds_oracle(g, x),
        Formula::And(fs) => fs.iter().all(|g| holds_oracle(g, x)),
        Formula::Or(fs) => fs.iter().any(|g| holds_oracle(g, x)),
        Formula::Implies(a, b) => !holds_oracle(a, x) || holds_oracle(b, x),
        Formula::Forall(..) | Formula::Exists(..) => panic!("quantified formula in oracle"),
    }
}

// --- random data: sparse, small integer coefficients ---

pub fn small_coeff(rng: &mut impl Rng) -> Rational {
    let mut c = 0;
    while c == 0 {
        c = rng.gen_range(-3i64..=3);
    }
    Rational::from_integer(BigInt::from(c))
}

pub fn random_monomial(rng: &mut impl Rng, n: usize, max_deg: u32) -> Monomial {
    let d = rng.gen_range(0..=max_deg);
    let mut e = vec![0u32; n];
    for _ in 0..d {
        e[rng.gen_range(0..n)] += 1;
    }
    Monomial::from_exponents(&e)
}

pub fn random_poly(rng: &mut impl Rng, n: usize, max_deg: u32, max_terms: usize) -> Polynomial {
    let k = rng.gen_range(1..=max_terms);
    let mut p = Polynomial::zero();
    for _ in 0..k {
        p = &p + &Polynomial::monomial(random_monomial(rng, n, max_deg), small_coeff(rng));
    }
    p
}

pub fn random_nonzero_poly(rng: &mut impl Rng, n: usize, max_deg: u32, max_terms: usize) -> Polynomial {
    loop {
        let p = random_poly(rng, n, max_deg, max_terms);
        if !p.is_constant() {
            return p;
        }
    }
}

pub fn table(n: usize) -> VarTable {
    let names = ["x", "y", "z", "w"];
    VarTable::from_names(names[..n].iter().copied()).unwrap()
}

pub fn random_quadratic_ode(rng: &mut impl Rng, n: usize) -> OdeSystem {
    let rhs = (0..n).map(|_| random_poly(rng, n, 2, 3)).collect();
    OdeSystem::from_rhs(table(n), rhs).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, k: usize, n: usize, max_deg: u32) -> PolyMatrix {
    let entries = (0..k * k)
        .map(|_| {
            if rng.gen_bool(0.3) {
                Polynomial::zero()
            } else {
                random_poly(rng, n, max_deg, 2)
            }
        })
        .collect();
    PolyMatrix::new(k, k, entries).unwrap()
}

pub fn random_point(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Rational::from_integer(BigInt::from(rng.gen_range(-2i64..=2)))
            } else {
                q(rng.gen_range(-20..=20), rng.gen_range(1..=6))
            }
        })
        .collect()
}

pub fn random_normal_form(rng: &mut impl Rng, n: usize) -> NormalForm {
    let disjuncts = (0..rng.gen_range(1..=3))
        .map(|_| {
            let mut c = Conjunct::default();
            for _ in 0..rng.gen_range(1..=2) {
                let p = random_nonzero_poly(rng, n, 2, 2);
                if rng.gen_bool(0.5) {
                    c.geqs.push(p);
                } else {
                    c.gts.push(p);
                }
            }
            c
        })
        .collect();
    NormalForm { disjuncts }
}

fn random_affine_assign(rng: &mut impl Rng, n: usize) -> HybridProgram {
    let x = rng.gen_range(0..n);
    HybridProgram::Assign(x, random_poly(rng, n, 1, 2))
}

/// Loop-free discrete program over `n` variables.
pub fn random_discrete_program(rng: &mut impl Rng, n: usize, depth: u32) -> HybridProgram {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.7) {
            let x = rng.gen_range(0..n);
            HybridProgram::Assign(x, random_poly(rng, n, 2, 2))
        } else {
            HybridProgram::Test(random_nonzero_poly(rng, n, 1, 2))
        };
    }
    let a = random_discrete_program(rng, n, depth - 1);
    let b = random_discrete_program(rng, n, depth - 1);
    if rng.gen_bool(0.5) {
        HybridProgram::seq(a, b)
    } else {
        HybridProgram::choice(a, b)
    }
}

/// Loop whose body uses affine assignments and choices only.
pub fn random_loop_program(rng: &mut impl Rng, n: usize) -> HybridProgram {
    let body = match rng.gen_range(0..3) {
        0 => random_affine_assign(rng, n),
        1 => HybridProgram::seq(random_affine_assign(rng, n), random_affine_assign(rng, n)),
        _ => HybridProgram::choice(random_affine_assign(rng, n), random_affine_assign(rng, n)),
    };
    HybridProgram::star(body)
}
