//! Tiered discharge of side conditions: constant folding, reduction modulo
//! the hypothesis equalities, exact-rational sampling, external solver.

use std::cmp::Ordering;
use std::path::PathBuf;
use std::time::Duration;

use num_traits::Signed;

use super::{sample, smt, SideCondition, SolverAnswer, Status};
use crate::ideals::{GroebnerBasis, GroebnerOptions, DEFAULT_RANK_CAP};
use crate::poly::Polynomial;
use crate::semialg::{to_normal_form_limited, Atom, Formula, DEFAULT_DISJUNCT_LIMIT};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DischargeConfig {
    /// Random points tried by the sampling tier; 0 disables it.
    pub samples: usize,
    pub seed: u64,
    /// External SMT solver binary, invoked as `solver query.smt2`.
    pub solver: Option<PathBuf>,
    pub solver_timeout: Duration,
    pub rank_cap: usize,
    /// Largest number of non-strict hypothesis atoms split into `> 0` and
    /// `= 0` cases by the ideal-reduction tier.
    pub case_split_limit: usize,
    pub disjunct_limit: usize,
}

impl Default for DischargeConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            solver: None,
            solver_timeout: Duration::from_secs(10),
            rank_cap: DEFAULT_RANK_CAP,
            case_split_limit: 10,
            disjunct_limit: DEFAULT_DISJUNCT_LIMIT,
        }
    }
}

/// Fills in `c.status`, trying each tier in turn.
pub fn discharge(mut c: SideCondition, config: &DischargeConfig) -> SideCondition {
    c.note = None;
    let hyp = fold(&c.hypothesis);
    let concl = fold(&c.conclusion);
    if hyp == Formula::False || concl == Formula::True {
        c.status = Status::ProvedIdentity;
        return c;
    }
    if syntactically_entailed(&hyp, &concl) || ideal_tier(&hyp, &concl, config) {
        c.status = Status::ProvedByIdealReduction;
        return c;
    }
    if config.samples > 0 {
        if let Some(w) = sample::search(&c, config.samples, config.seed) {
            c.status = Status::Refuted(w);
            return c;
        }
    }
    c.status = Status::Unknown;
    if let Some(solver) = &config.solver {
        match smt::run_solver(&c, solver, config.solver_timeout) {
            SolverAnswer::Unsat => c.status = Status::SmtValid,
            SolverAnswer::Sat(Some(point)) if c.refuted_by(&point) => c.status = Status::Refuted(point),
            SolverAnswer::Sat(_) => c.note = Some("solver model failed exact re-verification".into()),
            SolverAnswer::Unknown(why) => c.note = Some(format!("solver: {why}")),
        }
    } else {
        c.note = Some("no solver configured".into());
    }
    c
}

/// Constant folding of numeric atoms and boolean constants.
pub(crate) fn fold(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(a) => match a.constant_truth() {
            Some(true) => Formula::True,
            Some(false) => Formula::False,
            None => f.clone(),
        },
        Formula::Not(g) => match fold(g) {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            h => Formula::not(h),
        },
        Formula::And(fs) => {
            let mut out = Vec::new();
            for g in fs {
                match fold(g) {
                    Formula::True => {}
                    Formula::False => return Formula::False,
                    h => out.push(h),
                }
            }
            Formula::and(out)
        }
        Formula::Or(fs) => {
            let mut out = Vec::new();
            for g in fs {
                match fold(g) {
                    Formula::False => {}
                    Formula::True => return Formula::True,
                    h => out.push(h),
                }
            }
            Formula::or(out)
        }
        Formula::Implies(a, b) => match (fold(a), fold(b)) {
            (Formula::False, _) | (_, Formula::True) => Formula::True,
            (Formula::True, h) => h,
            (g, Formula::False) => Formula::not(g),
            (g, h) => Formula::implies(g, h),
        },
        Formula::Forall(vs, g) => Formula::Forall(vs.clone(), Box::new(fold(g))),
        Formula::Exists(vs, g) => Formula::Exists(vs.clone(), Box::new(fold(g))),
    }
}

fn syntactically_entailed(hyp: &Formula, concl: &Formula) -> bool {
    match hyp {
        Formula::And(parts) => parts.contains(concl),
        h => h == concl,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kleene {
    T,
    F,
    U,
}

impl From<bool> for Kleene {
    fn from(b: bool) -> Self {
        if b {
            Kleene::T
        } else {
            Kleene::F
        }
    }
}

// Facts of one hypothesis case: equalities (as a basis) and strict
// positivity of further polynomials, reduced modulo that basis.
struct Case {
    basis: Option<GroebnerBasis>,
    positive: Vec<Polynomial>,
}

impl Case {
    fn reduce(&self, p: &Polynomial) -> Polynomial {
        match &self.basis {
            Some(gb) => gb.reduce(p),
            None => p.clone(),
        }
    }

    fn sign(&self, p: &Polynomial) -> Option<Ordering> {
        let r = self.reduce(p);
        if let Some(c) = r.constant_value() {
            return Some(c.cmp(&num_traits::zero()));
        }
        let lc = r.leading_coefficient().expect("nonzero");
        let monic = r.monic();
        for s in &self.positive {
            if s.monic() == monic {
                let ratio = lc / s.leading_coefficient().expect("nonzero");
                return Some(if ratio.is_positive() { Ordering::Greater } else { Ordering::Less });
            }
        }
        None
    }

    fn atom(&self, a: &Atom) -> Kleene {
        self.sign(&a.poly).map_or(Kleene::U, |s| a.rel.holds(s).into())
    }

    fn eval(&self, f: &Formula) -> Kleene {
        match f {
            Formula::True => Kleene::T,
            Formula::False => Kleene::F,
            Formula::Atom(a) => self.atom(a),
            Formula::Not(g) => match self.eval(g) {
                Kleene::T => Kleene::F,
                Kleene::F => Kleene::T,
                Kleene::U => Kleene::U,
            },
            Formula::And(fs) => {
                let mut acc = Kleene::T;
                for g in fs {
                    match self.eval(g) {
                        Kleene::F => return Kleene::F,
                        Kleene::U => acc = Kleene::U,
                        Kleene::T => {}
                    }
                }
                acc
            }
            Formula::Or(fs) => {
                let mut acc = Kleene::F;
                for g in fs {
                    match self.eval(g) {
                        Kleene::T => return Kleene::T,
                        Kleene::U => acc = Kleene::U,
                        Kleene::F => {}
                    }
                }
                acc
            }
            Formula::Implies(a, b) => match self.eval(a) {
                Kleene::F => Kleene::T,
                ka => match (ka, self.eval(b)) {
                    (_, Kleene::T) => Kleene::T,
                    (Kleene::T, kb) => kb,
                    _ => Kleene::U,
                },
            },
            Formula::Forall(..) | Formula::Exists(..) => Kleene::U,
        }
    }
}

const MAX_CASES: usize = 4096;

// Proves `hyp → concl` by splitting the hypothesis into cases of
// equalities and strict inequalities and deciding each conclusion atom by
// its remainder modulo the equalities.
fn ideal_tier(hyp: &Formula, concl: &Formula, config: &DischargeConfig) -> bool {
    let Ok(nf) = to_normal_form_limited(hyp, config.disjunct_limit) else {
        return false;
    };
    let opts = GroebnerOptions {
        track: false,
        ..GroebnerOptions::default()
    };
    let mut cases = 0usize;
    for d in &nf.disjuncts {
        let mut eqs: Vec<Polynomial> = Vec::new();
        let mut rest: Vec<Polynomial> = Vec::new();
        for g in &d.geqs {
            let neg = -g;
            if d.geqs.contains(&neg) {
                if !eqs.contains(g) && !eqs.contains(&neg) {
                    eqs.push(g.clone());
                }
            } else {
                rest.push(g.clone());
            }
        }
        if rest.len() > config.case_split_limit {
            return false;
        }
        for mask in 0u64..(1u64 << rest.len()) {
            cases += 1;
            if cases > MAX_CASES {
                return false;
            }
            let mut case_eqs = eqs.clone();
            let mut strict = d.gts.clone();
            for (i, g) in rest.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    case_eqs.push(g.clone());
                } else {
                    strict.push(g.clone());
                }
            }
            let basis = if case_eqs.is_empty() {
                None
            } else {
                match GroebnerBasis::compute(&case_eqs, opts) {
                    Ok(gb) if gb.is_unit() => continue,
                    Ok(gb) => Some(gb),
                    Err(_) => return false,
                }
            };
            let mut case = Case {
                basis,
                positive: Vec::new(),
            };
            let mut infeasible = false;
            for s in &strict {
                let r = case.reduce(s);
                match r.constant_value() {
                    Some(c) if !c.is_positive() => infeasible = true,
                    Some(_) => {}
                    None => case.positive.push(r),
                }
            }
            if infeasible {
                continue;
            }
            if case.eval(concl) != Kleene::T {
                return false;
            }
        }
    }
    true
}
