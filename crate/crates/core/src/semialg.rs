//! Real-arithmetic formulas, semialgebraic normal forms and local progress
//! formulas.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::ideals::{rank_with, IdealError, DEFAULT_RANK_CAP, DEFAULT_STEP_BUDGET};
use crate::ode::OdeSystem;
use crate::poly::{Polynomial, Rational, VarId, VarTable};

/// Default limit on the number of disjuncts a normal form may have.
pub const DEFAULT_DISJUNCT_LIMIT: usize = 4096;
const DISJUNCT_WARNING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormulaError {
    #[error("quantified formulas are not supported here")]
    Quantified,
    #[error("normal form exceeds {0} disjuncts")]
    TooManyDisjuncts(usize),
    #[error("formula is not algebraic (needs only equations)")]
    NotAlgebraic,
    #[error(transparent)]
    Rank(#[from] IdealError),
}

/// Comparison of a polynomial against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Ge,
    Gt,
    Eq,
    Le,
    Lt,
    Ne,
}

impl Rel {
    pub fn negate(self) -> Rel {
        match self {
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
            Rel::Eq => Rel::Ne,
            Rel::Le => Rel::Gt,
            Rel::Lt => Rel::Ge,
            Rel::Ne => Rel::Eq,
        }
    }

    /// The relation satisfied by `-p` when `p` satisfies `self`.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
            Rel::Le => Rel::Ge,
            Rel::Lt => Rel::Gt,
            r => r,
        }
    }

    pub fn holds(self, sign: Ordering) -> bool {
        match self {
            Rel::Ge => sign != Ordering::Less,
            Rel::Gt => sign == Ordering::Greater,
            Rel::Eq => sign == Ordering::Equal,
            Rel::Le => sign != Ordering::Greater,
            Rel::Lt => sign == Ordering::Less,
            Rel::Ne => sign != Ordering::Equal,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Eq => "=",
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ne => "!=",
        }
    }
}

/// `poly rel 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub poly: Polynomial,
    pub rel: Rel,
}

impl Atom {
    pub fn new(poly: Polynomial, rel: Rel) -> Self {
        Self { poly, rel }
    }

    /// Truth value when the polynomial is constant.
    pub fn constant_truth(&self) -> Option<bool> {
        self.poly.constant_value().map(|c| self.rel.holds(sign_of(&c)))
    }
}

fn sign_of(c: &Rational) -> Ordering {
    if c.is_zero() {
        Ordering::Equal
    } else if c.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Vec<VarId>, Box<Formula>),
    Exists(Vec<VarId>, Box<Formula>),
}

impl Formula {
    pub fn atom(poly: Polynomial, rel: Rel) -> Self {
        Formula::Atom(Atom::new(poly, rel))
    }

    /// Conjunction; empty is `true`, a singleton is its element.
    pub fn and(mut parts: Vec<Formula>) -> Self {
        match parts.len() {
            0 => Formula::True,
            1 => parts.pop().expect("one element"),
            _ => Formula::And(parts),
        }
    }

    /// Disjunction; empty is `false`, a singleton is its element.
    pub fn or(mut parts: Vec<Formula>) -> Self {
        match parts.len() {
            0 => Formula::False,
            1 => parts.pop().expect("one element"),
            _ => Formula::Or(parts),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().all(Formula::is_quantifier_free),
            Formula::Implies(a, b) => a.is_quantifier_free() && b.is_quantifier_free(),
            Formula::Forall(..) | Formula::Exists(..) => false,
        }
    }

    /// Visits every atom.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) | Formula::Forall(_, f) | Formula::Exists(_, f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
            Formula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Exact truth value at a rational point; `None` for quantified formulas.
    pub fn eval(&self, point: &[Rational]) -> Option<bool> {
        let mut ev = Evaluator::new(point);
        ev.eval(self)
    }

    /// Like [`Formula::eval`] for formulas known to be quantifier-free.
    pub fn holds(&self, point: &[Rational]) -> bool {
        self.eval(point).expect("quantifier-free formula")
    }

    pub fn display<'a>(&'a self, vars: &'a VarTable) -> FormulaDisplay<'a> {
        FormulaDisplay { f: self, vars }
    }
}

/// Sign-of-polynomial evaluation at one point, cached per polynomial.
///
/// Signs are first estimated in floating point with a conservative
/// rounding bound and only recomputed exactly when the estimate is too
/// close to zero to be trusted.
pub struct Evaluator<'p> {
    point: &'p [Rational],
    approx: Vec<f64>,
    cache: HashMap<Polynomial, Ordering>,
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p [Rational]) -> Self {
        let approx = point.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        Self {
            point,
            approx,
            cache: HashMap::new(),
        }
    }

    pub fn sign(&mut self, p: &Polynomial) -> Ordering {
        if let Some(s) = self.cache.get(p) {
            return *s;
        }
        let s = self.fast_sign(p).unwrap_or_else(|| sign_of(&p.eval(self.point)));
        self.cache.insert(p.clone(), s);
        s
    }

    fn fast_sign(&self, p: &Polynomial) -> Option<Ordering> {
        let mut value = 0.0f64;
        let mut magnitude = 0.0f64;
        let mut ops = 0u32;
        for (m, c) in p.terms() {
            let mut t = c.to_f64()?;
            for (i, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    t *= self.approx.get(i)?.powi(e as i32);
                    ops += e + 1;
                }
            }
            value += t;
            magnitude += t.abs();
            ops += 2;
        }
        if !value.is_finite() || !magnitude.is_finite() {
            return None;
        }
        // generous bound on accumulated relative rounding error
        let err = 4.0 * f64::from(ops + p.len() as u32 + 4) * f64::EPSILON * magnitude;
        if value > err {
            Some(Ordering::Greater)
        } else if value < -err {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    pub fn eval(&mut self, f: &Formula) -> Option<bool> {
        Some(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => {
                let s = self.sign(&a.poly);
                a.rel.holds(s)
            }
            Formula::Not(g) => !self.eval(g)?,
            Formula::And(fs) => {
                for g in fs {
                    if !self.eval(g)? {
                        return Some(false);
                    }
                }
                true
            }
            Formula::Or(fs) => {
                for g in fs {
                    if self.eval(g)? {
                        return Some(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !self.eval(a)? || self.eval(b)?,
            Formula::Forall(..) | Formula::Exists(..) => return None,
        })
    }
}

/// Infix rendering that the parser reads back to the same value.
pub struct FormulaDisplay<'a> {
    f: &'a Formula,
    vars: &'a VarTable,
}

impl FormulaDisplay<'_> {
    fn child(&self, f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f {
            Formula::And(_) | Formula::Or(_) | Formula::Implies(..) | Formula::Forall(..) | Formula::Exists(..) => {
                write!(out, "({})", f.display(self.vars))
            }
            _ => write!(out, "{}", f.display(self.vars)),
        }
    }

    fn join(&self, fs: &[Formula], sep: &str, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, g) in fs.iter().enumerate() {
            if k > 0 {
                write!(out, " {sep} ")?;
            }
            self.child(g, out)?;
        }
        Ok(())
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.f {
            Formula::True => write!(out, "true"),
            Formula::False => write!(out, "false"),
            Formula::Atom(a) => write!(out, "{} {} 0", a.poly.display(self.vars), a.rel.symbol()),
            Formula::Not(g) => {
                write!(out, "!")?;
                match g.as_ref() {
                    Formula::Atom(_) => write!(out, "({})", g.display(self.vars)),
                    _ => self.child(g, out),
                }
            }
            Formula::And(fs) => self.join(fs, "&", out),
            Formula::Or(fs) => self.join(fs, "|", out),
            Formula::Implies(a, b) => {
                self.child(a, out)?;
                write!(out, " -> ")?;
                self.child(b, out)
            }
            Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
                let q = if matches!(self.f, Formula::Forall(..)) { "forall" } else { "exists" };
                let names: Vec<&str> = vs.iter().map(|&v| self.vars.name(v)).collect();
                write!(out, "{q} {}. ", names.join(" "))?;
                self.child(g, out)
            }
        }
    }
}

/// One disjunct: `⋀ geqs ≥ 0 ∧ ⋀ gts > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Conjunct {
    pub geqs: Vec<Polynomial>,
    pub gts: Vec<Polynomial>,
}

impl Conjunct {
    pub fn is_true(&self) -> bool {
        self.geqs.is_empty() && self.gts.is_empty()
    }

    pub fn to_formula(&self) -> Formula {
        let parts = self
            .geqs
            .iter()
            .map(|p| Formula::atom(p.clone(), Rel::Ge))
            .chain(self.gts.iter().map(|q| Formula::atom(q.clone(), Rel::Gt)))
            .collect();
        Formula::and(parts)
    }

    // Constant folding and literal deduplication. `None` when the conjunct
    // is false.
    fn simplify(self) -> Option<Conjunct> {
        let mut out = Conjunct::default();
        for p in self.geqs {
            match p.constant_value() {
                Some(c) if c.is_negative() => return None,
                Some(_) => {}
                None if !out.geqs.contains(&p) => out.geqs.push(p),
                None => {}
            }
        }
        for q in self.gts {
            match q.constant_value() {
                Some(c) if !c.is_positive() => return None,
                Some(_) => {}
                None if !out.gts.contains(&q) => out.gts.push(q),
                None => {}
            }
        }
        Some(out)
    }

    fn merge(&self, other: &Conjunct) -> Conjunct {
        let mut c = self.clone();
        c.geqs.extend(other.geqs.iter().cloned());
        c.gts.extend(other.gts.iter().cloned());
        c
    }
}

/// `⋁_i (⋀_j p_ij ≥ 0 ∧ ⋀_j q_ij > 0)`. No disjuncts is `false`; a
/// disjunct without atoms is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct NormalForm {
    pub disjuncts: Vec<Conjunct>,
}

impl NormalForm {
    pub fn tt() -> Self {
        Self {
            disjuncts: vec![Conjunct::default()],
        }
    }

    pub fn ff() -> Self {
        Self { disjuncts: Vec::new() }
    }

    pub fn to_formula(&self) -> Formula {
        Formula::or(self.disjuncts.iter().map(Conjunct::to_formula).collect())
    }

    pub fn holds(&self, point: &[Rational]) -> bool {
        self.to_formula().holds(point)
    }

    /// Every atom is strict, so the set is topologically open.
    pub fn is_open(&self) -> bool {
        self.disjuncts.iter().all(|c| c.geqs.is_empty())
    }

    /// Every atom is non-strict, so the set is topologically closed.
    pub fn is_closed(&self) -> bool {
        self.disjuncts.iter().all(|c| c.gts.is_empty())
    }

    pub fn is_true(&self) -> bool {
        self.disjuncts.iter().any(Conjunct::is_true)
    }

    fn from_conjuncts(cs: Vec<Conjunct>) -> Self {
        Self {
            disjuncts: cs.into_iter().filter_map(Conjunct::simplify).collect(),
        }
    }
}

/// Rewrites a quantifier-free formula into normal form.
pub fn to_normal_form(phi: &Formula) -> Result<NormalForm, FormulaError> {
    to_normal_form_limited(phi, DEFAULT_DISJUNCT_LIMIT)
}

pub fn to_normal_form_limited(phi: &Formula, limit: usize) -> Result<NormalForm, FormulaError> {
    if !phi.is_quantifier_free() {
        return Err(FormulaError::Quantified);
    }
    let cs = dnf(phi, true, limit)?;
    let nf = NormalForm::from_conjuncts(cs);
    if nf.disjuncts.len() > DISJUNCT_WARNING {
        log::warn!("normal form has {} disjuncts", nf.disjuncts.len());
    }
    Ok(nf)
}

fn atom_dnf(p: &Polynomial, rel: Rel) -> Vec<Conjunct> {
    let geq = |p: Polynomial| Conjunct {
        geqs: vec![p],
        gts: vec![],
    };
    let gt = |p: Polynomial| Conjunct {
        geqs: vec![],
        gts: vec![p],
    };
    match rel {
        Rel::Ge => vec![geq(p.clone())],
        Rel::Gt => vec![gt(p.clone())],
        Rel::Eq => vec![Conjunct {
            geqs: vec![p.clone(), -p],
            gts: vec![],
        }],
        Rel::Le => vec![geq(-p)],
        Rel::Lt => vec![gt(-p)],
        Rel::Ne => vec![gt(p.clone()), gt(-p)],
    }
}

fn product(a: Vec<Conjunct>, b: Vec<Conjunct>, limit: usize) -> Result<Vec<Conjunct>, FormulaError> {
    if a.len().saturating_mul(b.len()) > limit {
        return Err(FormulaError::TooManyDisjuncts(limit));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            out.push(x.merge(y));
        }
    }
    Ok(out)
}

// DNF of `f` (if `positive`) or of `¬f`, with negations pushed to atoms.
fn dnf(f: &Formula, positive: bool, limit: usize) -> Result<Vec<Conjunct>, FormulaError> {
    let conj = |fs: &[Formula], pos: bool| -> Result<Vec<Conjunct>, FormulaError> {
        let mut acc = vec![Conjunct::default()];
        for g in fs {
            acc = product(acc, dnf(g, pos, limit)?, limit)?;
            acc = acc.into_iter().filter_map(Conjunct::simplify).collect();
        }
        Ok(acc)
    };
    let disj = |fs: &[&Formula], pos: &[bool]| -> Result<Vec<Conjunct>, FormulaError> {
        let mut acc = Vec::new();
        for (g, &p) in fs.iter().zip(pos) {
            acc.extend(dnf(g, p, limit)?);
            if acc.len() > limit {
                return Err(FormulaError::TooManyDisjuncts(limit));
            }
        }
        Ok(acc)
    };
    match (f, positive) {
        (Formula::True, true) | (Formula::False, false) => Ok(vec![Conjunct::default()]),
        (Formula::True, false) | (Formula::False, true) => Ok(vec![]),
        (Formula::Atom(a), pos) => {
            let rel = if pos { a.rel } else { a.rel.negate() };
            Ok(atom_dnf(&a.poly, rel))
        }
        (Formula::Not(g), pos) => dnf(g, !pos, limit),
        (Formula::And(fs), true) | (Formula::Or(fs), false) => conj(fs, positive),
        (Formula::Or(fs), true) | (Formula::And(fs), false) => {
            let refs: Vec<&Formula> = fs.iter().collect();
            disj(&refs, &vec![positive; fs.len()])
        }
        (Formula::Implies(a, b), true) => disj(&[a, b], &[false, true]),
        (Formula::Implies(a, b), false) => {
            let parts = [Formula::clone(a), Formula::not(Formula::clone(b))];
            conj(&parts, true)
        }
        (Formula::Forall(..) | Formula::Exists(..), _) => Err(FormulaError::Quantified),
    }
}

/// Normal form of `¬P`: negate each atom (`p ≥ 0 ↦ -p > 0`,
/// `q > 0 ↦ -q ≥ 0`) and distribute the resulting CNF into DNF.
pub fn negate_normal_form(p: &NormalForm) -> NormalForm {
    let clauses: Vec<Vec<Conjunct>> = p
        .disjuncts
        .iter()
        .map(|c| {
            c.geqs
                .iter()
                .map(|g| Conjunct {
                    geqs: vec![],
                    gts: vec![-g],
                })
                .chain(c.gts.iter().map(|q| Conjunct {
                    geqs: vec![-q],
                    gts: vec![],
                }))
                .collect()
        })
        .collect();
    let mut acc = vec![Conjunct::default()];
    for clause in clauses {
        let mut next = Vec::with_capacity(acc.len() * clause.len());
        let mut seen = std::collections::HashSet::new();
        for a in &acc {
            for lit in &clause {
                if let Some(c) = a.merge(lit).simplify() {
                    if seen.insert(c.clone()) {
                        next.push(c);
                    }
                }
            }
        }
        acc = next;
    }
    if acc.len() > DISJUNCT_WARNING {
        log::warn!("negated normal form has {} disjuncts", acc.len());
    }
    NormalForm::from_conjuncts(acc)
}

/// Single polynomial `e` with `P ⟺ e = 0`, for `P` built from equations:
/// conjunctions become sums of squares, disjunctions products.
pub fn algebraic_combine(p: &NormalForm) -> Result<Polynomial, FormulaError> {
    let mut product = Polynomial::one();
    let mut first = true;
    for c in &p.disjuncts {
        if !c.gts.is_empty() {
            return Err(FormulaError::NotAlgebraic);
        }
        let mut used = vec![false; c.geqs.len()];
        let mut eqs = Vec::new();
        for i in 0..c.geqs.len() {
            if used[i] {
                continue;
            }
            let neg = -&c.geqs[i];
            let j = (0..c.geqs.len())
                .find(|&j| !used[j] && j != i && c.geqs[j] == neg)
                .ok_or(FormulaError::NotAlgebraic)?;
            used[i] = true;
            used[j] = true;
            eqs.push(c.geqs[i].clone());
        }
        let term = match eqs.len() {
            0 => Polynomial::zero(),
            1 => eqs.pop().expect("one equation"),
            _ => eqs.iter().fold(Polynomial::zero(), |acc, e| &acc + &e.pow(2)),
        };
        product = if first { term } else { &product * &term };
        first = false;
    }
    Ok(product)
}

/// Builds progress formulas along one ODE, caching ranks.
pub struct Progress<'s> {
    sys: &'s OdeSystem,
    cap: usize,
    budget: usize,
    ranks: HashMap<Polynomial, usize>,
}

impl<'s> Progress<'s> {
    pub fn new(sys: &'s OdeSystem) -> Self {
        Self::with_cap(sys, DEFAULT_RANK_CAP)
    }

    pub fn with_cap(sys: &'s OdeSystem, cap: usize) -> Self {
        Self {
            sys,
            cap,
            budget: DEFAULT_STEP_BUDGET,
            ranks: HashMap::new(),
        }
    }

    pub fn system(&self) -> &OdeSystem {
        self.sys
    }

    pub fn rank(&mut self, p: &Polynomial) -> Result<usize, IdealError> {
        // rank is invariant under nonzero scaling
        let key = p.monic();
        if let Some(&n) = self.ranks.get(&key) {
            return Ok(n);
        }
        let n = rank_with(&key, self.sys, self.cap, self.budget)?.rank;
        self.ranks.insert(key, n);
        Ok(n)
    }

    /// `[p, Lp, …, L^{N-1} p]`.
    pub fn chain(&mut self, p: &Polynomial) -> Result<Vec<Polynomial>, IdealError> {
        let n = self.rank(p)?;
        Ok(self.sys.lie_chain(p, n))
    }

    /// `ε(p)`: all of `p, …, L^{N-1} p` vanish.
    pub fn radical(&mut self, p: &Polynomial) -> Result<Formula, IdealError> {
        let chain = self.chain(p)?;
        Ok(Formula::and(chain.into_iter().map(|q| Formula::atom(q, Rel::Eq)).collect()))
    }

    /// First significant Lie derivative is positive.
    pub fn gt(&mut self, p: &Polynomial) -> Result<Formula, IdealError> {
        let chain = self.chain(p)?;
        let n = chain.len();
        if n == 1 {
            return Ok(Formula::atom(p.clone(), Rel::Gt));
        }
        let mut parts = vec![Formula::atom(chain[0].clone(), Rel::Ge)];
        for k in 1..n {
            let hyp = Formula::and(chain[..k].iter().map(|q| Formula::atom(q.clone(), Rel::Eq)).collect());
            let rel = if k == n - 1 { Rel::Gt } else { Rel::Ge };
            parts.push(Formula::implies(hyp, Formula::atom(chain[k].clone(), rel)));
        }
        Ok(Formula::And(parts))
    }

    /// `gt(p) ∨ ε(p)`.
    pub fn geq(&mut self, p: &Polynomial) -> Result<Formula, IdealError> {
        Ok(Formula::Or(vec![self.gt(p)?, self.radical(p)?]))
    }

    /// `⋁_i (⋀_j geq(p_ij) ∧ ⋀_j gt(q_ij))`.
    pub fn semialg(&mut self, p: &NormalForm) -> Result<Formula, IdealError> {
        let mut disj = Vec::with_capacity(p.disjuncts.len());
        for c in &p.disjuncts {
            let mut conj = Vec::with_capacity(c.geqs.len() + c.gts.len());
            for g in &c.geqs {
                conj.push(self.geq(g)?);
            }
            for q in &c.gts {
                conj.push(self.gt(q)?);
            }
            disj.push(Formula::and(conj));
        }
        Ok(Formula::or(disj))
    }
}

pub fn progress_gt(p: &Polynomial, sys: &OdeSystem) -> Result<Formula, IdealError> {
    Progress::new(sys).gt(p)
}

pub fn progress_geq(p: &Polynomial, sys: &OdeSystem) -> Result<Formula, IdealError> {
    Progress::new(sys).geq(p)
}

pub fn semialg_progress(p: &NormalForm, sys: &OdeSystem) -> Result<Formula, IdealError> {
    Progress::new(sys).semialg(p)
}
