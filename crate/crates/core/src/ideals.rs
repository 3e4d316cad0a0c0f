//! Gröbner bases with cofactor tracking, ideal membership witnesses, and
//! the rank of a polynomial along an ODE (the ascending chain
//! `⟨p⟩ ⊆ ⟨p, Lp⟩ ⊆ …`).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{One, Zero};

use crate::linalg::{combination, count_monomials};
use crate::ode::OdeSystem;
use crate::poly::{Monomial, MonomialOrder, Polynomial, Rational, VarTable};

/// Default number of reduction steps before a computation gives up.
pub const DEFAULT_STEP_BUDGET: usize = 2_000_000;
/// Default cap on the rank and on loop chains.
pub const DEFAULT_RANK_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdealError {
    #[error("Gröbner basis computation exceeded the step budget of {0}")]
    StepBudget(usize),
    #[error("rank exceeds cap {cap}")]
    RankCap {
        cap: usize,
        /// `p, Lp, …` up to the cap.
        chain: Vec<Polynomial>,
    },
}

// Polynomial with terms sorted ascending under a chosen order, so the
// leading term is the last element.
#[derive(Debug, Clone, PartialEq, Eq)]
struct OPoly {
    terms: Vec<(Monomial, Rational)>,
}

impl OPoly {
    fn from_poly(p: &Polynomial, order: MonomialOrder) -> Self {
        let mut terms = p.terms().to_vec();
        terms.sort_by(|a, b| order.cmp(&a.0, &b.0));
        Self { terms }
    }

    fn to_poly(&self) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().cloned())
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn lead(&self) -> Option<&(Monomial, Rational)> {
        self.terms.last()
    }

    fn scale(&mut self, c: &Rational) {
        for t in &mut self.terms {
            t.1 *= c;
        }
    }

    /// `self - c * m * other`
    fn sub_term_mul(&self, c: &Rational, m: &Monomial, other: &OPoly, order: MonomialOrder) -> OPoly {
        let a = &self.terms;
        let b: Vec<(Monomial, Rational)> = other.terms.iter().map(|(t, k)| (t.mul(m), k * c)).collect();
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match order.cmp(&a[i].0, &b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b[j].0.clone(), -&b[j].1));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = &a[i].1 - &b[j].1;
                    if !c.is_zero() {
                        out.push((a[i].0.clone(), c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend(b[j..].iter().map(|(m, k)| (m.clone(), -k)));
        OPoly { terms: out }
    }
}

// One subtraction `c * m * elem(id)` recorded while reducing.
type Op = (usize, Monomial, Rational);

// How an element of the history arises: an input generator, or a sum of
// monomial multiples of earlier elements.
#[derive(Debug, Clone)]
enum Recipe {
    Generator(usize),
    Combo(Vec<Op>),
}

// Polynomial under reduction. `ops` records `poly = start + Σ c m elem(id)`
// when tracking.
struct Work {
    poly: OPoly,
    ops: Vec<Op>,
}

impl Work {
    fn sub_term_mul(&mut self, c: &Rational, m: &Monomial, other: &Elem, order: MonomialOrder, track: bool) {
        self.poly = self.poly.sub_term_mul(c, m, &other.poly, order);
        if track {
            self.ops.push((other.id, m.clone(), -c));
        }
    }
}

// Basis element; `id` indexes the history.
#[derive(Debug, Clone)]
struct Elem {
    poly: OPoly,
    id: usize,
}

/// Builder-style options for Gröbner computations.
#[derive(Debug, Clone, Copy)]
pub struct GroebnerOptions {
    pub order: MonomialOrder,
    pub step_budget: usize,
    /// Record how each basis element combines the generators.
    pub track: bool,
}

impl Default for GroebnerOptions {
    fn default() -> Self {
        Self {
            order: MonomialOrder::Grevlex,
            step_budget: DEFAULT_STEP_BUDGET,
            track: true,
        }
    }
}

/// Cofactors `h_j` with `Σ h_j · gen_j = p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipWitness {
    pub cofactors: Vec<Polynomial>,
}

impl MembershipWitness {
    /// `Σ h_j · gen_j`.
    pub fn combine(&self, gens: &[Polynomial]) -> Polynomial {
        self.cofactors
            .iter()
            .zip(gens)
            .fold(Polynomial::zero(), |acc, (h, g)| &acc + &(h * g))
    }

    /// Exact recombination check.
    pub fn verifies(&self, p: &Polynomial, gens: &[Polynomial]) -> bool {
        self.cofactors.len() == gens.len() && &self.combine(gens) == p
    }
}

/// Reduced Gröbner basis of `⟨generators⟩`.
///
/// With tracking on, every element ever created keeps a recipe in terms of
/// earlier ones; cofactor rows over the generators are expanded on demand.
#[derive(Debug, Clone)]
pub struct GroebnerBasis {
    generators: Vec<Polynomial>,
    elems: Vec<Elem>,
    history: Vec<Recipe>,
    options: GroebnerOptions,
}

impl GroebnerBasis {
    pub fn compute(gens: &[Polynomial], options: GroebnerOptions) -> Result<Self, IdealError> {
        let empty = GroebnerBasis {
            generators: Vec::new(),
            elems: Vec::new(),
            history: Vec::new(),
            options,
        };
        empty.extend(gens)
    }

    /// Basis of `⟨generators, extra⟩`, starting from this basis.
    pub fn extend(&self, extra: &[Polynomial]) -> Result<Self, IdealError> {
        let opts = self.options;
        let order = opts.order;
        let mut run = Run {
            order,
            track: opts.track,
            budget: opts.step_budget,
            steps: 0,
            basis: self.elems.clone(),
            history: self.history.clone(),
            pairs: Vec::new(),
        };
        for (k, g) in extra.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            let mut ops = Vec::new();
            if opts.track {
                run.history.push(Recipe::Generator(self.generators.len() + k));
                ops.push((run.history.len() - 1, Monomial::one(), Rational::one()));
            }
            run.insert(Work {
                poly: OPoly::from_poly(g, order),
                ops,
            })?;
        }
        run.complete()?;
        let (elems, history) = run.finish()?;
        let mut generators = self.generators.clone();
        generators.extend_from_slice(extra);
        Ok(Self {
            generators,
            elems,
            history,
            options: opts,
        })
    }

    pub fn generators(&self) -> &[Polynomial] {
        &self.generators
    }

    pub fn order(&self) -> MonomialOrder {
        self.options.order
    }

    pub fn basis(&self) -> Vec<Polynomial> {
        self.elems.iter().map(|e| e.poly.to_poly()).collect()
    }

    /// Row `k` expresses `basis[k]` over the generators. `None` when the
    /// basis was computed without tracking.
    pub fn transform(&self) -> Option<Vec<Vec<Polynomial>>> {
        if !self.options.track {
            return None;
        }
        let ids: Vec<usize> = self.elems.iter().map(|e| e.id).collect();
        let rows = self.expand(&ids);
        Some(ids.iter().map(|id| rows[id].clone()).collect())
    }

    // Rows over the generators for `wanted` history entries and everything
    // they depend on. Recipes only refer to earlier entries.
    fn expand(&self, wanted: &[usize]) -> HashMap<usize, Vec<Polynomial>> {
        let mut needed = BTreeSet::new();
        let mut stack = wanted.to_vec();
        while let Some(id) = stack.pop() {
            if needed.insert(id) {
                if let Recipe::Combo(ops) = &self.history[id] {
                    stack.extend(ops.iter().map(|op| op.0));
                }
            }
        }
        let width = self.generators.len();
        let mut rows: HashMap<usize, Vec<Polynomial>> = HashMap::new();
        for id in needed {
            let row = match &self.history[id] {
                Recipe::Generator(j) => {
                    let mut r = vec![Polynomial::zero(); width];
                    r[*j] = Polynomial::one();
                    r
                }
                Recipe::Combo(ops) => combine_ops(ops, &rows, width),
            };
            rows.insert(id, row);
        }
        rows
    }

    pub fn is_unit(&self) -> bool {
        self.elems.len() == 1 && self.elems[0].poly.terms.len() == 1 && self.elems[0].poly.terms[0].0.is_one()
    }

    /// Normal form of `p` (remainder of full division by the basis).
    pub fn reduce(&self, p: &Polynomial) -> Polynomial {
        let mut work = Work {
            poly: OPoly::from_poly(p, self.options.order),
            ops: Vec::new(),
        };
        let (rem, _) = divide(&mut work, &self.elems, self.options.order, false);
        rem.to_poly()
    }

    pub fn contains(&self, p: &Polynomial) -> bool {
        self.reduce(p).is_zero()
    }

    /// Membership witness via the division record and the basis recipes.
    /// Returns `None` for non-members, and also when tracking is off.
    pub fn witness(&self, p: &Polynomial) -> Option<MembershipWitness> {
        if !self.options.track {
            return None;
        }
        let mut work = Work {
            poly: OPoly::from_poly(p, self.options.order),
            ops: Vec::new(),
        };
        let (rem, _) = divide(&mut work, &self.elems, self.options.order, true);
        if !rem.is_zero() {
            return None;
        }
        // 0 = p + Σ c m elem, so p = -Σ c m elem
        let ids: Vec<usize> = work.ops.iter().map(|op| op.0).collect();
        let rows = self.expand(&ids);
        let cofactors = combine_ops(&work.ops, &rows, self.generators.len())
            .into_iter()
            .map(|h| -h)
            .collect();
        let w = MembershipWitness { cofactors };
        debug_assert!(w.verifies(p, &self.generators));
        Some(w)
    }

    /// Diagnostic dump, one basis element per line.
    pub fn dump(&self, vars: &VarTable) -> String {
        self.basis()
            .iter()
            .map(|b| b.display(vars).to_string())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

// `Σ c m row(id)`, grouping the multipliers per id first.
fn combine_ops(ops: &[Op], rows: &HashMap<usize, Vec<Polynomial>>, width: usize) -> Vec<Polynomial> {
    let mut by_id: BTreeMap<usize, Vec<(Monomial, Rational)>> = BTreeMap::new();
    for (id, m, c) in ops {
        by_id.entry(*id).or_default().push((m.clone(), c.clone()));
    }
    let mut out = vec![Polynomial::zero(); width];
    for (id, terms) in by_id {
        let mult = Polynomial::from_terms(terms);
        if mult.is_zero() {
            continue;
        }
        for (o, r) in out.iter_mut().zip(&rows[&id]) {
            if !r.is_zero() {
                *o = &*o + &(&mult * r);
            }
        }
    }
    out
}

// Fully reduces `work.poly` by `basis`, returning the remainder. Every
// subtraction is recorded in `work.ops` when `track`.
fn divide(work: &mut Work, basis: &[Elem], order: MonomialOrder, track: bool) -> (OPoly, usize) {
    let mut rem: Vec<(Monomial, Rational)> = Vec::new();
    let mut steps = 0;
    while let Some((m, c)) = work.poly.lead().cloned() {
        let hit = basis.iter().find(|b| b.poly.lead().is_some_and(|(lm, _)| lm.divides(&m)));
        match hit {
            Some(b) => {
                let (lm, lc) = b.poly.lead().expect("nonzero basis element");
                let q = lm.quotient_of(&m);
                let k = &c / lc;
                work.sub_term_mul(&k, &q, b, order, track);
                steps += 1;
            }
            None => {
                work.poly.terms.pop();
                rem.push((m, c));
            }
        }
    }
    rem.reverse();
    (OPoly { terms: rem }, steps)
}

struct Run {
    order: MonomialOrder,
    track: bool,
    budget: usize,
    steps: usize,
    basis: Vec<Elem>,
    history: Vec<Recipe>,
    pairs: Vec<(usize, usize)>,
}

impl Run {
    fn charge(&mut self, n: usize) -> Result<(), IdealError> {
        self.steps += n;
        if self.steps > self.budget {
            Err(IdealError::StepBudget(self.budget))
        } else {
            Ok(())
        }
    }

    // Records a finished, monic polynomial in the history.
    fn record(&mut self, poly: OPoly, ops: Vec<Op>) -> Elem {
        if !self.track {
            return Elem { poly, id: usize::MAX };
        }
        self.history.push(Recipe::Combo(ops));
        Elem {
            poly,
            id: self.history.len() - 1,
        }
    }

    // Reduce a new element and add it with its pairs.
    fn insert(&mut self, mut w: Work) -> Result<(), IdealError> {
        let (rem, steps) = divide(&mut w, &self.basis, self.order, self.track);
        self.charge(steps)?;
        if rem.is_zero() {
            return Ok(());
        }
        let mut poly = rem;
        let inv = poly.lead().expect("nonzero").1.recip();
        poly.scale(&inv);
        let ops = w.ops.into_iter().map(|(id, m, c)| (id, m, c * &inv)).collect();
        let e = self.record(poly, ops);
        let idx = self.basis.len();
        for i in 0..idx {
            self.pairs.push((i, idx));
        }
        self.basis.push(e);
        Ok(())
    }

    fn lead(&self, i: usize) -> &Monomial {
        &self.basis[i].poly.lead().expect("basis elements are nonzero").0
    }

    fn complete(&mut self) -> Result<(), IdealError> {
        while !self.pairs.is_empty() {
            // normal strategy: smallest lcm, ties by index
            let order = self.order;
            let (pos, _) = self
                .pairs
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    let la = self.lead(a.0).lcm(self.lead(a.1));
                    let lb = self.lead(b.0).lcm(self.lead(b.1));
                    order.cmp(&la, &lb).then(a.cmp(b))
                })
                .expect("nonempty");
            let (i, j) = self.pairs.remove(pos);
            let (li, lj) = (self.lead(i).clone(), self.lead(j).clone());
            if li.coprime(&lj) {
                continue;
            }
            let l = li.lcm(&lj);
            if self.chain_criterion(i, j, &l) {
                continue;
            }
            // basis elements are monic
            let mi = li.quotient_of(&l);
            let mj = lj.quotient_of(&l);
            let mut s = Work {
                poly: OPoly { terms: Vec::new() },
                ops: Vec::new(),
            };
            let one = Rational::one();
            let (bi, bj) = (self.basis[i].clone(), self.basis[j].clone());
            s.sub_term_mul(&-one.clone(), &mi, &bi, self.order, self.track);
            s.sub_term_mul(&one, &mj, &bj, self.order, self.track);
            self.charge(1)?;
            self.insert(s)?;
        }
        Ok(())
    }

    // Buchberger's second criterion: some k with lead(k) | lcm and both
    // (i,k), (j,k) already treated.
    fn chain_criterion(&self, i: usize, j: usize, l: &Monomial) -> bool {
        let pending = |a: usize, b: usize| {
            let key = (a.min(b), a.max(b));
            self.pairs.contains(&key)
        };
        (0..self.basis.len())
            .any(|k| k != i && k != j && self.lead(k).divides(l) && !pending(i, k) && !pending(j, k))
    }

    // Minimal + interreduced basis, sorted by decreasing leading monomial.
    fn finish(mut self) -> Result<(Vec<Elem>, Vec<Recipe>), IdealError> {
        let order = self.order;
        let n = self.basis.len();
        let mut keep = vec![true; n];
        for i in 0..n {
            for j in 0..n {
                if i == j || !keep[j] {
                    continue;
                }
                let (li, lj) = (self.lead(i), self.lead(j));
                // drop i if another kept element's lead divides it (ties: keep lower index)
                if lj.divides(li) && (li != lj || j < i) {
                    keep[i] = false;
                    break;
                }
            }
        }
        let mut minimal: Vec<Elem> = std::mem::take(&mut self.basis)
            .into_iter()
            .zip(keep)
            .filter_map(|(t, k)| k.then_some(t))
            .collect();
        for i in 0..minimal.len() {
            let others: Vec<Elem> = minimal
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, t)| t.clone())
                .collect();
            let mut poly = minimal[i].poly.clone();
            let lead = poly.terms.pop().expect("nonzero");
            // reduce the tail only, then restore the leading term
            let mut tail = Work {
                poly,
                ops: if self.track {
                    vec![(minimal[i].id, Monomial::one(), Rational::one())]
                } else {
                    Vec::new()
                },
            };
            let (rem, steps) = divide(&mut tail, &others, order, self.track);
            self.charge(steps)?;
            if steps == 0 {
                continue;
            }
            let mut terms = rem.terms;
            terms.push(lead);
            minimal[i] = self.record(OPoly { terms }, tail.ops);
        }
        minimal.sort_by(|a, b| order.cmp(&b.poly.lead().unwrap().0, &a.poly.lead().unwrap().0));
        Ok((minimal, self.history))
    }
}

/// Reduced Gröbner basis with cofactor tracking.
pub fn groebner(gens: &[Polynomial], order: MonomialOrder) -> Result<GroebnerBasis, IdealError> {
    GroebnerBasis::compute(
        gens,
        GroebnerOptions {
            order,
            ..GroebnerOptions::default()
        },
    )
}

/// `Some(w)` with `Σ w_j gens_j = p` exactly iff `p ∈ ⟨gens⟩`.
pub fn member_with_witness(p: &Polynomial, gens: &[Polynomial]) -> Result<Option<MembershipWitness>, IdealError> {
    member_with_witness_budget(p, gens, DEFAULT_STEP_BUDGET)
}

fn member_with_witness_budget(p: &Polynomial, gens: &[Polynomial], budget: usize) -> Result<Option<MembershipWitness>, IdealError> {
    if p.is_zero() {
        return Ok(Some(MembershipWitness {
            cofactors: vec![Polynomial::zero(); gens.len()],
        }));
    }
    let untracked = GroebnerOptions {
        track: false,
        step_budget: budget,
        ..GroebnerOptions::default()
    };
    if !GroebnerBasis::compute(gens, untracked)?.contains(p) {
        return Ok(None);
    }
    known_member_witness(p, gens, budget).map(Some)
}

// Witness for a polynomial already known to lie in `⟨gens⟩`. Low-degree
// cofactors from a linear solve are tried first; Buchberger transforms
// tend to carry much larger ones.
fn known_member_witness(p: &Polynomial, gens: &[Polynomial], budget: usize) -> Result<MembershipWitness, IdealError> {
    let w = match bounded_witness(p, gens) {
        Some(cofactors) => MembershipWitness { cofactors },
        None => {
            let tracked = GroebnerOptions {
                step_budget: budget,
                ..GroebnerOptions::default()
            };
            GroebnerBasis::compute(gens, tracked)?
                .witness(p)
                .expect("membership already established")
        }
    };
    assert!(w.verifies(p, gens), "membership witness failed to recombine");
    Ok(w)
}

/// Degrees tried above the largest input degree in the linear search.
const WITNESS_EXTRA_DEGREE: u32 = 3;
/// Largest linear system attempted, in unknowns.
const WITNESS_MAX_UNKNOWNS: usize = 2500;

fn bounded_witness(p: &Polynomial, gens: &[Polynomial]) -> Option<Vec<Polynomial>> {
    let n = gens.iter().map(Polynomial::width).chain([p.width()]).max().unwrap_or(0);
    let d0 = gens.iter().map(Polynomial::degree).chain([p.degree()]).max().unwrap_or(0);
    for d in d0..=d0 + WITNESS_EXTRA_DEGREE {
        let degs: Vec<Option<u32>> = gens
            .iter()
            .map(|g| if g.is_zero() { None } else { d.checked_sub(g.degree()) })
            .collect();
        let unknowns: usize = degs.iter().flatten().map(|&k| count_monomials(n, k)).sum();
        if unknowns > WITNESS_MAX_UNKNOWNS {
            break;
        }
        if let Some(w) = combination(p, gens, &degs, n) {
            return Some(w);
        }
    }
    None
}

/// Smallest `N ≥ 1` with `L^N p = Σ_{i<N} g_i L^i p`, and the `g_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankResult {
    pub rank: usize,
    pub cofactors: Vec<Polynomial>,
}

impl RankResult {
    /// `L^N p - Σ g_i L^i p` is zero.
    pub fn recombines(&self, p: &Polynomial, sys: &OdeSystem) -> bool {
        if self.rank == 0 || self.cofactors.len() != self.rank {
            return false;
        }
        let chain = sys.lie_chain(p, self.rank + 1);
        let combo = self
            .cofactors
            .iter()
            .zip(&chain)
            .fold(Polynomial::zero(), |acc, (g, l)| &acc + &(g * l));
        combo == chain[self.rank]
    }

    /// No `i < N` has `L^i p ∈ ⟨p, …, L^{i-1} p⟩` (for `i ≥ 1`).
    pub fn is_minimal(&self, p: &Polynomial, sys: &OdeSystem) -> Result<bool, IdealError> {
        if p.is_zero() {
            return Ok(self.rank == 1);
        }
        let chain = sys.lie_chain(p, self.rank);
        let opts = GroebnerOptions {
            track: false,
            ..GroebnerOptions::default()
        };
        let mut gb = GroebnerBasis::compute(&chain[..1], opts)?;
        for i in 1..self.rank {
            if gb.contains(&chain[i]) {
                return Ok(false);
            }
            gb = gb.extend(&chain[i..=i])?;
        }
        Ok(true)
    }
}

/// Computes the rank by successive membership checks, up to `cap`.
pub fn rank(p: &Polynomial, sys: &OdeSystem, cap: usize) -> Result<RankResult, IdealError> {
    rank_with(p, sys, cap, DEFAULT_STEP_BUDGET)
}

pub fn rank_with(p: &Polynomial, sys: &OdeSystem, cap: usize, budget: usize) -> Result<RankResult, IdealError> {
    if p.is_zero() {
        return Ok(RankResult {
            rank: 1,
            cofactors: vec![Polynomial::zero()],
        });
    }
    let opts = GroebnerOptions {
        track: false,
        step_budget: budget,
        ..GroebnerOptions::default()
    };
    let mut chain = vec![p.clone()];
    let mut gb = GroebnerBasis::compute(&chain, opts)?;
    loop {
        let next = sys.lie_derivative(chain.last().expect("nonempty"));
        if gb.contains(&next) {
            let w = known_member_witness(&next, &chain, budget)?;
            return Ok(RankResult {
                rank: chain.len(),
                cofactors: w.cofactors,
            });
        }
        if chain.len() >= cap {
            chain.push(next);
            return Err(IdealError::RankCap { cap, chain });
        }
        gb = gb.extend(std::slice::from_ref(&next))?;
        chain.push(next);
    }
}

/// `[p, Lp, …, L^{N-1} p]`; their simultaneous vanishing is `ε(p)`.
pub fn differential_radical(p: &Polynomial, sys: &OdeSystem, cap: usize) -> Result<Vec<Polynomial>, IdealError> {
    let r = rank(p, sys, cap)?;
    Ok(sys.lie_chain(p, r.rank))
}
