//! Hybrid programs with algebraic postconditions: computing `q` with
//! `[α] p = 0  ⟺  q = 0`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::ideals::{member_with_witness, rank, GroebnerBasis, GroebnerOptions, IdealError, RankResult};
use crate::ode::OdeSystem;
use crate::poly::{Polynomial, Rational, VarId, VarTable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HybridProgram {
    /// `x := e`
    Assign(VarId, Polynomial),
    /// `?r != 0`
    Test(Polynomial),
    /// `{x' = f & r != 0}`; no domain means `true`.
    Ode(OdeSystem, Option<Polynomial>),
    Choice(Box<HybridProgram>, Box<HybridProgram>),
    Seq(Box<HybridProgram>, Box<HybridProgram>),
    Star(Box<HybridProgram>),
}

impl HybridProgram {
    pub fn choice(a: HybridProgram, b: HybridProgram) -> Self {
        HybridProgram::Choice(Box::new(a), Box::new(b))
    }

    pub fn seq(a: HybridProgram, b: HybridProgram) -> Self {
        HybridProgram::Seq(Box::new(a), Box::new(b))
    }

    pub fn star(a: HybridProgram) -> Self {
        HybridProgram::Star(Box::new(a))
    }

    pub fn is_discrete(&self) -> bool {
        match self {
            HybridProgram::Assign(..) | HybridProgram::Test(_) => true,
            HybridProgram::Ode(..) => false,
            HybridProgram::Choice(a, b) | HybridProgram::Seq(a, b) => a.is_discrete() && b.is_discrete(),
            HybridProgram::Star(a) => a.is_discrete(),
        }
    }

    /// Text in the program syntax accepted by the parser.
    pub fn text(&self, vars: &VarTable) -> String {
        match self {
            HybridProgram::Assign(x, e) => format!("{} := {}", vars.name(*x), e.display(vars)),
            HybridProgram::Test(r) => format!("?{} != 0", r.display(vars)),
            HybridProgram::Ode(sys, r) => {
                let eqs = crate::syntax::ode_text(sys);
                match r {
                    Some(r) => format!("{{ {eqs} & {} != 0 }}", r.display(vars)),
                    None => format!("{{ {eqs} }}"),
                }
            }
            HybridProgram::Choice(a, b) => {
                let rhs = match **b {
                    HybridProgram::Choice(..) => format!("{{ {} }}", b.text(vars)),
                    _ => b.text(vars),
                };
                format!("{} ++ {rhs}", a.text(vars))
            }
            HybridProgram::Seq(a, b) => {
                let wrap = |p: &HybridProgram, right: bool| match p {
                    HybridProgram::Choice(..) => format!("{{ {} }}", p.text(vars)),
                    HybridProgram::Seq(..) if right => format!("{{ {} }}", p.text(vars)),
                    _ => p.text(vars),
                };
                format!("{}; {}", wrap(a, false), wrap(b, true))
            }
            HybridProgram::Star(a) => format!("{{ {} }}*", a.text(vars)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Assign,
    Test,
    Ode,
    Choice,
    Seq,
    Star,
}

/// Loop chain `q_0, …, q_k` with `q_k = Σ_{i<k} g_i q_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopChain {
    pub qs: Vec<Polynomial>,
    pub witness: Vec<Polynomial>,
}

impl LoopChain {
    pub fn recombines(&self) -> bool {
        let Some((last, prefix)) = self.qs.split_last() else {
            return false;
        };
        self.witness.len() == prefix.len()
            && self
                .witness
                .iter()
                .zip(prefix)
                .fold(Polynomial::zero(), |acc, (g, q)| &acc + &(g * q))
                == *last
    }
}

/// One node of the reduction: postcondition in, polynomial out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionTrace {
    pub node: NodeKind,
    pub post: Polynomial,
    pub result: Polynomial,
    pub children: Vec<ReductionTrace>,
    pub rank: Option<RankResult>,
    pub chain: Option<LoopChain>,
}

impl ReductionTrace {
    fn leaf(node: NodeKind, post: &Polynomial, result: Polynomial) -> Self {
        Self {
            node,
            post: post.clone(),
            result,
            children: Vec::new(),
            rank: None,
            chain: None,
        }
    }

    /// Every loop chain in the trace recombines exactly.
    pub fn chains_recombine(&self) -> bool {
        self.chain.as_ref().is_none_or(LoopChain::recombines) && self.children.iter().all(Self::chains_recombine)
    }

    /// Depth-first list of loop chains.
    pub fn chains(&self) -> Vec<&LoopChain> {
        let mut out: Vec<&LoopChain> = self.chain.iter().collect();
        for c in &self.children {
            out.extend(c.chains());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HpError {
    #[error(transparent)]
    Rank(#[from] IdealError),
    #[error("loop chain did not stabilize within {cap} iterations")]
    LoopCap { cap: usize, partial: Box<ReductionTrace> },
    #[error("{0}")]
    Unsupported(&'static str),
}

/// Computes `q` with `[alpha] p = 0 ⟺ q = 0`. `cap` bounds ODE ranks
/// and loop chain lengths.
pub fn reduce_box(alpha: &HybridProgram, p: &Polynomial, cap: usize) -> Result<(Polynomial, ReductionTrace), HpError> {
    let trace = reduce(alpha, p, cap)?;
    Ok((trace.result.clone(), trace))
}

fn reduce(alpha: &HybridProgram, p: &Polynomial, cap: usize) -> Result<ReductionTrace, HpError> {
    Ok(match alpha {
        HybridProgram::Assign(x, e) => {
            let subst = BTreeMap::from([(*x, e.clone())]);
            ReductionTrace::leaf(NodeKind::Assign, p, p.substitute(&subst))
        }
        HybridProgram::Test(r) => ReductionTrace::leaf(NodeKind::Test, p, r * p),
        HybridProgram::Ode(sys, r) => {
            let rr = rank(p, sys, cap)?;
            let sum = sys
                .lie_chain(p, rr.rank)
                .iter()
                .fold(Polynomial::zero(), |acc, l| &acc + &l.pow(2));
            let result = match r {
                Some(r) => r * &sum,
                None => sum,
            };
            let mut t = ReductionTrace::leaf(NodeKind::Ode, p, result);
            t.rank = Some(rr);
            t
        }
        HybridProgram::Choice(a, b) => {
            let ta = reduce(a, p, cap)?;
            let tb = reduce(b, p, cap)?;
            let result = &ta.result.pow(2) + &tb.result.pow(2);
            let mut t = ReductionTrace::leaf(NodeKind::Choice, p, result);
            t.children = vec![ta, tb];
            t
        }
        HybridProgram::Seq(a, b) => {
            let tb = reduce(b, p, cap)?;
            let ta = reduce(a, &tb.result, cap)?;
            let mut t = ReductionTrace::leaf(NodeKind::Seq, p, ta.result.clone());
            t.children = vec![ta, tb];
            t
        }
        HybridProgram::Star(a) => reduce_loop(a, p, cap)?,
    })
}

fn reduce_loop(body: &HybridProgram, p: &Polynomial, cap: usize) -> Result<ReductionTrace, HpError> {
    let untracked = GroebnerOptions {
        track: false,
        ..GroebnerOptions::default()
    };
    let mut qs = vec![p.clone()];
    let mut steps = Vec::new();
    let mut gb = GroebnerBasis::compute(&qs, untracked)?;
    loop {
        let step = reduce(body, qs.last().expect("nonempty"), cap)?;
        let next = step.result.clone();
        steps.push(step);
        if gb.contains(&next) {
            let w = member_with_witness(&next, &qs)?.expect("membership already established");
            qs.push(next);
            let chain = LoopChain {
                qs,
                witness: w.cofactors,
            };
            let k = chain.witness.len();
            let result = chain.qs[..k].iter().fold(Polynomial::zero(), |acc, q| &acc + &q.pow(2));
            let mut t = ReductionTrace::leaf(NodeKind::Star, p, result);
            t.children = steps;
            t.chain = Some(chain);
            return Ok(t);
        }
        gb = gb.extend(std::slice::from_ref(&next))?;
        qs.push(next);
        if qs.len() > cap {
            let mut t = ReductionTrace::leaf(NodeKind::Star, p, Polynomial::zero());
            t.children = steps;
            t.chain = Some(LoopChain {
                qs,
                witness: Vec::new(),
            });
            return Err(HpError::LoopCap {
                cap,
                partial: Box::new(t),
            });
        }
    }
}

type State = Vec<Rational>;

/// Whether `p = 0` after every run of the discrete program `alpha` from
/// `state`, unrolling each loop at most `depth` times.
pub fn oracle_unroll(alpha: &HybridProgram, p: &Polynomial, depth: usize, state: &[Rational]) -> Result<bool, HpError> {
    if !alpha.is_discrete() {
        return Err(HpError::Unsupported("the unrolling oracle handles discrete programs only"));
    }
    let start = BTreeSet::from([state.to_vec()]);
    Ok(run(alpha, start, depth).iter().all(|s| p.eval(s).is_zero()))
}

fn run(alpha: &HybridProgram, states: BTreeSet<State>, depth: usize) -> BTreeSet<State> {
    match alpha {
        HybridProgram::Assign(x, e) => states
            .into_iter()
            .map(|mut s| {
                let v = e.eval(&s);
                if s.len() <= *x {
                    s.resize(x + 1, Rational::zero());
                }
                s[*x] = v;
                s
            })
            .collect(),
        HybridProgram::Test(r) => states.into_iter().filter(|s| !r.eval(s).is_zero()).collect(),
        HybridProgram::Choice(a, b) => {
            let mut out = run(a, states.clone(), depth);
            out.extend(run(b, states, depth));
            out
        }
        HybridProgram::Seq(a, b) => run(b, run(a, states, depth), depth),
        HybridProgram::Star(a) => {
            let mut reach = states.clone();
            let mut frontier = states;
            for _ in 0..depth {
                let next: BTreeSet<State> = run(a, frontier, depth).into_iter().filter(|s| !reach.contains(s)).collect();
                if next.is_empty() {
                    break;
                }
                reach.extend(next.iter().cloned());
                frontier = next;
            }
            reach
        }
        HybridProgram::Ode(..) => unreachable!("checked by is_discrete"),
    }
}
