//! Invariance deciders, side-condition discharge and certificates.

mod darboux;
mod discharge;
mod json;
mod sample;
mod smt;

use std::fmt;

use crate::hp::{reduce_box, HpError, HybridProgram, LoopChain};
use crate::ideals::{IdealError, RankResult};
use crate::ode::OdeSystem;
use crate::poly::{PolyMatrix, Polynomial, Rational, VarId, VarTable};
use crate::semialg::{negate_normal_form, Formula, NormalForm, Progress, Rel};

pub use darboux::{default_degree_bound, dri_companion, find_darboux_cofactor, find_vectorial_darboux};
pub use discharge::{discharge, DischargeConfig};
pub use json::{certificate_from_json, certificate_to_json, condition_to_json, CertError, CERT_VERSION};
pub use smt::{emit_smtlib, SolverAnswer};

/// How a side condition was settled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    ProvedIdentity,
    ProvedByIdealReduction,
    SmtValid,
    /// A point where the hypothesis holds and the conclusion fails.
    Refuted(Vec<Rational>),
    Unknown,
}

impl Status {
    pub fn is_proved(&self) -> bool {
        matches!(self, Status::ProvedIdentity | Status::ProvedByIdealReduction | Status::SmtValid)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::ProvedIdentity => "proved-identity",
            Status::ProvedByIdealReduction => "proved-by-ideal-reduction",
            Status::SmtValid => "smt-valid",
            Status::Refuted(_) => "refuted",
            Status::Unknown => "unknown",
        }
    }
}

/// `∀ vars. hypothesis → conclusion`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideCondition {
    pub vars: VarTable,
    pub hypothesis: Formula,
    pub conclusion: Formula,
    pub universal_vars: Vec<VarId>,
    pub status: Status,
    pub provenance: String,
    /// Why the status is `Unknown`, when known.
    pub note: Option<String>,
}

impl SideCondition {
    pub fn new(vars: &VarTable, hypothesis: Formula, conclusion: Formula, provenance: impl Into<String>) -> Self {
        Self {
            universal_vars: (0..vars.len()).collect(),
            vars: vars.clone(),
            hypothesis,
            conclusion,
            status: Status::Unknown,
            provenance: provenance.into(),
            note: None,
        }
    }

    /// The condition as one formula, `hypothesis -> conclusion`.
    pub fn formula(&self) -> Formula {
        Formula::implies(self.hypothesis.clone(), self.conclusion.clone())
    }

    /// Exact check that `point` refutes the condition.
    pub fn refuted_by(&self, point: &[Rational]) -> bool {
        point.len() >= self.vars.len() && self.hypothesis.eval(point) == Some(true) && self.conclusion.eval(point) == Some(false)
    }

    fn same_statement(&self, other: &SideCondition) -> bool {
        self.hypothesis == other.hypothesis && self.conclusion == other.conclusion && self.provenance == other.provenance
    }
}

impl fmt::Display for SideCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} -> {} : {}",
            self.provenance,
            self.hypothesis.display(&self.vars),
            self.conclusion.display(&self.vars),
            self.status.label()
        )
    }
}

/// Relation of a Darboux certificate: `p ~ 0` is invariant since `Lp = g p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DarbouxRel {
    Eq,
    Ge,
    Gt,
}

impl DarbouxRel {
    pub fn symbol(self) -> &'static str {
        match self {
            DarbouxRel::Eq => "=",
            DarbouxRel::Ge => ">=",
            DarbouxRel::Gt => ">",
        }
    }
}

/// Re-checkable evidence for an invariance verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    Darboux {
        sys: OdeSystem,
        p: Polynomial,
        g: Polynomial,
        rel: DarbouxRel,
    },
    VectorialDarboux {
        sys: OdeSystem,
        ps: Vec<Polynomial>,
        g: PolyMatrix,
    },
    Dri {
        sys: OdeSystem,
        p: Polynomial,
        domain: Option<Polynomial>,
        rank: RankResult,
        /// `h_i` with `L^i p = h_i p` for `i < N`, when the premise holds
        /// by ideal membership.
        witnesses: Option<Vec<Polynomial>>,
        /// The premise `p = 0 ∧ Q → ε(p)` otherwise.
        condition: Option<SideCondition>,
    },
    Sai {
        sys: OdeSystem,
        p: NormalForm,
        q: NormalForm,
        forward: Formula,
        backward: Formula,
        conditions: Vec<SideCondition>,
    },
    HpReduction {
        vars: VarTable,
        program: HybridProgram,
        post: Polynomial,
        result: Polynomial,
        chains: Vec<LoopChain>,
    },
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::Darboux { .. } => "darboux",
            Certificate::VectorialDarboux { .. } => "vdbx",
            Certificate::Dri { .. } => "dri",
            Certificate::Sai { .. } => "sai",
            Certificate::HpReduction { .. } => "hp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Invariant(Box<Certificate>),
    NotInvariant {
        witness: Vec<Rational>,
        violated: Box<SideCondition>,
    },
    Unknown {
        pending: Vec<SideCondition>,
        diagnostic: Option<String>,
        /// A rank cap or step budget was hit before any condition was built.
        resource: bool,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Invariant(_) => "invariant",
            Verdict::NotInvariant { .. } => "not-invariant",
            Verdict::Unknown { .. } => "unknown",
        }
    }

    fn resource(e: IdealError) -> Self {
        Verdict::Unknown {
            pending: Vec::new(),
            diagnostic: Some(e.to_string()),
            resource: true,
        }
    }
}

fn eps_formula(chain: &[Polynomial]) -> Formula {
    Formula::and(chain.iter().map(|q| Formula::atom(q.clone(), Rel::Eq)).collect())
}

fn dri_hypothesis(p: &Polynomial, domain: Option<&Polynomial>) -> Formula {
    let mut parts = vec![Formula::atom(p.clone(), Rel::Eq)];
    if let Some(r) = domain {
        parts.push(Formula::atom(r.clone(), Rel::Ne));
    }
    Formula::and(parts)
}

// `L^i p = h_i p` for every `i < chain.len()`.
fn principal_witnesses(p: &Polynomial, chain: &[Polynomial]) -> Option<Vec<Polynomial>> {
    if p.is_zero() {
        return chain.iter().all(Polynomial::is_zero).then(|| vec![Polynomial::zero(); chain.len()]);
    }
    chain.iter().map(|l| l.div_exact(p).ok()).collect()
}

/// Decides `p = 0 → [x' = f & r ≠ 0] p = 0` (domain `true` when `None`).
pub fn check_algebraic_invariance(
    p: &Polynomial,
    sys: &OdeSystem,
    domain: Option<&Polynomial>,
    config: &DischargeConfig,
) -> Verdict {
    let rank = match crate::ideals::rank(p, sys, config.rank_cap) {
        Ok(r) => r,
        Err(e) => return Verdict::resource(e),
    };
    let chain = sys.lie_chain(p, rank.rank);
    let cert = |witnesses, condition| Certificate::Dri {
        sys: sys.clone(),
        p: p.clone(),
        domain: domain.cloned(),
        rank: rank.clone(),
        witnesses,
        condition,
    };
    if let Some(ws) = principal_witnesses(p, &chain) {
        return issue(cert(Some(ws), None), config);
    }
    let cond = SideCondition::new(sys.table(), dri_hypothesis(p, domain), eps_formula(&chain), "dri");
    let cond = discharge(cond, config);
    match &cond.status {
        s if s.is_proved() => issue(cert(None, Some(cond)), config),
        Status::Refuted(w) => Verdict::NotInvariant {
            witness: w.clone(),
            violated: Box::new(cond),
        },
        _ => Verdict::Unknown {
            pending: vec![cond],
            diagnostic: None,
            resource: false,
        },
    }
}

fn issue(cert: Certificate, config: &DischargeConfig) -> Verdict {
    if check_certificate_with(&cert, config) {
        Verdict::Invariant(Box::new(cert))
    } else {
        log::error!("internally produced {} certificate failed re-checking", cert.kind());
        Verdict::Unknown {
            pending: Vec::new(),
            diagnostic: Some("certificate failed re-checking".into()),
            resource: false,
        }
    }
}

/// The forward and backward progress formulas and the two side conditions
/// for `P` under domain `Q`.
pub fn sai_conditions(
    p: &NormalForm,
    q: &NormalForm,
    sys: &OdeSystem,
    cap: usize,
) -> Result<(Formula, Formula, Vec<SideCondition>), IdealError> {
    let reversed = sys.reverse();
    let mut fwd = Progress::with_cap(sys, cap);
    let mut bwd = Progress::with_cap(&reversed, cap);
    let not_p = negate_normal_form(p);
    let forward = fwd.semialg(p)?;
    let backward = bwd.semialg(&not_p)?;
    let conj = |parts: Vec<Formula>| Formula::and(parts.into_iter().filter(|f| *f != Formula::True).collect());
    let fwd_hyp = conj(vec![p.to_formula(), q.to_formula(), fwd.semialg(q)?]);
    let bwd_hyp = conj(vec![not_p.to_formula(), q.to_formula(), bwd.semialg(q)?]);
    let mut f = SideCondition::new(sys.table(), fwd_hyp, forward.clone(), "sai-forward");
    let mut b = SideCondition::new(sys.table(), bwd_hyp, backward.clone(), "sai-backward");
    if p.is_open() {
        f.status = Status::ProvedIdentity;
    }
    if p.is_closed() {
        b.status = Status::ProvedIdentity;
    }
    Ok((forward, backward, vec![f, b]))
}

/// Decides whether `P` is invariant for `x' = f & Q`.
pub fn check_semialgebraic_invariance(
    p: &NormalForm,
    q: &NormalForm,
    sys: &OdeSystem,
    config: &DischargeConfig,
) -> Verdict {
    let (forward, backward, conds) = match sai_conditions(p, q, sys, config.rank_cap) {
        Ok(x) => x,
        Err(e) => return Verdict::resource(e),
    };
    let mut done = Vec::with_capacity(conds.len());
    let mut refuted = None;
    for c in conds {
        let c = if c.status.is_proved() || refuted.is_some() {
            c
        } else {
            discharge(c, config)
        };
        if let Status::Refuted(_) = c.status {
            refuted.get_or_insert(done.len());
        }
        done.push(c);
    }
    if let Some(k) = refuted {
        let violated = done.swap_remove(k);
        let Status::Refuted(w) = &violated.status else { unreachable!() };
        return Verdict::NotInvariant {
            witness: w.clone(),
            violated: Box::new(violated),
        };
    }
    if done.iter().all(|c| c.status.is_proved()) {
        return issue(
            Certificate::Sai {
                sys: sys.clone(),
                p: p.clone(),
                q: q.clone(),
                forward,
                backward,
                conditions: done,
            },
            config,
        );
    }
    Verdict::Unknown {
        pending: done.into_iter().filter(|c| !c.status.is_proved()).collect(),
        diagnostic: None,
        resource: false,
    }
}

/// Runs the box reduction and packages its result and loop chains.
pub fn hp_certificate(vars: &VarTable, program: &HybridProgram, post: &Polynomial, cap: usize) -> Result<Certificate, HpError> {
    let (result, trace) = reduce_box(program, post, cap)?;
    Ok(Certificate::HpReduction {
        vars: vars.clone(),
        program: program.clone(),
        post: post.clone(),
        result,
        chains: trace.chains().into_iter().cloned().collect(),
    })
}

/// Re-verifies a certificate with the default configuration.
pub fn check_certificate(cert: &Certificate) -> bool {
    check_certificate_with(cert, &DischargeConfig::default())
}

/// Re-verifies every identity a certificate asserts. Side conditions are
/// re-discharged without the sampling tier, which can only refute.
pub fn check_certificate_with(cert: &Certificate, config: &DischargeConfig) -> bool {
    let recheck = DischargeConfig {
        samples: 0,
        ..config.clone()
    };
    match cert {
        Certificate::Darboux { sys, p, g, .. } => (&sys.lie_derivative(p) - &(g * p)).is_zero(),
        Certificate::VectorialDarboux { sys, ps, g } => {
            if g.rows() != ps.len() || g.cols() != ps.len() || ps.is_empty() {
                return false;
            }
            match g.apply(ps) {
                Ok(gp) => ps.iter().zip(&gp).all(|(p, r)| sys.lie_derivative(p) == *r),
                Err(_) => false,
            }
        }
        Certificate::Dri {
            sys,
            p,
            domain,
            rank,
            witnesses,
            condition,
        } => {
            if !rank.recombines(p, sys) || !matches!(rank.is_minimal(p, sys), Ok(true)) {
                return false;
            }
            let chain = sys.lie_chain(p, rank.rank);
            match (witnesses, condition) {
                (Some(ws), None) => ws.len() == chain.len() && ws.iter().zip(&chain).all(|(h, l)| &(h * p) == l),
                (None, Some(c)) => {
                    let fresh = SideCondition::new(sys.table(), dri_hypothesis(p, domain.as_ref()), eps_formula(&chain), "dri");
                    fresh.same_statement(c) && discharge(fresh, &recheck).status.is_proved()
                }
                _ => false,
            }
        }
        Certificate::Sai {
            sys,
            p,
            q,
            forward,
            backward,
            conditions,
        } => {
            let Ok((f, b, fresh)) = sai_conditions(p, q, sys, config.rank_cap) else {
                return false;
            };
            if &f != forward || &b != backward || fresh.len() != conditions.len() {
                return false;
            }
            fresh.into_iter().zip(conditions).all(|(c, given)| {
                c.same_statement(given) && given.status.is_proved() && (c.status.is_proved() || discharge(c, &recheck).status.is_proved())
            })
        }
        Certificate::HpReduction {
            program,
            post,
            result,
            chains,
            ..
        } => match reduce_box(program, post, config.rank_cap) {
            Ok((q, trace)) => {
                let fresh = trace.chains();
                &q == result
                    && fresh.len() == chains.len()
                    && fresh.iter().zip(chains).all(|(a, b)| a.qs == b.qs && b.recombines())
            }
            Err(_) => false,
        },
    }
}

#[cfg(test)]
mod tests;
