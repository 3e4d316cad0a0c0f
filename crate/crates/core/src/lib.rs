//! Exact symbolic checking of invariants for polynomial ODEs and for an
//! algebraic fragment of hybrid programs.

pub mod hp;
pub mod ideals;
pub mod invariant;
mod linalg;
pub mod ode;
pub mod poly;
pub mod semialg;
pub mod syntax;

pub use hp::{oracle_unroll, reduce_box, HybridProgram, LoopChain, ReductionTrace};
pub use ideals::{
    differential_radical, groebner, member_with_witness, rank, GroebnerBasis, IdealError, MembershipWitness, RankResult,
};
pub use invariant::{
    check_algebraic_invariance, check_certificate, check_semialgebraic_invariance, hp_certificate, Certificate, DischargeConfig,
    SideCondition, Status, Verdict,
};
pub use ode::{liouville_check, GhostSpec, OdeError, OdeSystem};
pub use poly::{MonomialOrder, PolyMatrix, Polynomial, Rational, VarId, VarTable};
pub use semialg::{Formula, NormalForm, Rel};
pub use syntax::ParseError;
