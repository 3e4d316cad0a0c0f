//! One function per subcommand, each producing a `Report`.

use std::fs;
use std::path::Path;

use odeinv_core::hp::{HpError, NodeKind, ReductionTrace};
use odeinv_core::ideals::{rank, IdealError, RankResult};
use odeinv_core::invariant::{
    certificate_from_json, check_algebraic_invariance, check_certificate_with, check_semialgebraic_invariance,
    default_degree_bound, emit_smtlib, find_darboux_cofactor, find_vectorial_darboux, hp_certificate, sai_conditions,
    certificate_to_json, Certificate, DarbouxRel, DischargeConfig, SideCondition,
};
use odeinv_core::semialg::{algebraic_combine, to_normal_form, Progress};
use odeinv_core::{Formula, Polynomial, Rel, VarTable};
use serde_json::{json, Value};

use crate::problem::Problem;
use crate::report::{poly, polys, verdict_json, Outcome, Report};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProgressKind {
    Gt,
    Geq,
    Semialg,
}

fn ideal_err(e: IdealError) -> CliError {
    CliError::Resource(e.to_string())
}

fn rank_json(r: &RankResult, chain: &[Polynomial], t: &VarTable) -> Value {
    json!({
        "rank": r.rank,
        "cofactors": polys(&r.cofactors, t),
        "chain": polys(chain, t),
    })
}

pub fn lie(pb: &Problem, order: usize, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let p = pb.polynomial()?;
    let chain = sys.lie_chain(&p, order + 1);
    report.set("derivatives", polys(&chain, &pb.vars));
    Ok(())
}

pub fn rank_cmd(pb: &Problem, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let p = pb.polynomial()?;
    let r = rank(&p, &sys, config.rank_cap).map_err(ideal_err)?;
    let chain = sys.lie_chain(&p, r.rank + 1);
    report.set("rank", rank_json(&r, &chain, &pb.vars));
    Ok(())
}

pub fn radical(pb: &Problem, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let p = pb.polynomial()?;
    let f = Progress::with_cap(&sys, config.rank_cap).radical(&p).map_err(ideal_err)?;
    report.set("formula", json!(f.display(&pb.vars).to_string()));
    Ok(())
}

pub fn progress(pb: &Problem, kind: ProgressKind, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let rev = sys.reverse();
    let mut fwd = Progress::with_cap(&sys, config.rank_cap);
    let mut bwd = Progress::with_cap(&rev, config.rank_cap);
    let (forward, backward): (Formula, Formula) = match kind {
        ProgressKind::Gt | ProgressKind::Geq => {
            let p = pb.polynomial()?;
            let run = |pr: &mut Progress| if kind == ProgressKind::Gt { pr.gt(&p) } else { pr.geq(&p) };
            (run(&mut fwd).map_err(ideal_err)?, run(&mut bwd).map_err(ideal_err)?)
        }
        ProgressKind::Semialg => {
            let cands = pb.candidates()?;
            let [(_, nf)] = cands.as_slice() else {
                return Err(CliError::Input("semialgebraic progress takes exactly one candidate".into()));
            };
            (fwd.semialg(nf).map_err(ideal_err)?, bwd.semialg(nf).map_err(ideal_err)?)
        }
    };
    report.set("forward", json!(forward.display(&pb.vars).to_string()));
    report.set("backward", json!(backward.display(&pb.vars).to_string()));
    Ok(())
}

pub fn check_alg(pb: &Problem, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let p = pb.polynomial()?;
    let domain = pb.domain_disequation()?;
    let v = check_algebraic_invariance(&p, &sys, domain.as_ref(), config);
    report.fields.extend(verdict_json(&v, &pb.vars));
    report.outcome = Outcome::of(&v);
    Ok(())
}

pub fn check_inv(pb: &Problem, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let q = pb.domain()?;
    let mut results = Vec::new();
    let mut outcomes = Vec::new();
    for (src, p) in pb.candidates()? {
        let v = check_semialgebraic_invariance(&p, &q, &sys, config);
        log::info!("{src}: {}", v.label());
        let mut m = verdict_json(&v, &pb.vars);
        m.insert("candidate".into(), json!(src));
        results.push(Value::Object(m));
        outcomes.push(Outcome::of(&v));
    }
    report.set("results", Value::Array(results));
    report.outcome = Outcome::worst(outcomes);
    Ok(())
}

pub fn darboux(pb: &Problem, report: &mut Report) -> Result<(), CliError> {
    let sys = pb.ode()?;
    let ps = if pb.file.polynomials.is_empty() {
        vec![pb.polynomial()?]
    } else {
        pb.polynomials()?
    };
    let bound = pb.file.options.degree_bound.unwrap_or_else(|| {
        ps.iter().map(|p| default_degree_bound(p, &sys)).max().unwrap_or(0)
    });
    report.set("degree_bound", json!(bound));
    let cert = if let [p] = ps.as_slice() {
        find_darboux_cofactor(p, &sys, bound).map(|g| Certificate::Darboux {
            sys: sys.clone(),
            p: p.clone(),
            g,
            rel: DarbouxRel::Eq,
        })
    } else {
        find_vectorial_darboux(&ps, &sys, bound).map(|g| Certificate::VectorialDarboux {
            sys: sys.clone(),
            ps: ps.clone(),
            g,
        })
    };
    match cert {
        Some(c) => report.set("certificate", certificate_to_json(&c)),
        None => {
            report.set("certificate", Value::Null);
            report.outcome = Outcome::Unknown;
        }
    }
    Ok(())
}

fn node_label(k: NodeKind) -> &'static str {
    match k {
        NodeKind::Assign => "assign",
        NodeKind::Test => "test",
        NodeKind::Ode => "ode",
        NodeKind::Choice => "choice",
        NodeKind::Seq => "seq",
        NodeKind::Star => "star",
    }
}

fn trace_json(tr: &ReductionTrace, t: &VarTable) -> Value {
    json!({
        "node": node_label(tr.node),
        "post": poly(&tr.post, t),
        "result": poly(&tr.result, t),
        "rank": tr.rank.as_ref().map(|r| json!({"rank": r.rank, "cofactors": polys(&r.cofactors, t)})),
        "chain": tr.chain.as_ref().map(|c| json!({"qs": polys(&c.qs, t), "witness": polys(&c.witness, t)})),
        "children": tr.children.iter().map(|c| trace_json(c, t)).collect::<Vec<_>>(),
    })
}

pub fn hp_reduce(pb: &Problem, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let program = pb.program()?;
    let post = to_normal_form(&pb.post()?).map_err(|e| CliError::Input(format!("`post`: {e}")))?;
    let p = algebraic_combine(&post).map_err(|e| CliError::Input(format!("`post`: {e}")))?;
    let hp_err = |e: HpError| match e {
        HpError::Unsupported(m) => CliError::Input(m.to_string()),
        e => CliError::Resource(e.to_string()),
    };
    let (result, trace) = odeinv_core::reduce_box(&program, &p, config.rank_cap).map_err(hp_err)?;
    let cert = hp_certificate(&pb.vars, &program, &p, config.rank_cap).map_err(hp_err)?;
    report.set("post", poly(&p, &pb.vars));
    report.set("result", poly(&result, &pb.vars));
    report.set("trace", trace_json(&trace, &pb.vars));
    report.set("certificate", certificate_to_json(&cert));
    Ok(())
}

/// Side conditions of the problem, undischarged: the SAI conditions of
/// each candidate, or the DRI premise of `polynomial`.
fn pending_conditions(pb: &Problem, config: &DischargeConfig) -> Result<Vec<SideCondition>, CliError> {
    let sys = pb.ode()?;
    if !pb.file.candidates.is_empty() {
        let q = pb.domain()?;
        let mut out = Vec::new();
        for (_, p) in pb.candidates()? {
            let (_, _, conds) = sai_conditions(&p, &q, &sys, config.rank_cap).map_err(ideal_err)?;
            out.extend(conds.into_iter().filter(|c| !c.status.is_proved()));
        }
        return Ok(out);
    }
    let p = pb.polynomial()?;
    let r = rank(&p, &sys, config.rank_cap).map_err(ideal_err)?;
    let chain = sys.lie_chain(&p, r.rank);
    let mut hyp = vec![Formula::atom(p, Rel::Eq)];
    if let Some(d) = pb.domain_disequation()? {
        hyp.push(Formula::atom(d, Rel::Ne));
    }
    let concl = Formula::and(chain.into_iter().map(|l| Formula::atom(l, Rel::Eq)).collect());
    Ok(vec![SideCondition::new(sys.table(), Formula::and(hyp), concl, "dri")])
}

pub fn emit_smt(pb: &Problem, out_dir: Option<&Path>, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let conds = pending_conditions(pb, config)?;
    let mut queries = Vec::new();
    for (i, c) in conds.iter().enumerate() {
        let text = emit_smtlib(c);
        let name = format!("{i:02}-{}.smt2", c.provenance);
        let mut entry = json!({"name": name, "provenance": c.provenance});
        match out_dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                let path = dir.join(&name);
                fs::write(&path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            None => entry["query"] = json!(text),
        }
        queries.push(entry);
    }
    report.set("queries", Value::Array(queries));
    Ok(())
}

/// Accepts either a bare certificate or a report carrying one.
pub fn cert_check(text: &str, config: &DischargeConfig, report: &mut Report) -> Result<(), CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Input(format!("certificate JSON: {e}")))?;
    let v = match v.get("certificate") {
        Some(c) if v.get("kind").is_none() => c.clone(),
        _ => v,
    };
    let cert = certificate_from_json(&v).map_err(|e| CliError::Input(e.to_string()))?;
    let ok = check_certificate_with(&cert, config);
    report.set("kind", json!(cert.kind()));
    report.set("accepted", json!(ok));
    if !ok {
        report.outcome = Outcome::Refuted;
    }
    Ok(())
}
