//! Versioned JSON form of certificates. Polynomials and formulas are
//! stored as canonical text and re-parsed against the stored variables.

use serde_json::{json, Map, Value};

use super::{Certificate, DarbouxRel, SideCondition, Status};
use crate::hp::LoopChain;
use crate::ideals::RankResult;
use crate::ode::OdeSystem;
use crate::poly::{PolyMatrix, Polynomial, Rational, VarTable};
use crate::semialg::{Conjunct, Formula, NormalForm};
use crate::syntax::{ode_text, parse_formula, parse_ode, parse_polynomial, parse_program, ParseError};

pub const CERT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertError {
    #[error("malformed certificate: {0}")]
    Schema(String),
    #[error("certificate field `{field}`: {source}")]
    Parse { field: String, source: ParseError },
}

fn poly(p: &Polynomial, t: &VarTable) -> Value {
    Value::String(p.display(t).to_string())
}

fn polys(ps: &[Polynomial], t: &VarTable) -> Value {
    Value::Array(ps.iter().map(|p| poly(p, t)).collect())
}

fn formula(f: &Formula, t: &VarTable) -> Value {
    Value::String(f.display(t).to_string())
}

fn normal_form(nf: &NormalForm, t: &VarTable) -> Value {
    Value::Array(
        nf.disjuncts
            .iter()
            .map(|c| json!({"geqs": polys(&c.geqs, t), "gts": polys(&c.gts, t)}))
            .collect(),
    )
}

fn point(w: &[Rational]) -> Value {
    Value::Array(w.iter().map(|c| Value::String(c.to_string())).collect())
}

fn condition(c: &SideCondition) -> Value {
    let mut m = Map::new();
    m.insert("provenance".into(), json!(c.provenance));
    m.insert("hypothesis".into(), formula(&c.hypothesis, &c.vars));
    m.insert("conclusion".into(), formula(&c.conclusion, &c.vars));
    m.insert("status".into(), json!(c.status.label()));
    if let Status::Refuted(w) = &c.status {
        m.insert("witness".into(), point(w));
    }
    if let Some(n) = &c.note {
        m.insert("note".into(), json!(n));
    }
    Value::Object(m)
}

/// JSON view of a side condition, as used in reports.
pub fn condition_to_json(c: &SideCondition) -> Value {
    condition(c)
}

pub fn certificate_to_json(cert: &Certificate) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), json!(cert.kind()));
    m.insert("version".into(), json!(CERT_VERSION));
    let sys_fields = |m: &mut Map<String, Value>, sys: &OdeSystem| {
        m.insert("vars".into(), json!(sys.table().names()));
        m.insert("ode".into(), json!(ode_text(sys)));
    };
    match cert {
        Certificate::Darboux { sys, p, g, rel } => {
            sys_fields(&mut m, sys);
            let t = sys.table();
            m.insert("p".into(), poly(p, t));
            m.insert("g".into(), poly(g, t));
            m.insert("relation".into(), json!(rel.symbol()));
        }
        Certificate::VectorialDarboux { sys, ps, g } => {
            sys_fields(&mut m, sys);
            let t = sys.table();
            m.insert("ps".into(), polys(ps, t));
            let rows: Vec<Value> = (0..g.rows()).map(|i| polys(g.row(i), t)).collect();
            m.insert("matrix".into(), Value::Array(rows));
        }
        Certificate::Dri {
            sys,
            p,
            domain,
            rank,
            witnesses,
            condition: cond,
        } => {
            sys_fields(&mut m, sys);
            let t = sys.table();
            m.insert("p".into(), poly(p, t));
            m.insert("domain".into(), domain.as_ref().map_or(Value::Null, |r| poly(r, t)));
            m.insert("rank".into(), json!(rank.rank));
            m.insert("cofactors".into(), polys(&rank.cofactors, t));
            m.insert("witnesses".into(), witnesses.as_ref().map_or(Value::Null, |w| polys(w, t)));
            m.insert("condition".into(), cond.as_ref().map_or(Value::Null, condition));
        }
        Certificate::Sai {
            sys,
            p,
            q,
            forward,
            backward,
            conditions,
        } => {
            sys_fields(&mut m, sys);
            let t = sys.table();
            m.insert("P".into(), normal_form(p, t));
            m.insert("Q".into(), normal_form(q, t));
            m.insert("forward".into(), formula(forward, t));
            m.insert("backward".into(), formula(backward, t));
            m.insert("conditions".into(), Value::Array(conditions.iter().map(condition).collect()));
        }
        Certificate::HpReduction {
            vars,
            program,
            post,
            result,
            chains,
        } => {
            m.insert("vars".into(), json!(vars.names()));
            m.insert("program".into(), json!(program.text(vars)));
            m.insert("post".into(), poly(post, vars));
            m.insert("result".into(), poly(result, vars));
            let cs: Vec<Value> = chains
                .iter()
                .map(|c| json!({"qs": polys(&c.qs, vars), "witness": polys(&c.witness, vars)}))
                .collect();
            m.insert("chains".into(), Value::Array(cs));
        }
    }
    Value::Object(m)
}

struct Reader<'a> {
    obj: &'a Map<String, Value>,
    vars: VarTable,
}

fn schema(msg: impl Into<String>) -> CertError {
    CertError::Schema(msg.into())
}

impl<'a> Reader<'a> {
    fn field(&self, key: &str) -> Result<&'a Value, CertError> {
        self.obj.get(key).ok_or_else(|| schema(format!("missing `{key}`")))
    }

    fn string(&self, key: &str) -> Result<&'a str, CertError> {
        self.field(key)?.as_str().ok_or_else(|| schema(format!("`{key}` must be a string")))
    }

    fn poly_value(&self, v: &Value, key: &str) -> Result<Polynomial, CertError> {
        let s = v.as_str().ok_or_else(|| schema(format!("`{key}` must hold polynomial strings")))?;
        parse_polynomial(s, &self.vars).map_err(|source| CertError::Parse {
            field: key.into(),
            source,
        })
    }

    fn poly(&self, key: &str) -> Result<Polynomial, CertError> {
        self.poly_value(self.field(key)?, key)
    }

    fn poly_list_value(&self, v: &Value, key: &str) -> Result<Vec<Polynomial>, CertError> {
        v.as_array()
            .ok_or_else(|| schema(format!("`{key}` must be an array")))?
            .iter()
            .map(|p| self.poly_value(p, key))
            .collect()
    }

    fn polys(&self, key: &str) -> Result<Vec<Polynomial>, CertError> {
        self.poly_list_value(self.field(key)?, key)
    }

    fn formula_value(&self, v: &Value, key: &str) -> Result<Formula, CertError> {
        let s = v.as_str().ok_or_else(|| schema(format!("`{key}` must be a formula string")))?;
        parse_formula(s, &self.vars).map_err(|source| CertError::Parse {
            field: key.into(),
            source,
        })
    }

    fn sys(&self) -> Result<OdeSystem, CertError> {
        parse_ode(self.string("ode")?, &self.vars).map_err(|source| CertError::Parse {
            field: "ode".into(),
            source,
        })
    }

    fn normal_form(&self, key: &str) -> Result<NormalForm, CertError> {
        let arr = self.field(key)?.as_array().ok_or_else(|| schema(format!("`{key}` must be an array")))?;
        let mut disjuncts = Vec::with_capacity(arr.len());
        for d in arr {
            let get = |k: &str| d.get(k).ok_or_else(|| schema(format!("`{key}` disjunct lacks `{k}`")));
            disjuncts.push(Conjunct {
                geqs: self.poly_list_value(get("geqs")?, key)?,
                gts: self.poly_list_value(get("gts")?, key)?,
            });
        }
        Ok(NormalForm { disjuncts })
    }

    fn condition(&self, v: &Value) -> Result<SideCondition, CertError> {
        let get = |k: &str| v.get(k).ok_or_else(|| schema(format!("side condition lacks `{k}`")));
        let provenance = get("provenance")?.as_str().ok_or_else(|| schema("provenance must be a string"))?;
        let mut c = SideCondition::new(
            &self.vars,
            self.formula_value(get("hypothesis")?, "hypothesis")?,
            self.formula_value(get("conclusion")?, "conclusion")?,
            provenance,
        );
        c.status = match get("status")?.as_str() {
            Some("proved-identity") => Status::ProvedIdentity,
            Some("proved-by-ideal-reduction") => Status::ProvedByIdealReduction,
            Some("smt-valid") => Status::SmtValid,
            Some("unknown") => Status::Unknown,
            Some("refuted") => {
                let w = get("witness")?
                    .as_array()
                    .ok_or_else(|| schema("witness must be an array"))?
                    .iter()
                    .map(|x| x.as_str().and_then(|s| s.parse::<Rational>().ok()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| schema("witness entries must be rationals"))?;
                Status::Refuted(w)
            }
            _ => return Err(schema("unknown side-condition status")),
        };
        c.note = v.get("note").and_then(Value::as_str).map(str::to_string);
        Ok(c)
    }
}

pub fn certificate_from_json(v: &Value) -> Result<Certificate, CertError> {
    let obj = v.as_object().ok_or_else(|| schema("certificate must be an object"))?;
    match obj.get("version").and_then(Value::as_u64) {
        Some(CERT_VERSION) => {}
        Some(other) => return Err(schema(format!("unsupported version {other}"))),
        None => return Err(schema("missing `version`")),
    }
    let names: Vec<String> = obj
        .get("vars")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("missing `vars`"))?
        .iter()
        .map(|n| n.as_str().map(str::to_string))
        .collect::<Option<_>>()
        .ok_or_else(|| schema("`vars` must hold strings"))?;
    let vars = VarTable::from_names(names).map_err(schema)?;
    let r = Reader { obj, vars };
    let kind = r.string("kind")?;
    Ok(match kind {
        "darboux" => Certificate::Darboux {
            sys: r.sys()?,
            p: r.poly("p")?,
            g: r.poly("g")?,
            rel: match r.string("relation")? {
                "=" => DarbouxRel::Eq,
                ">=" => DarbouxRel::Ge,
                ">" => DarbouxRel::Gt,
                _ => return Err(schema("relation must be one of =, >=, >")),
            },
        },
        "vdbx" => {
            let rows = r
                .field("matrix")?
                .as_array()
                .ok_or_else(|| schema("`matrix` must be an array of rows"))?
                .iter()
                .map(|row| r.poly_list_value(row, "matrix"))
                .collect::<Result<Vec<_>, _>>()?;
            Certificate::VectorialDarboux {
                sys: r.sys()?,
                ps: r.polys("ps")?,
                g: PolyMatrix::from_rows(rows).map_err(|e| schema(e.to_string()))?,
            }
        }
        "dri" => {
            let rank = r
                .field("rank")?
                .as_u64()
                .ok_or_else(|| schema("`rank` must be a positive integer"))? as usize;
            let opt = |k: &str| r.field(k).map(|v| (!v.is_null()).then_some(v));
            Certificate::Dri {
                sys: r.sys()?,
                p: r.poly("p")?,
                domain: opt("domain")?.map(|v| r.poly_value(v, "domain")).transpose()?,
                rank: RankResult {
                    rank,
                    cofactors: r.polys("cofactors")?,
                },
                witnesses: opt("witnesses")?.map(|v| r.poly_list_value(v, "witnesses")).transpose()?,
                condition: opt("condition")?.map(|v| r.condition(v)).transpose()?,
            }
        }
        "sai" => Certificate::Sai {
            sys: r.sys()?,
            p: r.normal_form("P")?,
            q: r.normal_form("Q")?,
            forward: r.formula_value(r.field("forward")?, "forward")?,
            backward: r.formula_value(r.field("backward")?, "backward")?,
            conditions: r
                .field("conditions")?
                .as_array()
                .ok_or_else(|| schema("`conditions` must be an array"))?
                .iter()
                .map(|c| r.condition(c))
                .collect::<Result<_, _>>()?,
        },
        "hp" => {
            let program = parse_program(r.string("program")?, &r.vars).map_err(|source| CertError::Parse {
                field: "program".into(),
                source,
            })?;
            let chains = r
                .field("chains")?
                .as_array()
                .ok_or_else(|| schema("`chains` must be an array"))?
                .iter()
                .map(|c| {
                    let get = |k: &str| c.get(k).ok_or_else(|| schema(format!("chain lacks `{k}`")));
                    Ok(LoopChain {
                        qs: r.poly_list_value(get("qs")?, "qs")?,
                        witness: r.poly_list_value(get("witness")?, "witness")?,
                    })
                })
                .collect::<Result<_, CertError>>()?;
            Certificate::HpReduction {
                program,
                post: r.poly("post")?,
                result: r.poly("result")?,
                chains,
                vars: r.vars.clone(),
            }
        }
        other => return Err(schema(format!("unknown kind `{other}`"))),
    })
}
