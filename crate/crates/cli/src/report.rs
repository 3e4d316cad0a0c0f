//! JSON reports and the exit-code contract.

use std::process::ExitCode;

use odeinv_core::invariant::{certificate_to_json, condition_to_json};
use odeinv_core::{Polynomial, Rational, Verdict, VarTable};
use serde_json::{json, Map, Value};

pub const REPORT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Success = 0,
    Refuted = 1,
    Unknown = 2,
    InputError = 3,
    ResourceError = 4,
}

impl Outcome {
    pub fn of(v: &Verdict) -> Self {
        match v {
            Verdict::Invariant(_) => Outcome::Success,
            Verdict::NotInvariant { .. } => Outcome::Refuted,
            Verdict::Unknown { resource: true, .. } => Outcome::ResourceError,
            Verdict::Unknown { .. } => Outcome::Unknown,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Refuted => "refuted",
            Outcome::Unknown => "unknown",
            Outcome::InputError => "input-error",
            Outcome::ResourceError => "resource-error",
        }
    }

    /// Combines per-candidate outcomes: any refutation wins, then any
    /// unknown.
    pub fn worst(items: impl IntoIterator<Item = Outcome>) -> Outcome {
        let mut out = Outcome::Success;
        for o in items {
            out = match (out, o) {
                (Outcome::Refuted, _) | (_, Outcome::Refuted) => Outcome::Refuted,
                (a, b) => a.max(b),
            };
        }
        out
    }
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(o as u8)
    }
}

/// Top-level report: `version`, `command`, `seed`, `outcome`, plus
/// command-specific fields. Keys serialize sorted.
#[derive(Debug, Clone)]
pub struct Report {
    pub fields: Map<String, Value>,
    pub outcome: Outcome,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut fields = Map::new();
        fields.insert("version".into(), json!(REPORT_VERSION));
        fields.insert("command".into(), json!(command));
        fields.insert("seed".into(), json!(seed));
        Self {
            fields,
            outcome: Outcome::Success,
        }
    }

    pub fn set(&mut self, key: &str, v: Value) {
        self.fields.insert(key.into(), v);
    }

    pub fn to_json(&self) -> Value {
        let mut m = self.fields.clone();
        m.insert("outcome".into(), json!(self.outcome.label()));
        m.insert("exit_code".into(), json!(self.outcome as u8));
        Value::Object(m)
    }
}

pub fn poly(p: &Polynomial, t: &VarTable) -> Value {
    Value::String(p.display(t).to_string())
}

pub fn polys(ps: &[Polynomial], t: &VarTable) -> Value {
    Value::Array(ps.iter().map(|p| poly(p, t)).collect())
}

pub fn point(x: &[Rational], t: &VarTable) -> Value {
    let m: Map<String, Value> = t
        .names()
        .iter()
        .zip(x)
        .map(|(n, v)| (n.clone(), Value::String(v.to_string())))
        .collect();
    Value::Object(m)
}

/// `verdict`, `certificate`, `conditions`, `witness` and `diagnostic` for one
/// verdict.
pub fn verdict_json(v: &Verdict, t: &VarTable) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("verdict".into(), json!(v.label()));
    let (cert, conds, witness, diag) = match v {
        Verdict::Invariant(c) => (certificate_to_json(c), certificate_conditions(c), Value::Null, Value::Null),
        Verdict::NotInvariant { witness, violated } => (
            Value::Null,
            vec![condition_to_json(violated)],
            point(witness, t),
            Value::Null,
        ),
        Verdict::Unknown {
            pending, diagnostic, ..
        } => (
            Value::Null,
            pending.iter().map(condition_to_json).collect(),
            Value::Null,
            diagnostic.as_ref().map_or(Value::Null, |d| json!(d)),
        ),
    };
    m.insert("certificate".into(), cert);
    m.insert("conditions".into(), Value::Array(conds));
    m.insert("witness".into(), witness);
    m.insert("diagnostic".into(), diag);
    m
}

fn certificate_conditions(c: &odeinv_core::Certificate) -> Vec<Value> {
    use odeinv_core::Certificate as C;
    match c {
        C::Dri { condition: Some(c), .. } => vec![condition_to_json(c)],
        C::Sai { conditions, .. } => conditions.iter().map(condition_to_json).collect(),
        _ => Vec::new(),
    }
}
