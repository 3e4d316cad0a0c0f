//! SMT-LIB 2 queries and an external solver client.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};

use super::SideCondition;
use crate::poly::{Polynomial, Rational, VarTable};
use crate::semialg::{Formula, Rel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    /// Counterexample exists; the model, if it was rational.
    Sat(Option<Vec<Rational>>),
    Unsat,
    Unknown(String),
}

fn numeral(c: &Rational) -> String {
    let abs = c.abs();
    let body = if abs.is_integer() {
        abs.numer().to_string()
    } else {
        format!("(/ {} {})", abs.numer(), abs.denom())
    };
    if c.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn smt_poly(p: &Polynomial, vars: &VarTable) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let terms: Vec<String> = p
        .terms()
        .iter()
        .map(|(m, c)| {
            let mut factors = Vec::new();
            if !c.is_one() || m.is_one() {
                factors.push(numeral(c));
            }
            for (i, &e) in m.exponents().iter().enumerate() {
                for _ in 0..e {
                    factors.push(vars.name(i).to_string());
                }
            }
            if factors.len() == 1 {
                factors.pop().expect("one factor")
            } else {
                format!("(* {})", factors.join(" "))
            }
        })
        .collect();
    if terms.len() == 1 {
        terms.into_iter().next().expect("one term")
    } else {
        format!("(+ {})", terms.join(" "))
    }
}

fn smt_formula(f: &Formula, vars: &VarTable) -> String {
    let list = |op: &str, fs: &[Formula]| {
        let parts: Vec<String> = fs.iter().map(|g| smt_formula(g, vars)).collect();
        format!("({op} {})", parts.join(" "))
    };
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(a) => {
            let p = smt_poly(&a.poly, vars);
            match a.rel {
                Rel::Ne => format!("(not (= {p} 0))"),
                r => format!("({} {p} 0)", r.symbol()),
            }
        }
        Formula::Not(g) => format!("(not {})", smt_formula(g, vars)),
        Formula::And(fs) => list("and", fs),
        Formula::Or(fs) => list("or", fs),
        Formula::Implies(a, b) => format!("(=> {} {})", smt_formula(a, vars), smt_formula(b, vars)),
        Formula::Forall(vs, g) | Formula::Exists(vs, g) => {
            let q = if matches!(f, Formula::Forall(..)) { "forall" } else { "exists" };
            let binders: Vec<String> = vs.iter().map(|&v| format!("({} Real)", vars.name(v))).collect();
            format!("({q} ({}) {})", binders.join(" "), smt_formula(g, vars))
        }
    }
}

/// Satisfiability query for `hypothesis ∧ ¬conclusion`; `unsat` means the
/// condition is valid.
pub fn emit_smtlib(c: &SideCondition) -> String {
    let quantified = !c.hypothesis.is_quantifier_free() || !c.conclusion.is_quantifier_free();
    let mut out = String::new();
    out.push_str(&format!("; {}\n", c.provenance));
    out.push_str("(set-option :produce-models true)\n");
    out.push_str(if quantified { "(set-logic NRA)\n" } else { "(set-logic QF_NRA)\n" });
    for &v in &c.universal_vars {
        out.push_str(&format!("(declare-fun {} () Real)\n", c.vars.name(v)));
    }
    out.push_str(&format!("(assert {})\n", smt_formula(&c.hypothesis, &c.vars)));
    out.push_str(&format!("(assert (not {}))\n", smt_formula(&c.conclusion, &c.vars)));
    out.push_str("(check-sat)\n(get-model)\n");
    out
}

static QUERY_COUNTER: AtomicUsize = AtomicUsize::new(0);

pub(crate) fn run_solver(c: &SideCondition, solver: &Path, timeout: Duration) -> SolverAnswer {
    let id = QUERY_COUNTER.fetch_add(1, Ordering::Relaxed);
    let file = std::env::temp_dir().join(format!("odeinv-{}-{id}.smt2", std::process::id()));
    if let Err(e) = std::fs::write(&file, emit_smtlib(c)) {
        return SolverAnswer::Unknown(format!("cannot write query: {e}"));
    }
    let answer = invoke(solver, &file, timeout).map_or_else(SolverAnswer::Unknown, |out| interpret(&out, &c.vars));
    let _ = std::fs::remove_file(&file);
    answer
}

fn invoke(solver: &Path, file: &Path, timeout: Duration) -> Result<String, String> {
    let mut child = Command::new(solver)
        .arg(file)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("cannot start {}: {e}", solver.display()))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let start = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if start.elapsed() > timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err("timeout".into());
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(e.to_string()),
        }
    }
    reader.join().map_err(|_| "reader thread panicked".to_string())
}

pub(crate) fn interpret(output: &str, vars: &VarTable) -> SolverAnswer {
    let mut lines = output.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("unsat") => SolverAnswer::Unsat,
        Some("sat") => {
            let rest: String = lines.collect::<Vec<_>>().join(" ");
            SolverAnswer::Sat(parse_model(&rest, vars))
        }
        Some("unknown") => SolverAnswer::Unknown("solver answered unknown".into()),
        Some(other) => SolverAnswer::Unknown(format!("unexpected solver output `{other}`")),
        None => SolverAnswer::Unknown("empty solver output".into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(text: &str) -> Option<Vec<Sexp>> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut token = String::new();
    let flush = |token: &mut String, stack: &mut Vec<Vec<Sexp>>| {
        if !token.is_empty() {
            stack.last_mut().expect("stack").push(Sexp::Atom(std::mem::take(token)));
        }
    };
    for ch in text.chars() {
        match ch {
            '(' => {
                flush(&mut token, &mut stack);
                stack.push(Vec::new());
            }
            ')' => {
                flush(&mut token, &mut stack);
                let done = stack.pop()?;
                stack.last_mut()?.push(Sexp::List(done));
            }
            c if c.is_whitespace() => flush(&mut token, &mut stack),
            c => token.push(c),
        }
    }
    flush(&mut token, &mut stack);
    (stack.len() == 1).then(|| stack.pop().expect("root"))
}

fn value(e: &Sexp) -> Option<Rational> {
    match e {
        Sexp::Atom(s) => parse_decimal(s),
        Sexp::List(items) => {
            let (Sexp::Atom(op), args) = items.split_first()? else {
                return None;
            };
            let vals: Option<Vec<Rational>> = args.iter().map(value).collect();
            let vals = vals?;
            match (op.as_str(), vals.as_slice()) {
                ("-", [a]) => Some(-a),
                ("-", [a, rest @ ..]) => Some(rest.iter().fold(a.clone(), |acc, b| acc - b)),
                ("+", _) => Some(vals.iter().fold(Rational::zero(), |acc, b| acc + b)),
                ("*", _) => Some(vals.iter().fold(Rational::one(), |acc, b| acc * b)),
                ("/", [a, b]) if !b.is_zero() => Some(a / b),
                _ => None,
            }
        }
    }
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (int_part, frac) = s.split_once('.').unwrap_or((s, ""));
    if int_part.is_empty() || !int_part.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac}");
    let num: num_bigint::BigInt = digits.parse().ok()?;
    Some(Rational::new(num, num_traits::pow(num_bigint::BigInt::from(10), frac.len())))
}

// Collects `(define-fun x () Real v)` entries; `None` if any declared
// variable has a non-rational value.
fn parse_model(text: &str, vars: &VarTable) -> Option<Vec<Rational>> {
    let sexps = parse_sexps(text)?;
    let mut point = vec![Rational::zero(); vars.len()];
    fn walk(e: &Sexp, vars: &VarTable, point: &mut [Rational]) -> Option<()> {
        if let Sexp::List(items) = e {
            if let [Sexp::Atom(head), Sexp::Atom(name), _, _, v] = items.as_slice() {
                if head == "define-fun" {
                    if let Some(i) = vars.lookup(name) {
                        point[i] = value(v)?;
                    }
                    return Some(());
                }
            }
            for item in items {
                walk(item, vars, point)?;
            }
        }
        Some(())
    }
    for e in &sexps {
        walk(e, vars, &mut point)?;
    }
    Some(point)
}
