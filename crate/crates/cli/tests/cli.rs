use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SPIRAL: &str = "u' = -v + u/4*(1-u^2-v^2), v' = u + v/4*(1-u^2-v^2)";

fn odeinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odeinv")).args(args).output().expect("spawn odeinv")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn spiral_problem(dir: &TempDir, extra: &str) -> String {
    write(dir, "problem.toml", &format!("vars = [\"u\", \"v\"]\node = \"{SPIRAL}\"\n{extra}"))
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad report ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = odeinv(args);
    (out.status.code().unwrap(), report(&out))
}

#[test]
fn check_alg_on_unit_circle_succeeds_with_dri_certificate() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "polynomial = \"u^2 + v^2 - 1\"");
    let (code, r) = run(&["check-alg", &f]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"], "invariant");
    assert_eq!(r["certificate"]["kind"], "dri");
    assert_eq!(r["certificate"]["rank"], 1);
}

#[test]
fn half_open_disk_is_refuted_with_a_witness() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "candidates = [\"u^2 + v^2 < 1 | (u^2 + v^2 = 1 & u >= 0)\"]");
    let (code, r) = run(&["check-inv", &f]);
    assert_eq!(code, 1);
    let res = &r["results"][0];
    assert_eq!(res["verdict"], "not-invariant");
    let w = res["witness"].as_object().unwrap();
    assert!(w.contains_key("u") && w.contains_key("v"));
}

#[test]
fn open_disk_is_invariant_and_mixed_candidates_report_the_refutation() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(
        &dir,
        "candidates = [\"1 - u^2 - v^2 > 0\", \"u^2 + v^2 < 1 | (u^2 + v^2 = 1 & u >= 0)\"]",
    );
    let (code, r) = run(&["check-inv", &f]);
    assert_eq!(code, 1);
    assert_eq!(r["results"][0]["verdict"], "invariant");
    assert_eq!(r["results"][0]["certificate"]["kind"], "sai");
    assert_eq!(r["results"][1]["verdict"], "not-invariant");
}

#[test]
fn rank_of_zero_is_one() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "polynomial = \"0\"");
    let (code, r) = run(&["rank", &f]);
    assert_eq!(code, 0);
    assert_eq!(r["rank"]["rank"], 1);
}

#[test]
fn lie_prints_requested_orders() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "polynomial = \"v^2 - u^2 + 9/2\"");
    let (code, r) = run(&["lie", "--order", "2", &f]);
    assert_eq!(code, 0);
    let d = r["derivatives"].as_array().unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d[0], "-u^2 + v^2 + 9/2");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(
        &dir,
        "candidates = [\"u^2 + v^2 < 1 | (u^2 + v^2 = 1 & u >= 0)\", \"u^2 <= v^2 + 9/2\"]\n[options]\nsamples = 2000\n",
    );
    let a = odeinv(&["--seed", "11", "check-inv", &f]);
    let b = odeinv(&["--seed", "11", "check-inv", &f]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a)["seed"], 11);
}

#[test]
fn timing_only_with_flag() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "polynomial = \"u\"");
    assert!(run(&["rank", &f]).1.get("elapsed_ms").is_none());
    assert!(run(&["--timing", "rank", &f]).1.get("elapsed_ms").is_some());
}

#[test]
fn input_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "vars = [\"p\", \"q\"]\node = \"p' = 1\"\npolynomial = \"p / q\"",
        "vars = [\"x\"]\node = \"x' = y\"\npolynomial = \"x\"",
        "vars = [\"x\"]\node = \"x' = 1\"\npolynomial = \"x +\"",
        "vars = [\"x\"]\nbogus = 1",
    ];
    for (i, text) in cases.iter().enumerate() {
        let f = write(&dir, &format!("bad{i}.toml"), text);
        let out = odeinv(&["rank", &f]);
        assert_eq!(out.status.code(), Some(3), "case {i}");
        assert!(!out.stderr.is_empty());
        assert_eq!(report(&out)["outcome"], "input-error");
    }
    assert_eq!(odeinv(&["rank", "/nonexistent/problem.toml"]).status.code(), Some(3));
}

#[test]
fn rank_cap_is_a_resource_error() {
    let dir = TempDir::new().unwrap();
    // x' = 1 makes x^k have rank k + 1.
    let f = write(
        &dir,
        "p.toml",
        "vars = [\"x\"]\node = \"x' = 1\"\npolynomial = \"x^6\"\n[options]\nrank_cap = 3\n",
    );
    let (code, r) = run(&["rank", &f]);
    assert_eq!(code, 4);
    assert_eq!(r["outcome"], "resource-error");
    let (code, r) = run(&["check-alg", &f]);
    assert_eq!(code, 4);
    assert_eq!(r["verdict"], "unknown");
}

#[test]
fn darboux_certificate_round_trips_through_cert_check() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "polynomial = \"1 - u^2 - v^2\"");
    let out = odeinv(&["darboux", &f]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["certificate"]["g"], "-1/2*u^2 - 1/2*v^2");
    let saved = write(&dir, "report.json", &String::from_utf8(out.stdout).unwrap());
    let (code, r) = run(&["cert-check", &saved]);
    assert_eq!((code, &r["accepted"]), (0, &Value::Bool(true)));

    let mut cert = report(&odeinv(&["darboux", &f]))["certificate"].clone();
    cert["g"] = Value::String("-1/2*u^2 - v^2".into());
    let bad = write(&dir, "bad.json", &cert.to_string());
    let (code, r) = run(&["cert-check", &bad]);
    assert_eq!((code, &r["accepted"]), (1, &Value::Bool(false)));
}

#[test]
fn vectorial_darboux_and_missing_cofactor() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "swap.toml",
        "vars = [\"x\", \"y\"]\node = \"x' = y, y' = x\"\npolynomials = [\"x\", \"y\"]\n",
    );
    let (code, r) = run(&["darboux", &f]);
    assert_eq!(code, 0);
    assert_eq!(r["certificate"]["kind"], "vdbx");

    let g = write(&dir, "none.toml", "vars = [\"x\", \"y\"]\node = \"x' = y, y' = x\"\npolynomial = \"x\"\n");
    let (code, r) = run(&["darboux", &g]);
    assert_eq!(code, 2);
    assert!(r["certificate"].is_null());
}

#[test]
fn hp_reduce_emits_a_checkable_certificate() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "hp.toml",
        "vars = [\"x\", \"y\"]\nprogram = \"x := x + 1 ; {x' = y}\"\npost = \"x = 0 & y = 0\"\n",
    );
    let out = odeinv(&["hp-reduce", &f]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["trace"]["node"], "seq");
    let saved = write(&dir, "r.json", &String::from_utf8(out.stdout).unwrap());
    assert_eq!(run(&["cert-check", &saved]).0, 0);
}

#[test]
fn emit_smt_writes_queries_without_a_solver() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "candidates = [\"u^2 <= v^2 + 9/2\"]");
    let out_dir = dir.path().join("smt");
    let (code, r) = run(&["emit-smt", &f, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    let qs = r["queries"].as_array().unwrap();
    assert!(!qs.is_empty());
    for q in qs {
        let text = fs::read_to_string(out_dir.join(q["name"].as_str().unwrap())).unwrap();
        assert!(text.contains("(check-sat)") && text.contains("(declare-fun u () Real)"));
    }
    assert!(Path::new(&out_dir).is_dir());
}

#[test]
fn check_alg_rejects_non_disequation_domains() {
    let dir = TempDir::new().unwrap();
    let f = spiral_problem(&dir, "polynomial = \"u\"\ndomain = \"u > 0\"");
    assert_eq!(run(&["check-alg", &f]).0, 3);
}
