use super::*;
use crate::ideals::rank;
use crate::poly::{int, rat};
use crate::semialg::to_normal_form;
use crate::syntax::{parse_formula, parse_ode, parse_polynomial};

fn uv() -> VarTable {
    VarTable::from_names(["u", "v"]).unwrap()
}

fn spiral() -> OdeSystem {
    parse_ode("u' = -v + u/4*(1-u^2-v^2), v' = u + v/4*(1-u^2-v^2)", &uv()).unwrap()
}

fn xy_swap() -> OdeSystem {
    let t = VarTable::from_names(["x", "y"]).unwrap();
    parse_ode("x' = y, y' = x", &t).unwrap()
}

fn quick() -> DischargeConfig {
    DischargeConfig {
        samples: 20_000,
        ..DischargeConfig::default()
    }
}

fn nf(src: &str) -> NormalForm {
    to_normal_form(&parse_formula(src, &uv()).unwrap()).unwrap()
}

#[test]
fn darboux_running_example() {
    let sys = spiral();
    let p = parse_polynomial("1 - u^2 - v^2", sys.table()).unwrap();
    let g = find_darboux_cofactor(&p, &sys, 2).unwrap();
    assert_eq!(g, parse_polynomial("-1/2*(u^2 + v^2)", sys.table()).unwrap());
    assert_eq!(default_degree_bound(&p, &sys), 2);
    let cert = Certificate::Darboux {
        sys: sys.clone(),
        p: p.clone(),
        g: g.clone(),
        rel: DarbouxRel::Gt,
    };
    assert!(check_certificate(&cert));
    let tampered = Certificate::Darboux {
        sys,
        p,
        g: &g + &Polynomial::one(),
        rel: DarbouxRel::Gt,
    };
    assert!(!check_certificate(&tampered));
}

#[test]
fn darboux_decay_and_failure() {
    let t = VarTable::from_names(["y"]).unwrap();
    let sys = parse_ode("y' = -y", &t).unwrap();
    assert_eq!(find_darboux_cofactor(&Polynomial::var(0), &sys, 0), Some(Polynomial::int(-1)));
    let swap = xy_swap();
    assert_eq!(find_darboux_cofactor(&Polynomial::var(0), &swap, 3), None);
}

#[test]
fn vectorial_darboux() {
    let sys = xy_swap();
    let ps = [Polynomial::var(0), Polynomial::var(1)];
    let g = find_vectorial_darboux(&ps, &sys, 0).unwrap();
    let expect = PolyMatrix::from_rows(vec![
        vec![Polynomial::zero(), Polynomial::one()],
        vec![Polynomial::one(), Polynomial::zero()],
    ])
    .unwrap();
    assert_eq!(g, expect);
    let r = rank(&ps[0], &sys, 20).unwrap();
    let cert = dri_companion(&r, &ps[0], &sys);
    match &cert {
        Certificate::VectorialDarboux { g, ps: chain, .. } => {
            assert_eq!(g, &expect);
            assert_eq!(chain, &ps.to_vec());
        }
        other => panic!("{other:?}"),
    }
    assert!(check_certificate(&cert));
}

#[test]
fn companion_of_rank_one() {
    let sys = spiral();
    let p = parse_polynomial("1 - u^2 - v^2", sys.table()).unwrap();
    let r = rank(&p, &sys, 20).unwrap();
    let Certificate::VectorialDarboux { g, .. } = dri_companion(&r, &p, &sys) else {
        panic!()
    };
    assert_eq!(g.get(0, 0), &parse_polynomial("-1/2*u^2 - 1/2*v^2", sys.table()).unwrap());
}

#[test]
fn algebraic_invariance() {
    let sys = spiral();
    let p = parse_polynomial("u^2 + v^2 - 1", sys.table()).unwrap();
    match check_algebraic_invariance(&p, &sys, None, &quick()) {
        Verdict::Invariant(c) => match *c {
            Certificate::Dri { rank, witnesses, .. } => {
                assert_eq!(rank.rank, 1);
                assert_eq!(rank.cofactors, vec![parse_polynomial("-1/2*u^2 - 1/2*v^2", sys.table()).unwrap()]);
                assert!(witnesses.is_some());
            }
            other => panic!("{other:?}"),
        },
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        check_algebraic_invariance(&Polynomial::zero(), &sys, None, &quick()),
        Verdict::Invariant(_)
    ));
}

#[test]
fn clock_leaves_its_start() {
    let t = VarTable::from_names(["x"]).unwrap();
    let sys = parse_ode("x' = 1", &t).unwrap();
    match check_algebraic_invariance(&Polynomial::var(0), &sys, None, &quick()) {
        Verdict::NotInvariant { witness, violated } => {
            assert_eq!(witness, vec![int(0)]);
            assert!(violated.refuted_by(&witness));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn open_disk_is_invariant() {
    let sys = spiral();
    let v = check_semialgebraic_invariance(&nf("u^2 + v^2 < 1"), &NormalForm::tt(), &sys, &quick());
    let Verdict::Invariant(cert) = v else { panic!("{v:?}") };
    let Certificate::Sai { conditions, .. } = cert.as_ref() else {
        panic!()
    };
    assert_eq!(conditions[0].status, Status::ProvedIdentity);
    assert_eq!(conditions[1].status, Status::ProvedByIdealReduction);
    assert!(check_certificate(&cert));
    let back = certificate_from_json(&certificate_to_json(&cert)).unwrap();
    assert_eq!(&back, cert.as_ref());
}

#[test]
fn half_open_disk_is_refuted() {
    let sys = spiral();
    let p = nf("u^2 + v^2 < 1/4 | (u^2 + v^2 = 1/4 & u >= 0)");
    match check_semialgebraic_invariance(&p, &NormalForm::tt(), &sys, &DischargeConfig::default()) {
        Verdict::NotInvariant { witness, violated } => {
            assert!(violated.refuted_by(&witness));
            let r2 = &witness[0] * &witness[0] + &witness[1] * &witness[1];
            assert_eq!(r2, rat(1, 4));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn smt_query_for_ideal_example() {
    let t = VarTable::from_names(["x", "y"]).unwrap();
    let c = SideCondition::new(
        &t,
        parse_formula("x = 0", &t).unwrap(),
        parse_formula("x*y = 0", &t).unwrap(),
        "example",
    );
    let q = emit_smtlib(&c);
    assert!(q.contains("(assert (= x 0))") && q.contains("(assert (not (= (* x y) 0)))"));
}

#[test]
fn json_round_trips() {
    let sys = spiral();
    let p = parse_polynomial("1 - u^2 - v^2", sys.table()).unwrap();
    let certs = [
        Certificate::Darboux {
            sys: sys.clone(),
            p: p.clone(),
            g: find_darboux_cofactor(&p, &sys, 2).unwrap(),
            rel: DarbouxRel::Eq,
        },
        dri_companion(&rank(&Polynomial::var(0), &xy_swap(), 20).unwrap(), &Polynomial::var(0), &xy_swap()),
    ];
    for c in certs {
        let v = certificate_to_json(&c);
        assert_eq!(v["version"], 1);
        assert_eq!(certificate_from_json(&v).unwrap(), c);
    }
    let mut bad = certificate_to_json(&certs_first(&sys, &p));
    bad["version"] = 7.into();
    assert!(certificate_from_json(&bad).is_err());
}

fn certs_first(sys: &OdeSystem, p: &Polynomial) -> Certificate {
    Certificate::Darboux {
        sys: sys.clone(),
        p: p.clone(),
        g: Polynomial::zero(),
        rel: DarbouxRel::Eq,
    }
}
