//! Acceptance criteria 1 to 8. Runs without the libtest harness so the per-criterion lines always
//! print; exits nonzero if any criterion fails.
//!
//! Tolerances are restated here as literals so a drift in the library constants fails loudly.

use gevrey_core::solver::SolverConfig;
use gevrey_core::suite::{self, Case, Gate};
use serde_json::Value;

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn u(v: &Value) -> u64 {
    v.as_u64().unwrap_or(u64::MAX)
}

fn rows(g: &Gate) -> &Vec<Value> {
    g.detail["cases"].as_array().expect("cases")
}

/// Re-derives each verdict from the detail with literal tolerances.
fn recheck(g: &Gate, cases: &[&Case]) -> Vec<String> {
    let mut bad = Vec::new();
    let mut need = |ok: bool, what: String| {
        if !ok {
            bad.push(what);
        }
    };
    let d = &g.detail;
    match g.id {
        1 => {
            for k in ["eigen_residual_nonzero", "orthogonality_nonzero", "delta_mismatches", "bd_mismatches", "p_oracle_mismatches", "cancellation_failures"] {
                need(u(&d[k]) == 0, format!("{k} = {}", d[k]));
            }
            need(g.seconds <= 60.0, format!("took {:.1} s > 60 s", g.seconds));
        }
        2 => {
            need(f(&d["weak_delta_max"]) <= 1e-6, format!("weak delta {}", d["weak_delta_max"]));
            need(f(&d["derivative_fd_max_rel"]) <= 1e-6, format!("derivative {}", d["derivative_fd_max_rel"]));
            need(f(&d["closed_form_m1_max"]) <= 1e-10, format!("closed form {}", d["closed_form_m1_max"]));
            for c in d["decay_constants"].as_array().unwrap() {
                need(f(&c["constant"]).is_finite(), format!("decay constant {c}"));
            }
        }
        3 => {
            let solve: f64 = cases.iter().map(|c| c.solve_seconds).sum();
            need(solve + g.seconds <= 300.0, format!("took {:.1} s > 300 s", solve + g.seconds));
            for r in rows(g) {
                need(f(&r["weak_max"]) <= 1e-6, format!("weak residual {r}"));
                need(f(&r["envelope_r2"]) >= 0.9, format!("growth fit R^2 {}", r["envelope_r2"]));
                need(u(&r["ell_max"]) >= 6, format!("only {} levels", r["ell_max"]));
            }
        }
        4 => {
            for r in rows(g) {
                for l in r["levels"].as_array().unwrap() {
                    need(f(&l["outer_max_rel"]) <= 1e-6, format!("outer remainder {l}"));
                    need(f(&l["inner_max_abs"]) <= 1e-6, format!("inner remainder {l}"));
                }
            }
        }
        5 => {
            need(f(&d["report"]["max_rel"]) <= 1e-4, format!("operator mismatch {}", d["report"]["max_rel"]));
            need(d["report"]["points"].as_array().map_or(0, Vec::len) >= 5, "fewer than 5 points".into());
        }
        6 => {
            let solve: f64 = cases.iter().map(|c| c.solve_seconds).sum();
            need(solve + g.seconds <= 600.0, format!("took {:.1} s > 600 s", solve + g.seconds));
            for r in rows(g) {
                let s = (f(&r["s_hat"]) - f(&r["s_target"])).abs() / f(&r["s_target"]);
                let c = (f(&r["c_hat"]) - f(&r["c0"])).abs() / f(&r["c0"]);
                need(s <= 0.05, format!("({}, {}) s error {s:.3e}", r["n"], r["m"]));
                need(c <= 0.10, format!("({}, {}) c error {c:.3e}", r["n"], r["m"]));
            }
        }
        7 => {
            for r in rows(g) {
                let t = &r["targets"];
                need((f(&r["space_exponent"]) - f(&t[0])).abs() <= 0.1, format!("space exponent {r}"));
                need((f(&r["deriv_exponent"]) - f(&t[1])).abs() <= 0.1, format!("derivative exponent {r}"));
            }
        }
        8 => {
            for s in d["synthetic"].as_array().unwrap() {
                need(f(&s["s_rel"]) <= 0.01 && f(&s["c_rel"]) <= 0.01, format!("synthetic {s}"));
            }
            need(f(&d["direct"]["max_rel"]) <= 1e-3, format!("direct transform {}", d["direct"]["max_rel"]));
            need(d["direct"]["spots"].as_array().map_or(0, Vec::len) >= 3, "fewer than 3 direct spots".into());
        }
        _ => unreachable!(),
    }
    bad
}

fn tolerances_are_pinned() {
    assert_eq!(suite::EXACT_BUDGET_S, 60.0);
    assert_eq!(suite::GREENS_WEAK_TOL, 1e-6);
    assert_eq!(suite::GREENS_FD_TOL, 1e-6);
    assert_eq!(suite::CLOSED_FORM_TOL, 1e-10);
    assert_eq!(suite::WEAK_TOL, 1e-6);
    assert_eq!(suite::GROWTH_R2_MIN, 0.9);
    assert_eq!(suite::CONSTRUCTION_BUDGET_S, 300.0);
    assert_eq!(suite::REMAINDER_TOL, 1e-6);
    assert_eq!(suite::OPERATOR_TOL, 1e-4);
    assert_eq!(suite::S_REL_TOL, 0.05);
    assert_eq!(suite::C_REL_TOL, 0.10);
    assert_eq!(suite::EXPONENT_BUDGET_S, 600.0);
    assert_eq!(suite::GS_TOL, 0.1);
    assert_eq!(suite::SYNTHETIC_TOL, 0.01);
    assert_eq!(suite::DIRECT_TOL, 1e-3);
    assert_eq!(suite::CONSTRUCTION_CASES, [(0, 1), (1, 2)]);
    assert_eq!(suite::EXPONENT_CASES, [(0, 1), (0, 2), (1, 2)]);
    assert_eq!(gevrey_core::transform::REMAINDER_TOL, 1e-6);
    assert_eq!(gevrey_core::transform::OPERATOR_TOL, 1e-4);
    assert_eq!(gevrey_core::transform::DIRECT_TOL, 1e-3);
}

fn main() {
    tolerances_are_pinned();
    println!("tolerances pinned");
    let cfg = SolverConfig::default();
    let c01 = suite::solve_case(0, 1, &cfg).unwrap();
    let c12 = suite::solve_case(1, 2, &cfg).unwrap();
    let c02 = suite::solve_case(0, 2, &cfg).unwrap();
    let plan: Vec<(Gate, Vec<&Case>)> = vec![
        (suite::exact_identities().unwrap(), vec![]),
        (suite::greens_suite().unwrap(), vec![]),
        (suite::construction(&[&c01, &c12]).unwrap(), vec![&c01, &c12]),
        (suite::remainder_gate(&[&c01, &c12]).unwrap(), vec![]),
        (suite::operator_gate(&c01).unwrap(), vec![]),
        (suite::exponent_gate(&[&c01, &c02, &c12]).unwrap(), vec![&c01, &c02, &c12]),
        (suite::bound_gate().unwrap(), vec![]),
        (suite::self_tests(&c01).unwrap(), vec![]),
    ];
    let mut failures = Vec::new();
    for (g, cases) in &plan {
        let bad = recheck(g, cases);
        let pass = g.pass && bad.is_empty();
        println!("criterion {} [{}] {} ({:.1} s)", g.id, if pass { "PASS" } else { "FAIL" }, g.name, g.seconds);
        for b in &bad {
            println!("    {b}");
        }
        if g.pass != bad.is_empty() {
            println!("    library verdict {} disagrees with recheck", g.pass);
        }
        if !pass {
            failures.push(g.id);
        }
    }
    if !failures.is_empty() {
        println!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
    println!("all 8 criteria pass");
}
