use anyhow::{Context, Result};
use serde_json::json;

use gevrey_core::coeffs::{bd_identity_mismatches, check_param_set, delta_mismatches, delta_table};
use gevrey_core::exactnum::{derive_params, solve_r_alt};
use gevrey_core::greens::{weak_delta_check, GreensFn, OdeOperator, DEFAULT_PROBES};
use gevrey_core::solver::{assemble, growth_certificate, load_checkpoint, save_checkpoint, solve, weak_residuals};
use gevrey_core::spectral::{bound_suite, eigen_residual, eigenfunction, inner_product, Parity};
use gevrey_core::suite::{self, rational_probes, PROBE_SEED};
use gevrey_core::transform::{fit_window, fourier_trace, gevrey_fit, kernel_eval, trace_diagnostics};

use crate::config::RunConfig;
use crate::report::{csv, Report};

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn params(cfg: &RunConfig) -> Result<Report> {
    let p = derive_params(cfg.n, cfg.m)?;
    let summary = format!(
        "n = {}, m = {}\ntheta = {}\ngamma = {}\nalpha = {}\ns0 = {}\nr = {}\nr' = r + 2 gamma = {}\nc1 = {:.15} {:+.15}i\nc0 = {:.15}\nE_0 = {}\nK' = {:.15}\nprecision = {} bits\n",
        p.n,
        p.m,
        p.theta,
        p.gamma,
        p.alpha,
        p.s0,
        p.r,
        p.r_prime(),
        p.c1.re,
        p.c1.im,
        p.c0,
        p.eigenvalue(0),
        p.kprime().re,
        p.precision_bits
    );
    let result = json!({
        "params": p,
        "r_prime": p.r_prime().to_string(),
        "kprime": p.kprime().re,
        "e0": p.eigenvalue(0),
        "r_alternate_constant": solve_r_alt(cfg.n, cfg.m).to_string(),
    });
    Ok(Report { command: "params".into(), pass: true, result, summary, csv: vec![] })
}

pub fn eigen(cfg: &RunConfig) -> Result<Report> {
    let mut residual_bad = 0;
    let mut ortho_bad = 0;
    for parity in [Parity::Even, Parity::Odd] {
        let fs: Vec<_> = (0..=cfg.kmax).map(|k| eigenfunction(parity, k, cfg.n)).collect();
        residual_bad += fs.iter().filter(|f| !eigen_residual(f).is_zero()).count();
        for a in 0..fs.len() {
            for b in 0..a {
                if !num_traits::Zero::is_zero(&inner_product(&fs[a], &fs[b])?.coeff) {
                    ortho_bad += 1;
                }
            }
        }
    }
    let rep = bound_suite(cfg.kmax, cfg.n)?;
    let (ts, td) = rep.gs_targets;
    let gs_ok = (rep.gs_space_exponent - ts).abs() <= suite::GS_TOL && (rep.gs_deriv_exponent - td).abs() <= suite::GS_TOL;
    let pass = residual_bad == 0 && ortho_bad == 0 && gs_ok;
    let summary = format!(
        "eigen residuals: {residual_bad} nonzero\northogonality: {ortho_bad} nonzero\nspace exponent {:.4} (target {ts:.4})\nderivative exponent {:.4} (target {td:.4})\nmax sup ratio {:.3e}, max derivative ratio {:.3e}\n",
        rep.gs_space_exponent, rep.gs_deriv_exponent, rep.max_sup_ratio, rep.max_deriv_ratio
    );
    let table = rep.to_csv();
    let result = json!({ "residual_nonzero": residual_bad, "orthogonality_nonzero": ortho_bad, "bounds": rep });
    Ok(Report { command: "eigen".into(), pass, result, summary, csv: vec![("bounds.csv".into(), table)] })
}

pub fn coeffs(cfg: &RunConfig) -> Result<Report> {
    let bad = delta_mismatches(cfg.n, cfg.kmax as usize, cfg.imax as usize)?;
    let bd_bad = bd_identity_mismatches(cfg.kmax as usize, &rational_probes(PROBE_SEED, 50));
    let p = derive_params(cfg.n, cfg.m)?;
    let chk = check_param_set(&p, &rational_probes(PROBE_SEED + 1, 24));
    let pi0_zero = num_traits::Zero::is_zero(&chk.pi0_weight);
    let pass = bad.is_empty() && bd_bad == 0 && chk.generator_mismatches == 0 && chk.monomial_mismatches == 0 && pi0_zero;
    let summary = format!(
        "delta oracle: {} mismatches\nb/d identities: {bd_bad} mismatches\noperator rows (n = {}, m = {}): {} generator, {} monomial mismatches\nPi0 weight: {}\n",
        bad.len(),
        p.n,
        p.m,
        chk.generator_mismatches,
        chk.monomial_mismatches,
        chk.pi0_weight
    );
    let result = json!({
        "delta_mismatches": bad,
        "bd_mismatches": bd_bad,
        "param_set": chk,
        "delta_table": delta_table(cfg.n, cfg.kmax as usize, cfg.imax as usize).to_json(),
    });
    Ok(Report { command: "coeffs".into(), pass, result, summary, csv: vec![] })
}

pub fn greens(cfg: &RunConfig) -> Result<Report> {
    let p = derive_params(cfg.n, cfg.m)?;
    let mut rows = Vec::new();
    let mut summary = String::new();
    let mut pass = true;
    let mut samples = Vec::new();
    for k in 0..=2u32 {
        let g = GreensFn::new(OdeOperator::for_level(&p, k));
        let weak = weak_delta_check(&g, &DEFAULT_PROBES)?;
        let decay = g.decay_constant(30.0, 3000);
        let disc = g.discrepancy();
        pass &= weak.max_residual <= cfg.weak_tol && decay.is_finite();
        summary.push_str(&format!(
            "k = {k}: weak delta residual {:.3e}, decay constant {:.4}, alternate/true amplitude {:.3}{:+.3}i\n",
            weak.max_residual, decay, disc[0].re, disc[0].im
        ));
        if k == 0 {
            samples = (0..=400).map(|i| {
                let x = -10.0 + 0.05 * i as f64;
                let v = g.eval(x);
                vec![num(x), num(v.re), num(v.im)]
            }).collect();
        }
        rows.push(json!({
            "k": k,
            "weak": weak,
            "decay_constant": decay,
            "modes": g.modes,
            "amplitudes": g.amps,
            "alternate_over_true": disc,
        }));
    }
    let table = csv("rho,re_g,im_g", samples);
    Ok(Report { command: "greens".into(), pass, result: json!({ "levels": rows }), summary, csv: vec![("greens.csv".into(), table)] })
}

pub fn build(cfg: &RunConfig) -> Result<Report> {
    let p = derive_params(cfg.n, cfg.m)?;
    let sol = solve(&p, &cfg.solver())?;
    std::fs::create_dir_all(&cfg.out)?;
    let ckpt = cfg.out.join("levels.bin");
    save_checkpoint(&sol, &ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
    let weak = weak_residuals(&sol)?;
    let weak_max = weak.iter().map(|r| r.max_rel).fold(0.0, f64::max);
    let g = growth_certificate(&sol);
    let pass = weak_max <= cfg.weak_tol && g.r2 >= suite::GROWTH_R2_MIN && g.c_level1.is_finite();
    let summary = format!(
        "solved levels 0..={} for (n, m) = ({}, {})\nweak residual max {:.3e}\nlevel-one constant {:.4}\ngrowth constant {:.4}, envelope slope {:.4}, R^2 {:.4}\ncheckpoint {}\n",
        sol.solved(),
        p.n,
        p.m,
        weak_max,
        g.c_level1,
        g.c,
        g.slope,
        g.r2,
        ckpt.display()
    );
    let table = csv("ell,p,k,s", g.rows.iter().map(|r| vec![r.ell.to_string(), r.p.to_string(), r.k.to_string(), num(r.s)]));
    let env = csv("ell,log_s_max", g.envelope.iter().map(|(l, v)| vec![l.to_string(), num(*v)]));
    let result = json!({
        "ell_max": sol.solved(),
        "weak_max": weak_max,
        "weak": weak,
        "growth": g,
        "checkpoint": ckpt.file_name().map(|s| s.to_string_lossy().to_string()),
    });
    Ok(Report {
        command: "build".into(),
        pass,
        result,
        summary,
        csv: vec![("growth.csv".into(), table), ("growth_envelope.csv".into(), env)],
    })
}

pub fn fourier(cfg: &RunConfig, checkpoint: Option<&std::path::Path>) -> Result<Report> {
    let p = derive_params(cfg.n, cfg.m)?;
    let sol = match checkpoint {
        Some(path) => load_checkpoint(&p, path).with_context(|| format!("reading {}", path.display()))?,
        None => solve(&p, &cfg.solver())?,
    };
    let asm = assemble(&sol, sol.solved())?;
    let (lo, hi) = fit_window(&asm);
    let tr = fourier_trace(&asm, lo, hi, cfg.trace_points)?;
    let fit = gevrey_fit(&tr.eta, &tr.log_abs, true)?;
    let plain = gevrey_fit(&tr.eta, &tr.log_abs, false).ok();
    let diag = trace_diagnostics(&tr);
    let k00 = kernel_eval(&asm, 0.0, 0.0);
    let s0 = p.s0_f();
    let s_rel = (fit.s_hat - s0).abs() / s0;
    let c_rel = (fit.c_hat - p.c0).abs() / p.c0;
    let pass = s_rel <= cfg.fit_tol && c_rel <= 2.0 * cfg.fit_tol;
    let mu = fit.mu_hat.unwrap_or(0.0);
    let rows = (0..tr.eta.len()).map(|k| {
        let e = tr.eta[k];
        let model = fit.a_hat - fit.c_hat * e.powf(1.0 / fit.s_hat) + mu * e.ln();
        vec![num(e), num(tr.log_abs[k]), num(tr.log_abs[k] - model)]
    });
    let table = csv("eta,log_abs_f,fit_residual", rows);
    let summary = format!(
        "(n, m) = ({}, {}), levels 0..={}\ns_hat = {:.5} (target {:.5}), c_hat = {:.5} (c0 = {:.5})\nmu_hat = {:.4} (prefactor exponent {:.4})\nsplit-sample s: {:.4} / {:.4}\nkernel at origin {:.6e}, refinement {:.1e} (quad_tol {:.0e})\n",
        p.n,
        p.m,
        sol.solved(),
        fit.s_hat,
        s0,
        fit.c_hat,
        p.c0,
        mu,
        tr.mu,
        fit.s_halves.0,
        fit.s_halves.1,
        k00.re,
        k00.refinement,
        cfg.quad_tol
    );
    let result = json!({
        "s_hat": fit.s_hat,
        "s_target": s0,
        "c_hat": fit.c_hat,
        "c0": p.c0,
        "pass": pass,
        "fit": fit,
        "two_parameter_fit": plain,
        "diagnostics": diag,
        "kernel_origin": k00,
        "kernel_converged": k00.refinement <= cfg.quad_tol,
    });
    Ok(Report { command: "fourier".into(), pass, result, summary, csv: vec![("trace.csv".into(), table)] })
}

pub fn verify(cfg: &RunConfig) -> Result<(Report, Vec<(u8, f64)>)> {
    let all = suite::run_all(&cfg.solver())?;
    let focus = suite::solve_case(cfg.n, cfg.m, &cfg.solver())?;
    let fg = suite::exponent_gate(&[&focus])?;
    let row = &fg.detail["cases"][0];
    let mut summary = String::new();
    for g in &all.gates {
        summary.push_str(&g.line());
        summary.push('\n');
    }
    summary.push_str(&format!(
        "(n, m) = ({}, {}): s_hat = {:.5} (target {:.5}), c_hat = {:.5} (c0 = {:.5})\noverall: {}\n",
        cfg.n,
        cfg.m,
        row["s_hat"].as_f64().unwrap_or(f64::NAN),
        row["s_target"].as_f64().unwrap_or(f64::NAN),
        row["c_hat"].as_f64().unwrap_or(f64::NAN),
        row["c0"].as_f64().unwrap_or(f64::NAN),
        if all.pass { "PASS" } else { "FAIL" }
    ));
    let timings = all.gates.iter().map(|g| (g.id, g.seconds)).collect();
    let result = json!({
        "s_hat": row["s_hat"],
        "s_target": row["s_target"],
        "c_hat": row["c_hat"],
        "c0": row["c0"],
        "focus_pass": fg.pass,
        "gates": all.gates,
    });
    Ok((Report { command: "verify".into(), pass: all.pass, result, summary, csv: vec![] }, timings))
}
