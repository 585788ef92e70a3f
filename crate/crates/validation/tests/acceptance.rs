//! The seven acceptance criteria, each printed as one PASS/FAIL line with
//! its measurements.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;

use cfl_lab::catalog::{builtin, BUILTIN_NAMES};
use cfl_lab::power_series::TruncatedSeries;
use cfl_lab::scheme_algebra::{
    ab_dominant_multiplier, amplification, analyze, energy_coefficients, Regime, SchemeKind,
};
use cfl_lab::scheme_constructor::{ab_tangency, build_modified_ab, build_rk_chain, chain_constant};
use cfl_lab::spectral_burgers::{
    exact_state, find_dtmax, initial_condition, run_with, sweep, BurgersConfig, RunStatus, SweepResult,
};
use cfl_lab::stability_domain::{fit_tangency, trace_boundary};
use cfl_lab::transport_models::{
    combined_exponent, reduce_system, sample_directions, stencil_symbol, stencil_tangency, Reduction, Stencil,
    SystemSpec, TangencyOrder,
};

/// Outcome of one criterion: failed sub-checks and informational notes.
#[derive(Default)]
struct Report {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, format!("{what}: got {got:.15e}, want {want:.15e} (tol {tol:e})"));
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

fn criterion_1() -> Report {
    let mut r = Report::default();
    let s = |name: &str| energy_coefficients(&amplification(&builtin(name).unwrap()).unwrap());
    r.close("Euler S_1", s("euler")[1], 1.0, 1e-12);
    r.close("RK2 S_2", s("rk2")[2], 0.25, 1e-12);
    let rk4 = s("rk4");
    r.close("RK4 S_3", rk4[3], -1.0 / 72.0, 1e-12);
    r.close("RK4 S_4", rk4[4], 1.0 / 576.0, 1e-12);
    let s5 = s("scheme5");
    r.check(s5[4] < -1e-12, format!("scheme 5 S_4 = {:e} should be negative", s5[4]));
    r
}

fn criterion_2() -> Report {
    let mut r = Report::default();
    let closed = [
        (2, 0.5, 1.587),
        (3, 0.125, 2.297),
        (4, (3.0 - 2.0 * 2f64.sqrt()) / 8.0, 2.997),
        (5, (5.0 * 5f64.sqrt() - 11.0) / 64.0, 3.687),
    ];
    for (m, beta, constant) in closed {
        let c = build_rk_chain(m).unwrap();
        let b = c.betas.as_ref().unwrap().betas[m];
        r.close(&format!("beta_{m}"), b, beta, 1e-10);
        r.close(&format!("constant m={m}"), chain_constant(m, b), constant, 5e-4);
    }
    for m in [6, 7] {
        let c = build_rk_chain(m).unwrap();
        let reference = c.reference.expect("printed value available");
        r.note(format!(
            "m={m}: computed beta {:.10e} (constant {:.4}), printed {:.10e} (constant {:.4}), {}",
            reference.computed_beta,
            reference.computed_constant,
            reference.printed_beta,
            reference.printed_constant,
            if reference.agrees() { "agrees" } else { "DISAGREES" }
        ));
    }
    let expected: [(&[f64], f64); 3] = [
        (&[1.5, -0.5], -0.25),
        (&[5.0 / 3.0, -5.0 / 6.0, 1.0 / 6.0], -1.0 / 12.0),
        (&[7.0 / 4.0, -21.0 / 20.0, 7.0 / 20.0, -1.0 / 20.0], -1.0 / 40.0),
    ];
    for (k, (alphas, t)) in (1..=3).zip(expected) {
        let c = build_modified_ab(k).unwrap();
        let SchemeKind::AdamsBashforth { alphas: got } = &c.scheme.kind else {
            r.check(false, format!("K={k}: not an Adams-Bashforth scheme"));
            continue;
        };
        r.check(got.len() == alphas.len(), format!("K={k}: {} coefficients", got.len()));
        for (j, (a, b)) in got.iter().zip(alphas.iter()).enumerate() {
            r.close(&format!("K={k} alpha_{j}"), *a, *b, 1e-10);
        }
        let tangency = c.tangency.unwrap();
        r.close(&format!("K={k} T_{}", 2 * k + 2), tangency[2 * k + 1], t, 1e-10);
    }
    r
}

fn criterion_3() -> Report {
    let mut r = Report::default();
    let mut checked = Vec::new();
    for name in BUILTIN_NAMES {
        let scheme = builtin(name).unwrap();
        let a = analyze(&scheme, 1.0, 24).unwrap();
        if a.prediction.regime != Regime::ShrinkingCfl {
            continue;
        }
        let fit = match trace_boundary(&scheme, 1024).and_then(|b| fit_tangency(&b)) {
            Ok(f) => f,
            Err(e) => {
                r.check(false, format!("{name}: {e}"));
                continue;
            }
        };
        let rr = a.prediction.r.unwrap();
        r.check(fit.r == rr, format!("{name}: fitted r = {}, classified r = {rr}", fit.r));
        let expected = match &scheme.kind {
            SchemeKind::AdamsBashforth { alphas } => ab_tangency(alphas, 2 * rr).unwrap()[2 * rr - 1],
            _ => a.prediction.tangency_coefficient().unwrap(),
        };
        let rel = ((fit.coefficient - expected) / expected).abs();
        r.check(rel <= 1e-6, format!("{name}: T_{} = {:e} vs {expected:e} (rel {rel:.1e})", 2 * rr, fit.coefficient));
        checked.push(format!("{name} {rel:.0e}"));
    }
    r.note(format!("relative errors: {}", checked.join(", ")));
    let plf = fit_tangency(&trace_boundary(&builtin("pseudo-leap-frog").unwrap(), 1024).unwrap());
    match plf {
        Ok(fit) => r.check(
            fit.r == 2 && fit.coefficient > 0.0,
            format!("pseudo-leap-frog: r = {}, T = {:e}", fit.r, fit.coefficient),
        ),
        Err(e) => r.check(false, format!("pseudo-leap-frog: {e}")),
    }
    r
}

fn criterion_4() -> Report {
    let mut r = Report::default();
    // deterministic pseudo-random coefficients
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let order = 20;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a: Vec<Complex64> = (0..=order).map(|_| Complex64::new(next(), next())).collect();
        let b: Vec<Complex64> = (0..=order).map(|_| Complex64::new(next(), next())).collect();
        let p = TruncatedSeries::new(a.clone()).mul(&TruncatedSeries::new(b.clone())).unwrap();
        for k in 0..=order {
            let brute: Complex64 = (0..=k).map(|j| a[j] * b[k - j]).sum();
            worst = worst.max((p.coeff(k) - brute).norm());
        }
    }
    r.check(worst <= 1e-14, format!("convolution mismatch {worst:e}"));
    let y = ab_dominant_multiplier(&builtin("ab2").unwrap(), 12).unwrap();
    for (k, e) in [1.0, 1.0, 0.5, -0.25, -0.125].iter().enumerate() {
        let d = (y.coeff(k) - Complex64::new(*e, 0.0)).norm();
        r.check(d <= 1e-12, format!("AB2 multiplier coefficient {k}: off by {d:e}"));
    }
    r
}

fn criterion_5() -> Report {
    let mut r = Report::default();
    let cfg = BurgersConfig::default();
    let targets = [
        ("euler", -2.0),
        ("rk2", -4.0 / 3.0),
        ("ab2", -4.0 / 3.0),
        ("chain3", -6.0 / 5.0),
        ("absch3", -6.0 / 5.0),
        ("chain4", -8.0 / 7.0),
        ("absch4", -8.0 / 7.0),
        ("rk3", -1.0),
        ("rk4", -1.0),
    ];
    let mut results: Vec<SweepResult> = Vec::new();
    for (name, slope) in targets {
        let start = Instant::now();
        match sweep(&builtin(name).unwrap(), &cfg) {
            Ok(res) => {
                let dev = res.fitted_slope - slope;
                r.note(format!(
                    "{name}: slope {:.4} (target {slope:.4}, deviation {dev:+.4}) over n = {}..{}, {:.1} s",
                    res.fitted_slope,
                    res.fit_window.0,
                    res.fit_window.1,
                    start.elapsed().as_secs_f64()
                ));
                r.check(dev.abs() <= 0.07, format!("{name}: slope {:.4} vs {slope:.4}", res.fitted_slope));
                let decreasing = res.rows.windows(2).all(|w| w[1].dt_max <= w[0].dt_max);
                r.check(decreasing, format!("{name}: dt_max not monotone in n"));
                results.push(res);
            }
            Err(e) => r.check(false, format!("{name}: {e}")),
        }
    }
    let rk2 = results.iter().find(|x| x.scheme == "rk2");
    let ab2 = results.iter().find(|x| x.scheme == "ab2");
    if let (Some(rk2), Some(ab2)) = (rk2, ab2) {
        let target = 2f64.powf(1.0 / 3.0);
        for row in rk2.rows.iter().filter(|row| row.n >= 256) {
            if let Some(dt_ab) = ab2.dt_at(row.n) {
                let ratio = row.dt_max / dt_ab;
                r.note(format!("n={}: dt(RK2)/dt(AB2) = {ratio:.4}", row.n));
                r.check(
                    (ratio / target - 1.0).abs() <= 0.10,
                    format!("n={}: RK2/AB2 ratio {ratio:.4} vs {target:.4}", row.n),
                );
            }
        }
    }
    r
}

fn criterion_6() -> Report {
    let mut r = Report::default();
    let n = 128;
    let rk4 = builtin("rk4").unwrap();
    let cfg = BurgersConfig::default();
    let dt_max = find_dtmax(n, &rk4, &cfg).unwrap();
    let run_cfg = BurgersConfig {
        t_final: 0.5,
        ..BurgersConfig::default()
    };
    let out = run_with(&initial_condition(n).unwrap(), dt_max / 4.0, &rk4, &run_cfg).unwrap();
    r.check(out.status == RunStatus::Stable, "run diverged");
    let exact = exact_state(n, 0.5).unwrap();
    let dx = 2.0 / n as f64;
    let l2 = (dx * out.final_state.iter().zip(&exact.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt();
    r.note(format!("dt_max = {dt_max:.6e}, L2 error {l2:.2e}, mean drift {:.1e}", out.max_mean_drift));
    r.check(l2 <= 1e-5, format!("L2 error {l2:e}"));
    r.check(out.max_mean_drift <= 1e-10, format!("mean drift {:e}", out.max_mean_drift));
    r
}

fn criterion_7() -> Report {
    let mut r = Report::default();
    let curve = stencil_symbol(&Stencil::centered(), 512);
    let worst = curve.sigma_dx.iter().map(|s| s.re.abs()).fold(0.0, f64::max);
    r.check(worst == 0.0 || worst < 1e-15, format!("centered symbol real part up to {worst:e}"));
    let up = stencil_tangency(&Stencil::upwind1());
    r.check(up.p == TangencyOrder::Finite(1), format!("upwind p = {:?}", up.p));
    r.close("upwind V_2", up.coefficient, -0.5, 1e-15);
    let cases = [
        (TangencyOrder::Finite(1), 2, Ratio::from_integer(1)),
        (TangencyOrder::Infinite, 2, Ratio::new(4, 3)),
        (TangencyOrder::Finite(3), 2, Ratio::new(10, 9)),
    ];
    for (p, q, want) in cases {
        let got = combined_exponent(p, -1.0, q);
        r.check(got == Ok(want), format!("combined_exponent({p:?}, {q}) = {got:?}, want {want}"));
    }
    let wave = SystemSpec::new(vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])]).unwrap();
    match reduce_system(&wave, &sample_directions(1, 1).unwrap()) {
        Ok(Reduction::Hyperbolic { a_eff }) => r.close("wave a_eff", a_eff, 1.0, 1e-12),
        other => r.check(false, format!("wave system: {other:?}")),
    }
    r
}

#[test]
fn acceptance() {
    let criteria: [(&str, Duration, fn() -> Report); 7] = [
        ("exact algebra", Duration::from_secs(1), criterion_1),
        ("constructor", Duration::from_secs(10), criterion_2),
        ("tangency bridge", Duration::from_secs(30), criterion_3),
        ("series oracles", Duration::from_secs(1), criterion_4),
        ("Burgers sweep", Duration::from_secs(30 * 60), criterion_5),
        ("solver correctness", Duration::from_secs(60), criterion_6),
        ("transport models", Duration::from_secs(1), criterion_7),
    ];
    // written to the raw handle so the report shows even when the test passes
    let mut out = std::io::stdout();
    let mut failed = Vec::new();
    for (idx, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let report = run();
        let elapsed = start.elapsed();
        let pass = report.failures.is_empty();
        let _ = writeln!(
            out,
            "criterion {}: {} {name} ({:.2} s, budget {} s){}",
            idx + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if elapsed > *budget { " over time budget" } else { "" }
        );
        for n in &report.notes {
            let _ = writeln!(out, "    {n}");
        }
        for f in &report.failures {
            let _ = writeln!(out, "    failed: {f}");
        }
        let _ = out.flush();
        if !pass {
            failed.push(idx + 1);
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
