use cfl_lab::catalog::builtin;
use cfl_lab::spectral_burgers::{
    exact_state, find_dtmax, initial_condition, run_with, sweep, Bootstrap, BurgersConfig, RunStatus,
};

#[test]
fn explosion_around_the_maximal_step() {
    let rk2 = builtin("rk2").unwrap();
    let cfg = BurgersConfig::default();
    let n = 256;
    let dt = find_dtmax(n, &rk2, &cfg).unwrap();
    let u0 = initial_condition(n).unwrap();
    let below = run_with(&u0, 0.97 * dt, &rk2, &cfg).unwrap();
    assert_eq!(below.status, RunStatus::Stable);
    let above = run_with(&u0, 1.03 * dt, &rk2, &cfg).unwrap();
    assert_eq!(above.status, RunStatus::Diverged);
    // with a looser criterion the run continues until the profile is destroyed
    let loose = BurgersConfig { k_tv: 5.0, ..cfg.clone() };
    let wrecked = run_with(&u0, 1.1 * dt, &rk2, &loose).unwrap();
    assert_eq!(wrecked.status, RunStatus::Diverged);
    assert!(wrecked.final_tv > 5.0 * u0.total_variation());
}

#[test]
fn bootstrap_modes_agree() {
    let ab2 = builtin("ab2").unwrap();
    let rk4_boot = BurgersConfig::default();
    let exact_boot = BurgersConfig {
        bootstrap: Bootstrap::Exact,
        ..BurgersConfig::default()
    };
    let a = find_dtmax(64, &ab2, &rk4_boot).unwrap();
    let b = find_dtmax(64, &ab2, &exact_boot).unwrap();
    assert!((a / b - 1.0).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn short_ladder_sweeps_decrease() {
    let cfg = BurgersConfig {
        n_list: vec![16, 32, 64, 128],
        ..BurgersConfig::default()
    };
    for name in ["rk4", "ab2", "chain3"] {
        let res = sweep(&builtin(name).unwrap(), &cfg).unwrap();
        assert_eq!(res.rows.len(), 4);
        assert!(res.rows.windows(2).all(|w| w[1].dt_max <= w[0].dt_max), "{name}");
        assert_eq!(res.fit_window, (64, 128));
        let csv = res.to_csv();
        assert!(csv.lines().next().unwrap().starts_with("scheme,n,dt_max"));
        assert!(csv.contains("fitted_slope ="));
    }
}

#[test]
fn adams_bashforth_three_escapes_the_shrinking_regime() {
    let cfg = BurgersConfig::default();
    let n = 128;
    let dts: Vec<f64> = ["ab2", "ab3", "ab4"]
        .iter()
        .map(|s| find_dtmax(n, &builtin(s).unwrap(), &cfg).unwrap())
        .collect();
    // ab2 is tangent to the imaginary axis; ab3 and ab4 cover a segment of it,
    // ab4 a shorter one
    assert!(dts[1] > dts[0] && dts[1] > dts[2], "{dts:?}");
}

#[test]
fn spectral_convergence_of_rk4_runs() {
    let rk4 = builtin("rk4").unwrap();
    let cfg = BurgersConfig {
        t_final: 0.5,
        ..BurgersConfig::default()
    };
    let mut errors = Vec::new();
    for n in [32, 64, 128] {
        let out = run_with(&initial_condition(n).unwrap(), 2e-4, &rk4, &cfg).unwrap();
        let exact = exact_state(n, 0.5).unwrap();
        let dx = 2.0 / n as f64;
        let e = (dx * out.final_state.iter().zip(&exact.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt();
        errors.push(e);
    }
    assert!(errors[1] < errors[0] && errors[2] < 1e-6, "{errors:?}");
}

#[test]
fn snapshot_csv_layout() {
    let u = initial_condition(16).unwrap();
    let csv = u.to_csv();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("x,u\n-1.0"));
}
