use cfl_lab::catalog::{builtin, parse_catalog};
use cfl_lab::scheme_algebra::{analyze, energy_coefficients, Regime, SchemeKind};
use cfl_lab::scheme_constructor::{
    ab_order, ab_tangency, build_modified_ab, build_rk_chain, build_taylor_chain, classical_ab, upsilon_sums,
    MAX_CHAIN_STAGES,
};
use cfl_lab::Error;

#[test]
fn chains_zero_every_energy_coefficient_but_the_last() {
    for m in 1..=MAX_CHAIN_STAGES {
        let c = build_rk_chain(m).unwrap();
        let beta = c.betas.as_ref().unwrap();
        let s = energy_coefficients(beta);
        for (l, v) in s.iter().enumerate().take(m).skip(1) {
            assert!(v.abs() < 1e-12, "m={m}: S_{l} = {v:e}");
        }
        assert!(s[m] > 0.0, "m={m}");
        assert!(beta.betas[m] > 0.0);
        assert_eq!(c.prediction.regime, Regime::ShrinkingCfl);
        assert_eq!(c.prediction.r, Some(m));
    }
    assert!(matches!(build_rk_chain(0), Err(Error::OutOfRange(_))));
    assert!(matches!(build_rk_chain(8), Err(Error::OutOfRange(_))));
}

#[test]
fn certificates_reload_as_catalog_schemes() {
    for c in [build_rk_chain(5).unwrap(), build_modified_ab(3).unwrap(), build_taylor_chain(3, 5).unwrap()] {
        let parsed = parse_catalog(&c.certificate()).unwrap();
        assert_eq!(parsed.len(), 1);
        let a = analyze(&parsed[0], 1.0, 24).unwrap();
        assert_eq!(a.prediction.regime, c.prediction.regime);
    }
}

#[test]
fn builtin_chains_match_the_constructor() {
    for m in 3..=4 {
        let built = build_rk_chain(m).unwrap();
        let named = builtin(&format!("scheme{m}")).unwrap();
        assert_eq!(named.kind, built.scheme.kind);
    }
}

#[test]
fn taylor_chain_reproduces_scheme_five() {
    let c = build_taylor_chain(3, 5).unwrap();
    let beta = &c.betas.as_ref().unwrap().betas;
    let want = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 144.0];
    for (a, b) in beta.iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(c.prediction.regime, Regime::LinearCfl);
    let (SchemeKind::RkChain { alphas: a }, SchemeKind::RkChain { alphas: b }) =
        (builtin("scheme5").unwrap().kind, c.scheme.kind)
    else {
        unreachable!()
    };
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn classical_and_modified_adams_bashforth() {
    for q in 1..=4 {
        let a = classical_ab(q).unwrap();
        assert_eq!(ab_order(&a), q);
        let ups = upsilon_sums(&a, q);
        assert!((ups[0] - 1.0).abs() < 1e-14);
    }
    let ab3 = classical_ab(3).unwrap();
    let SchemeKind::AdamsBashforth { alphas } = builtin("ab3").unwrap().kind else { unreachable!() };
    for (x, y) in ab3.iter().zip(&alphas) {
        assert!((x - y).abs() < 1e-14);
    }
    for k in 1..=3 {
        let c = build_modified_ab(k).unwrap();
        let SchemeKind::AdamsBashforth { alphas } = &c.scheme.kind else { unreachable!() };
        let t = ab_tangency(alphas, 2 * k + 2).unwrap();
        for j in 1..=k {
            assert!(t[2 * j - 1].abs() < 1e-10, "K={k}: T_{} = {:e}", 2 * j, t[2 * j - 1]);
        }
        assert!(t[2 * k + 1] < 0.0);
    }
}
