//! Synthesis of shrinking-CFL Runge-Kutta chains and modified
//! Adams-Bashforth schemes.
//!
//! A chain of `m` stages with `S_1 = … = S_{m-1} = 0` satisfies
//! `g(z) g(-z) = 1 + (-1)^m β_m² z^{2m}`, so the roots of `g` are one member
//! of each antipodal pair of roots of the right-hand side. Enumerating those
//! choices (closed under conjugation so that `g` is real) yields every real
//! solution; the normalisation `β_1 = 1` fixes the scale.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::power_series::{TruncatedSeries, DEFAULT_ORDER};
use crate::scheme_algebra::{
    analyze, energy_coefficients, AmplificationPolynomial, SchemeKind, SchemeSpec, StabilityPrediction,
    DEFAULT_GROWTH_RATE,
};

pub const MAX_CHAIN_STAGES: usize = 7;
pub const MAX_AB_STEPS: usize = 4;
const NEWTON_MAX_ITER: usize = 50;
const AB_RESIDUAL_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-7;

/// Printed closed form of `β_m` next to the value computed here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceComparison {
    pub printed_beta: f64,
    pub computed_beta: f64,
    pub printed_constant: f64,
    pub computed_constant: f64,
}

impl ReferenceComparison {
    pub fn relative_difference(&self) -> f64 {
        ((self.computed_beta - self.printed_beta) / self.printed_beta).abs()
    }

    pub fn agrees(&self) -> bool {
        self.relative_difference() <= 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructedScheme {
    pub scheme: SchemeSpec,
    /// Amplification coefficients (chains only).
    pub betas: Option<AmplificationPolynomial>,
    /// `T_1..T_{2K+2}` of the boundary expansion (Adams-Bashforth only).
    pub tangency: Option<Vec<f64>>,
    pub order: usize,
    pub prediction: StabilityPrediction,
    /// Human-readable record of the branch selection.
    pub branch_choices: Vec<String>,
    pub reference: Option<ReferenceComparison>,
}

/// `(1/β_m²)^{1/(2m-1)}`, the shrinking-CFL constant of an `m`-stage chain
/// whose only nonzero energy coefficient beyond `S_0` is `S_m = β_m²`.
pub fn chain_constant(m: usize, beta_m: f64) -> f64 {
    (1.0 / (beta_m * beta_m)).powf(1.0 / (2 * m - 1) as f64)
}

/// Printed `β_m` closed forms of the chain table.
pub fn printed_chain_beta(m: usize) -> Option<f64> {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let s5 = 5f64.sqrt();
    match m {
        1 => Some(1.0),
        2 => Some(0.5),
        3 => Some(0.125),
        4 => Some((3.0 - 2.0 * s2) / 8.0),
        5 => Some((5.0 * s5 - 11.0) / 64.0),
        6 => Some((26.0 - 15.0 * s3) / 16.0),
        7 => {
            // α is the root of α³ - 9α² - α + 1 in (0, 1)
            let cubic = |a: f64| ((a - 9.0) * a - 1.0) * a + 1.0;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if cubic(lo) * cubic(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(-1.0 / 64.0 + 7.0 * lo / 128.0)
        }
        _ => None,
    }
}

fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    // Π (1 - z/z_k), ascending coefficients
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let inv = -r.inv();
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c;
            next[k + 1] += c * inv;
        }
        coeffs = next;
    }
    coeffs
}

/// Newton on `S_ℓ(β) = target_ℓ` for the listed equations and unknown
/// indices; `β` is updated in place.
fn newton_energy(beta: &mut [f64], equations: &[usize], unknowns: &[usize]) -> Option<f64> {
    let n = unknowns.len();
    debug_assert_eq!(n, equations.len());
    let at = |b: &[f64], k: usize| b.get(k).copied().unwrap_or(0.0);
    let residual_of = |b: &[f64]| -> DVector<f64> {
        let s = energy_coefficients(&AmplificationPolynomial::new(b.to_vec()));
        DVector::from_iterator(n, equations.iter().map(|&l| s.get(l).copied().unwrap_or_else(|| {
            // S_ℓ beyond the degree: evaluate directly
            (0..=2 * l)
                .map(|j| {
                    let sign = if (l + j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * at(b, j) * at(b, 2 * l - j)
                })
                .sum()
        })))
    };
    let mut res = residual_of(beta);
    for _ in 0..NEWTON_MAX_ITER {
        let norm = res.amax();
        if norm < 1e-15 {
            break;
        }
        // ∂S_ℓ/∂β_k = 2 (-1)^{ℓ+k} β_{2ℓ-k}
        let jac = DMatrix::from_fn(n, n, |i, j| {
            let (l, k) = (equations[i], unknowns[j]);
            if k > 2 * l {
                0.0
            } else {
                let sign = if (l + k) % 2 == 0 { 2.0 } else { -2.0 };
                sign * at(beta, 2 * l - k)
            }
        });
        let step = jac.lu().solve(&res)?;
        let mut trial = beta.to_vec();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for (j, &k) in unknowns.iter().enumerate() {
                trial[k] = beta[k] - lambda * step[j];
            }
            let r = residual_of(&trial);
            if r.amax() < norm {
                beta.copy_from_slice(&trial);
                res = r;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let r = res.amax();
    r.is_finite().then_some(r)
}

fn chain_from_betas(name: String, betas: &[f64]) -> Result<SchemeSpec> {
    let mut alphas = Vec::with_capacity(betas.len() - 1);
    for l in 1..betas.len() {
        if betas[l - 1] == 0.0 || betas[l] == 0.0 {
            return Err(Error::ConstructionFailed(format!(
                "β_{l} vanishes; the solution has no nested-chain form"
            )));
        }
        alphas.push(betas[l] / betas[l - 1]);
    }
    SchemeSpec::rk_chain(name, alphas)
}

fn finish_chain(
    name: String,
    betas: Vec<f64>,
    branch_choices: Vec<String>,
    reference: Option<ReferenceComparison>,
) -> Result<ConstructedScheme> {
    let scheme = chain_from_betas(name, &betas)?;
    let analysis = analyze(&scheme, DEFAULT_GROWTH_RATE, DEFAULT_ORDER)?;
    Ok(ConstructedScheme {
        betas: Some(analysis.amplification),
        tangency: None,
        order: analysis.order.order,
        prediction: analysis.prediction,
        scheme,
        branch_choices,
        reference,
    })
}

/// The `m`-stage chain with `S_1 = … = S_{m-1} = 0` and the smallest positive
/// `β_m` among all real solutions.
pub fn build_rk_chain(m: usize) -> Result<ConstructedScheme> {
    if !(1..=MAX_CHAIN_STAGES).contains(&m) {
        return Err(Error::OutOfRange(format!(
            "chain length must be in 1..={MAX_CHAIN_STAGES}, got {m}"
        )));
    }
    let name = format!("chain{m}");
    if m == 1 {
        return finish_chain(name, vec![1.0, 1.0], vec!["no free coefficient".into()], None);
    }

    // roots of 1 + (-1)^m b² z^{2m} lie at angles φ_j = π(m+1+2j)/(2m)
    let phis: Vec<f64> = (0..2 * m).map(|j| PI * (m + 1 + 2 * j) as f64 / (2 * m) as f64).collect();
    let wrap = |a: f64| {
        let w = (a + PI).rem_euclid(2.0 * PI) - PI;
        if (w + PI).abs() < 1e-12 { PI } else { w }
    };

    let mut candidates: Vec<(Vec<f64>, String)> = Vec::new();
    for mask in 0u32..(1 << m) {
        let angles: Vec<f64> = (0..m)
            .map(|j| wrap(phis[j + if mask >> j & 1 == 1 { m } else { 0 }]))
            .collect();
        let closed = angles.iter().all(|a| {
            (a.abs() - PI).abs() < 1e-12 || a.abs() < 1e-12 || angles.iter().any(|b| (a + b).abs() < 1e-9)
        });
        if !closed {
            continue;
        }
        let rho = -angles.iter().map(|&a| Complex64::from_polar(1.0, -a)).sum::<Complex64>();
        if rho.re <= 1e-12 || rho.im.abs() > 1e-9 {
            continue;
        }
        let roots: Vec<Complex64> = angles.iter().map(|&a| Complex64::from_polar(rho.re, a)).collect();
        let coeffs = poly_from_roots(&roots);
        let mut betas: Vec<f64> = coeffs.iter().map(|c| c.re).collect();
        betas[0] = 1.0;
        betas[1] = 1.0;
        // refine on the defining equations
        let equations: Vec<usize> = (1..m).collect();
        let unknowns: Vec<usize> = (2..=m).collect();
        newton_energy(&mut betas, &equations, &unknowns);
        let label = format!(
            "root angles/π = [{}]",
            angles.iter().map(|a| format!("{:.4}", a / PI)).collect::<Vec<_>>().join(", ")
        );
        candidates.push((betas, label));
    }

    let mut positive: Vec<&(Vec<f64>, String)> = candidates.iter().filter(|(b, _)| b[m] > 0.0).collect();
    positive.sort_by(|(a, _), (b, _)| {
        a[m].partial_cmp(&b[m])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    });
    let (best, label) = positive
        .first()
        .cloned()
        .ok_or_else(|| Error::ConstructionFailed(format!("no real branch with β_{m} > 0")))?;

    let mut choices = vec![format!(
        "{} real branches, {} with β_{m} > 0: {}",
        candidates.len(),
        positive.len(),
        positive.iter().map(|(b, _)| format!("{:.6e}", b[m])).collect::<Vec<_>>().join(", ")
    )];
    choices.push(format!("kept smallest positive β_{m} ({label})"));

    let reference = printed_chain_beta(m).map(|printed| ReferenceComparison {
        printed_beta: printed,
        computed_beta: best[m],
        printed_constant: chain_constant(m, printed),
        computed_constant: chain_constant(m, best[m]),
    });
    finish_chain(name, best.clone(), choices, reference)
}

/// Chain of `s` stages with `β_ℓ = 1/ℓ!` for `ℓ ≤ p`; the remaining
/// coefficients zero the next `s - p` energy coefficients.
pub fn build_taylor_chain(p: usize, s: usize) -> Result<ConstructedScheme> {
    if p == 0 || p > s || s > 2 * MAX_CHAIN_STAGES {
        return Err(Error::OutOfRange(format!("need 1 <= p <= s <= {}, got p = {p}, s = {s}", 2 * MAX_CHAIN_STAGES)));
    }
    let mut taylor = vec![1.0; s + 1];
    for l in 1..=s {
        taylor[l] = taylor[l - 1] / l as f64;
    }
    let name = format!("taylor{p}_{s}");
    if p == s {
        return finish_chain(name, taylor, vec!["pure Taylor truncation".into()], None);
    }
    // S_ℓ for 2ℓ <= p vanish for the Taylor prefix
    let first = p / 2 + 1;
    let unknowns: Vec<usize> = (p + 1..=s).collect();
    let equations: Vec<usize> = (first..first + unknowns.len()).collect();

    let mut solutions: Vec<Vec<f64>> = Vec::new();
    for start in [1.0, 0.5, 2.0, -1.0, 0.1, 10.0, -0.5, 0.0] {
        let mut beta = taylor.clone();
        for &k in &unknowns {
            beta[k] = taylor[k] * start;
        }
        if let Some(res) = newton_energy(&mut beta, &equations, &unknowns) {
            if res < 1e-13 && !solutions.iter().any(|b| b.iter().zip(&beta).all(|(x, y)| (x - y).abs() < 1e-9)) {
                solutions.push(beta);
            }
        }
    }
    solutions.retain(|b| b[s] > 0.0);
    solutions.sort_by(|a, b| {
        a[s].partial_cmp(&b[s])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
    });
    let best = solutions.first().cloned().ok_or_else(|| {
        Error::ConstructionFailed(format!("no real solution of S_{first}..S_{} = 0 with β_{s} > 0", first + unknowns.len() - 1))
    })?;
    let choices = vec![format!(
        "zeroed S_{first}..S_{}; {} positive solution(s) found",
        first + unknowns.len() - 1,
        solutions.len()
    )];
    finish_chain(name, best, choices, None)
}

/// `Υ_ℓ = Σ_k k^ℓ α_k` for `ℓ = 0..=max_ell`.
pub fn upsilon_sums(alphas: &[f64], max_ell: usize) -> Vec<f64> {
    (0..=max_ell)
        .map(|l| {
            alphas
                .iter()
                .enumerate()
                .map(|(k, &a)| (k as f64).powi(l as i32) * a)
                .sum()
        })
        .collect()
}

/// Order of an Adams-Bashforth scheme: the largest `m` with
/// `Υ_ℓ = (-1)^ℓ/(ℓ+1)` for every `ℓ < m`.
pub fn ab_order(alphas: &[f64]) -> usize {
    let max = alphas.len() + 4;
    let ups = upsilon_sums(alphas, max);
    ups.iter()
        .enumerate()
        .take_while(|(l, u)| {
            let target = if l % 2 == 0 { 1.0 } else { -1.0 } / (*l as f64 + 1.0);
            (*u - target).abs() <= 1e-12 * (1.0 + target.abs())
        })
        .count()
}

/// Classical Adams-Bashforth coefficients of order `q` (`q` steps).
pub fn classical_ab(q: usize) -> Result<Vec<f64>> {
    if q == 0 {
        return Err(Error::OutOfRange("order must be at least 1".into()));
    }
    let vander = DMatrix::from_fn(q, q, |l, k| (k as f64).powi(l as i32));
    let rhs = DVector::from_fn(q, |l, _| if l % 2 == 0 { 1.0 } else { -1.0 } / (l as f64 + 1.0));
    let sol = vander
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::ConstructionFailed("singular Vandermonde system".into()))?;
    Ok(sol.iter().copied().collect())
}

/// `T_1..T_{max_order}` of `ζ(θ) = (e^{iθ} - 1) / Σ α_k e^{-ikθ}`: even
/// indices carry the real parts, odd indices the imaginary parts.
pub fn ab_tangency(alphas: &[f64], max_order: usize) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::InvalidScheme("no Adams-Bashforth coefficients".into()));
    }
    let ups0: f64 = alphas.iter().sum();
    if (ups0 - 1.0).abs() > 1e-10 {
        return Err(Error::Inconsistent(format!("Υ_0 = {ups0} differs from 1")));
    }
    let t = max_order.max(1);
    let mut numerator = TruncatedSeries::exp_i_theta(1.0, t).into_coeffs();
    numerator[0] = Complex64::new(0.0, 0.0);
    let numerator = TruncatedSeries::new(numerator);
    let mut denominator = TruncatedSeries::zero(t);
    for (k, &a) in alphas.iter().enumerate() {
        let term = TruncatedSeries::exp_i_theta(-(k as f64), t).scale(Complex64::new(a, 0.0));
        denominator = (&denominator + &term)?;
    }
    let zeta = numerator.div(&denominator)?;
    Ok((1..=max_order)
        .map(|j| if j % 2 == 0 { zeta.coeff(j).re } else { zeta.coeff(j).im })
        .collect())
}

fn modified_ab_residual(alphas: &[f64]) -> Result<DVector<f64>> {
    let k = alphas.len() - 1;
    let ups0: f64 = alphas.iter().sum();
    let mut res = vec![ups0 - 1.0];
    // ζ(θ) expansion assumes Υ_0 = 1; enforce it on the evaluation copy only
    let normalised: Vec<f64> = alphas.iter().map(|a| a / ups0).collect();
    let t = ab_tangency(&normalised, 2 * k)?;
    for j in 1..=k {
        res.push(t[2 * j - 1]);
    }
    Ok(DVector::from_vec(res))
}

/// Modified Adams-Bashforth scheme with `K+1` coefficients solving
/// `Υ_0 = 1`, `T_2 = … = T_{2K} = 0`.
pub fn build_modified_ab(k: usize) -> Result<ConstructedScheme> {
    if !(1..=MAX_AB_STEPS).contains(&k) {
        return Err(Error::OutOfRange(format!("K must be in 1..={MAX_AB_STEPS}, got {k}")));
    }
    let mut alphas = classical_ab(k + 1)?;
    let mut res = modified_ab_residual(&alphas)?;
    let mut iterations = 0;
    while res.amax() >= AB_RESIDUAL_TOL * 1e-2 && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let n = k + 1;
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut shifted = alphas.clone();
            let h = FD_STEP * (1.0 + alphas[j].abs());
            shifted[j] += h;
            let r = modified_ab_residual(&shifted)?;
            jac.set_column(j, &((r - &res) / h));
        }
        let step = match jac.lu().solve(&res) {
            Some(s) => s,
            None => break,
        };
        let norm = res.amax();
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = alphas.iter().zip(step.iter()).map(|(a, s)| a - lambda * s).collect();
            let r = modified_ab_residual(&trial)?;
            if r.amax() < norm {
                alphas = trial;
                res = r;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = res.amax();
    if !(residual < AB_RESIDUAL_TOL) {
        return Err(Error::ConstructionFailed(format!(
            "modified Adams-Bashforth Newton stalled at residual {residual:e} after {iterations} iterations"
        )));
    }
    let scheme = SchemeSpec::adams_bashforth(format!("absch{}", k + 1), alphas.clone())?;
    let tangency = ab_tangency(&alphas, 2 * k + 2)?;
    let analysis = analyze(&scheme, DEFAULT_GROWTH_RATE, DEFAULT_ORDER)?;
    Ok(ConstructedScheme {
        scheme,
        betas: None,
        tangency: Some(tangency),
        order: ab_order(&alphas),
        prediction: analysis.prediction,
        branch_choices: vec![format!(
            "Newton from classical AB{} converged in {iterations} iteration(s), residual {residual:.1e}",
            k + 1
        )],
        reference: None,
    })
}

impl ConstructedScheme {
    /// Catalog record followed by a commented certificate block.
    pub fn certificate(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", crate::catalog::format_scheme(&self.scheme));
        let _ = writeln!(out, "# scheme: {} ({})", self.scheme.name, self.scheme.kind.label());
        let _ = writeln!(out, "# order: {}", self.order);
        if let Some(beta) = &self.betas {
            for (l, b) in beta.betas.iter().enumerate() {
                let _ = writeln!(out, "# beta_{l} = {b:.16e}");
            }
        }
        if let SchemeKind::AdamsBashforth { alphas } = &self.scheme.kind {
            for (k, a) in alphas.iter().enumerate() {
                let _ = writeln!(out, "# alpha_{k} = {a:.16e}");
            }
        }
        let limit = match &self.scheme.kind {
            SchemeKind::AdamsBashforth { alphas } => 2 * alphas.len(),
            _ => self.prediction.energy_coeffs.len() - 1,
        };
        for (l, s) in self.prediction.energy_coeffs.iter().enumerate().take(limit + 1) {
            let _ = writeln!(out, "# S_{l} = {s:.16e}");
        }
        if let Some(t) = &self.tangency {
            for (j, v) in t.iter().enumerate() {
                let _ = writeln!(out, "# T_{} = {v:.16e}", j + 1);
            }
        }
        let _ = writeln!(out, "# regime: {}", self.prediction.regime.label());
        if let (Some(e), Some(c)) = (self.prediction.exponent, self.prediction.constant_factor) {
            let _ = writeln!(
                out,
                "# predicted: dt <= {c:.6} * (dx/a)^({}) at C = {}",
                e,
                self.prediction.growth_rate
            );
        }
        for choice in &self.branch_choices {
            let _ = writeln!(out, "# branch: {choice}");
        }
        if let Some(r) = &self.reference {
            let verdict = if r.agrees() { "agrees" } else { "DISAGREES" };
            let _ = writeln!(
                out,
                "# table: printed beta = {:.12e} (constant {:.6}), computed beta = {:.12e} (constant {:.6}): {verdict}, computed/printed = {:.9}",
                r.printed_beta,
                r.printed_constant,
                r.computed_beta,
                r.computed_constant,
                r.computed_beta / r.printed_beta
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme_algebra::{amplification, Regime};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn betas(c: &ConstructedScheme) -> Vec<f64> {
        c.betas.as_ref().unwrap().betas.clone()
    }

    #[test]
    fn chain_examples() {
        let e = build_rk_chain(1).unwrap();
        assert_eq!(betas(&e), vec![1.0, 1.0]);
        assert_eq!(e.prediction.exponent_f64(), 2.0);

        let c2 = build_rk_chain(2).unwrap();
        assert!(close(betas(&c2)[2], 0.5, 1e-14));
        match &c2.scheme.kind {
            SchemeKind::RkChain { alphas } => {
                assert!(close(alphas[0], 1.0, 1e-14) && close(alphas[1], 0.5, 1e-14))
            }
            _ => panic!(),
        }

        let c3 = build_rk_chain(3).unwrap();
        assert!(close(betas(&c3)[3], 0.125, 1e-14));
        assert!(close(chain_constant(3, 0.125), 2.297, 5e-4));

        let c4 = build_rk_chain(4).unwrap();
        let s2 = 2f64.sqrt();
        let b = betas(&c4);
        assert!(close(b[3], (2.0 - s2) / 4.0, 1e-13));
        assert!(close(b[4], (3.0 - 2.0 * s2) / 8.0, 1e-13));
        match &c4.scheme.kind {
            SchemeKind::RkChain { alphas } => {
                let expected = [1.0, 0.5, (2.0 - s2) / 2.0, (2.0 - s2) / 4.0];
                for (a, e) in alphas.iter().zip(expected) {
                    assert!(close(*a, e, 1e-13));
                }
            }
            _ => panic!(),
        }

        let c5 = build_rk_chain(5).unwrap();
        assert!(close(betas(&c5)[5], (5.0 * 5f64.sqrt() - 11.0) / 64.0, 1e-13));
        assert!(build_rk_chain(0).is_err());
        assert!(build_rk_chain(8).is_err());
    }

    #[test]
    fn chain_round_trip_energy() {
        for m in 1..=7 {
            let c = build_rk_chain(m).unwrap();
            let b = betas(&c);
            let s = energy_coefficients(&amplification(&c.scheme).unwrap());
            for l in 1..m {
                assert!(s[l].abs() < 1e-10, "m={m} S_{l}={}", s[l]);
            }
            assert!(close(s[m], b[m] * b[m], 1e-10));
            assert!(b[m] > 0.0);
            assert_eq!(c.prediction.r, Some(m));
            assert_eq!(c.prediction.regime, Regime::ShrinkingCfl);
        }
    }

    #[test]
    fn late_table_entries() {
        let c7 = build_rk_chain(7).unwrap();
        assert!(c7.reference.unwrap().agrees());
        let c6 = build_rk_chain(6).unwrap();
        let r = c6.reference.unwrap();
        assert!(!r.agrees());
        assert!(close(r.printed_constant, 3.395, 1e-3));
        assert!(c6.certificate().contains("DISAGREES"));
    }

    #[test]
    fn taylor_chains() {
        let s5 = build_taylor_chain(3, 5).unwrap();
        let b = betas(&s5);
        assert!(close(b[4], 1.0 / 24.0, 1e-14));
        assert!(close(b[5], 1.0 / 144.0, 1e-14));
        assert_eq!(s5.prediction.regime, Regime::LinearCfl);
        assert_eq!(s5.order, 4);

        let s3 = build_taylor_chain(2, 3).unwrap();
        assert!(close(betas(&s3)[3], 0.125, 1e-14));

        let t4 = build_taylor_chain(4, 4).unwrap();
        assert!(close(betas(&t4)[4], 1.0 / 24.0, 1e-15));
        assert!(build_taylor_chain(4, 3).is_err());
    }

    #[test]
    fn upsilon_examples() {
        let u = upsilon_sums(&[1.5, -0.5], 2);
        assert_eq!(u[0], 1.0);
        assert_eq!(u[1], -0.5);
        assert_eq!(ab_order(&[1.5, -0.5]), 2);
        let u = upsilon_sums(&[5.0 / 3.0, -5.0 / 6.0, 1.0 / 6.0], 2);
        assert!(close(u[1], -0.5, 1e-15) && close(u[2], -1.0 / 6.0, 1e-15));
        assert_eq!(ab_order(&[5.0 / 3.0, -5.0 / 6.0, 1.0 / 6.0]), 2);
        assert_eq!(ab_order(&[1.0]), 1);
        assert_eq!(ab_order(&classical_ab(4).unwrap()), 4);
    }

    #[test]
    fn tangency_examples() {
        let t = ab_tangency(&[1.5, -0.5], 4).unwrap();
        assert!(close(t[1], 0.0, 1e-15) && close(t[3], -0.25, 1e-14));
        let t = ab_tangency(&[5.0 / 3.0, -5.0 / 6.0, 1.0 / 6.0], 6).unwrap();
        assert!(t[1].abs() < 1e-14 && t[3].abs() < 1e-14 && close(t[5], -1.0 / 12.0, 1e-14));
        let t = ab_tangency(&[7.0 / 4.0, -21.0 / 20.0, 7.0 / 20.0, -1.0 / 20.0], 8).unwrap();
        assert!(close(t[7], -1.0 / 40.0, 1e-13));
        // odd coefficients start with T_1 = 1 (ζ ≈ iθ)
        assert!(close(t[0], 1.0, 1e-14));
        assert!(matches!(ab_tangency(&[1.0, 0.5], 4), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn modified_ab_examples() {
        let expected: [&[f64]; 3] = [
            &[1.5, -0.5],
            &[5.0 / 3.0, -5.0 / 6.0, 1.0 / 6.0],
            &[7.0 / 4.0, -21.0 / 20.0, 7.0 / 20.0, -1.0 / 20.0],
        ];
        for (k, e) in (1..=3).zip(expected) {
            let c = build_modified_ab(k).unwrap();
            match &c.scheme.kind {
                SchemeKind::AdamsBashforth { alphas } => {
                    for (a, b) in alphas.iter().zip(e) {
                        assert!(close(*a, *b, 1e-10), "K={k}: {a} vs {b}");
                    }
                }
                _ => panic!(),
            }
            assert_eq!(c.order, 2);
            assert_eq!(c.prediction.r, Some(k + 1));
        }
        let c4 = build_modified_ab(4).unwrap();
        let t = c4.tangency.unwrap();
        for j in 1..=4 {
            assert!(t[2 * j - 1].abs() < 1e-10);
        }
        assert!(t[9] < 0.0);
        assert!(build_modified_ab(5).is_err());
    }

    #[test]
    fn ab_tangency_matches_series_energy() {
        for k in 1..=3 {
            let c = build_modified_ab(k).unwrap();
            let r = c.prediction.r.unwrap();
            let from_energy = c.prediction.tangency_coefficient().unwrap();
            let t = c.tangency.as_ref().unwrap()[2 * r - 1];
            assert!(close(from_energy, t, 1e-10), "K={k}: {from_energy} vs {t}");
        }
    }

    #[test]
    fn certificate_parses_back() {
        let c = build_rk_chain(4).unwrap();
        let text = c.certificate();
        let parsed = crate::catalog::parse_catalog(&text).unwrap();
        assert_eq!(parsed[0], c.scheme);
        assert!(text.contains("# regime: shrinking CFL"));
    }
}
