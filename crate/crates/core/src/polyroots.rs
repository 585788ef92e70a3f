//! Simultaneous all-roots iteration for complex polynomials.
//!
//! Uses the Aberth-Ehrlich correction (a Durand-Kerner style simultaneous
//! scheme with cubic local convergence). Coefficients are given in ascending
//! order: `coeffs[k]` multiplies `z^k`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Backward-error tolerance: a root is accepted once
/// `|p(z)| <= tol · Σ |c_k| |z|^k`.
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 200;

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn abs_horner(coeffs: &[Complex64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

/// Strips exactly-zero low and high coefficients. Returns the trimmed slice
/// and the multiplicity of the root at zero.
fn trim(coeffs: &[Complex64]) -> (&[Complex64], usize) {
    let zero = Complex64::new(0.0, 0.0);
    let hi = coeffs.iter().rposition(|&c| c != zero).map_or(0, |i| i + 1);
    let lo = coeffs[..hi].iter().position(|&c| c != zero).unwrap_or(0);
    (&coeffs[lo..hi], lo)
}

/// Initial guesses on a circle whose radius is the geometric mean of the
/// root moduli (`|c_0/c_n|^{1/n}`), rotated off the real axis.
fn circle_guesses(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let radius = (coeffs[0].norm() / coeffs[n].norm()).powf(1.0 / n as f64);
    let radius = if radius.is_finite() && radius > 0.0 { radius } else { 1.0 };
    (0..n)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect()
}

/// All roots of the polynomial, repeated according to multiplicity.
pub fn all_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    all_roots_from(coeffs, None)
}

/// Like [`all_roots`], warm-started from `guesses` when their count matches
/// the degree of the trimmed polynomial.
pub fn all_roots_from(coeffs: &[Complex64], guesses: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
    if coeffs.is_empty() {
        return Err(Error::OutOfRange("polynomial without coefficients".into()));
    }
    let (poly, zero_roots) = trim(coeffs);
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
    if poly.len() <= 1 {
        return Ok(roots);
    }
    let degree = poly.len() - 1;
    if degree == 1 {
        roots.push(-poly[0] / poly[1]);
        return Ok(roots);
    }

    let mut z = match guesses {
        Some(g) if g.len() == degree + zero_roots => {
            // drop the guesses closest to zero when zero roots were split off
            let mut g = g.to_vec();
            g.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap_or(std::cmp::Ordering::Equal));
            g.truncate(degree);
            g
        }
        Some(g) if g.len() == degree => g.to_vec(),
        _ => circle_guesses(poly),
    };
    // coincident starting points stall the correction
    for i in 0..degree {
        for j in 0..i {
            if z[i] == z[j] {
                let bump = Complex64::new(1e-8, 1e-8) * (1.0 + z[i].norm());
                z[i] += bump;
            }
        }
    }

    let mut converged = vec![false; degree];
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        worst = 0.0;
        for i in 0..degree {
            let (p, dp) = horner(poly, z[i]);
            let bound = abs_horner(poly, z[i].norm());
            let residual = p.norm() / bound.max(f64::MIN_POSITIVE);
            if residual <= RESIDUAL_TOL * 1e-3 || p.norm() == 0.0 {
                converged[i] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let denom = Complex64::new(1.0, 0.0) - ratio * repulsion;
            let delta = if denom.norm() > 0.0 && denom.is_finite() { ratio / denom } else { ratio };
            if delta.is_finite() {
                z[i] -= delta;
            }
            let (p_new, _) = horner(poly, z[i]);
            let res_new = p_new.norm() / abs_horner(poly, z[i].norm()).max(f64::MIN_POSITIVE);
            converged[i] = res_new <= RESIDUAL_TOL && delta.norm() <= 1e-10 * (1.0 + z[i].norm());
            worst = worst.max(res_new);
        }
        if converged.iter().all(|&c| c) {
            roots.extend(z);
            return Ok(roots);
        }
    }
    // multiple roots converge linearly; accept once the backward error is small
    if worst <= RESIDUAL_TOL {
        roots.extend(z);
        return Ok(roots);
    }
    Err(Error::NoConvergence {
        what: "polynomial root iteration",
        iterations: MAX_SWEEPS,
        residual: worst,
    })
}

/// One or two Newton corrections on a single root; used to polish roots
/// whose tiny components matter (e.g. real parts near the imaginary axis).
pub fn polish(coeffs: &[Complex64], mut z: Complex64, steps: usize) -> Complex64 {
    for _ in 0..steps {
        let (p, dp) = horner(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        if !next.is_finite() {
            break;
        }
        z = next;
    }
    z
}
