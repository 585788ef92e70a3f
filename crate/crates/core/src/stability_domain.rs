//! Von Neumann stability domains in the complex `ζ = σ δt` plane.
//!
//! The domain is `{ζ : ρ(M(ζ)) ≤ 1}` where `M(ζ)` is the multiplier matrix
//! of the scheme. Its boundary is traced as the curves
//! `{ζ : det(e^{iθ} Id - M(ζ)) = 0}`, `θ ∈ [-π, π]`, and the order of
//! tangency of the boundary to the imaginary axis at the origin is fitted
//! numerically from the traced points.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dd::{self, Cdd, Dd};
use crate::error::{Error, Result};
use crate::polyroots;
use crate::power_series::TruncatedSeries;
use crate::scheme_algebra::{amplification, AmplificationPolynomial, SchemeKind, SchemeSpec};

/// Multiplier matrix `M(ζ)`; every entry is a real polynomial in `ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierMatrix {
    entries: Vec<Vec<Vec<f64>>>,
}

impl MultiplierMatrix {
    /// One-step schemes give the 1×1 matrix `[g(ζ)]`; Adams-Bashforth
    /// schemes their companion form with first row
    /// `(1 + α_0 ζ, α_1 ζ, …, α_K ζ)` and ones on the subdiagonal.
    pub fn from_scheme(scheme: &SchemeSpec) -> Result<Self> {
        let entries = match &scheme.kind {
            SchemeKind::RkChain { .. } | SchemeKind::Tableau { .. } => {
                vec![vec![amplification(scheme)?.betas]]
            }
            SchemeKind::AdamsBashforth { alphas } => {
                let n = alphas.len();
                let mut m = vec![vec![Vec::new(); n]; n];
                for (k, &a) in alphas.iter().enumerate() {
                    m[0][k] = vec![if k == 0 { 1.0 } else { 0.0 }, a];
                }
                for i in 1..n {
                    m[i][i - 1] = vec![1.0];
                }
                m
            }
            SchemeKind::MultiplierMatrix { entries } => entries.clone(),
        };
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    fn max_degree(&self) -> usize {
        self.entries
            .iter()
            .flatten()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, zeta: Complex64) -> DMatrix<Complex64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| {
            self.entries[i][j]
                .iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * zeta + c)
        })
    }

    /// Coefficients of `det(X·Id - M(ζ))` in ascending powers of `X`, each an
    /// exact polynomial in `ζ` (Faddeev-LeVerrier recursion on series).
    pub fn characteristic_polynomial(&self) -> Vec<TruncatedSeries> {
        let n = self.size();
        let order = n * self.max_degree().max(1);
        let a: Vec<Vec<TruncatedSeries>> = self
            .entries
            .iter()
            .map(|row| row.iter().map(|p| TruncatedSeries::from_real(p, order)).collect())
            .collect();
        let zero = TruncatedSeries::zero(order);
        let matmul = |x: &Vec<Vec<TruncatedSeries>>, y: &Vec<Vec<TruncatedSeries>>| {
            let mut out = vec![vec![zero.clone(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = zero.clone();
                    for k in 0..n {
                        acc = (&acc + &x[i][k].mul(&y[k][j]).expect("equal orders")).expect("equal orders");
                    }
                    out[i][j] = acc;
                }
            }
            out
        };
        let mut coeffs = vec![zero.clone(); n + 1];
        coeffs[n] = TruncatedSeries::one(order);
        let mut mk = vec![vec![zero.clone(); n]; n];
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = matmul(&a, &mk);
            for (i, row) in next.iter_mut().enumerate() {
                row[i] = (&row[i] + &coeffs[n - k + 1]).expect("equal orders");
            }
            mk = next;
            let amk = matmul(&a, &mk);
            let mut trace = zero.clone();
            for (i, row) in amk.iter().enumerate() {
                trace = (&trace + &row[i]).expect("equal orders");
            }
            coeffs[n - k] = trace.scale(Complex64::new(-1.0 / k as f64, 0.0));
        }
        coeffs
    }
}

enum RadiusEvaluator {
    OneStep(AmplificationPolynomial),
    Multistep(Vec<TruncatedSeries>),
}

/// Reusable spectral-radius evaluator for one scheme.
pub struct SpectralRadius {
    inner: RadiusEvaluator,
}

impl SpectralRadius {
    pub fn new(scheme: &SchemeSpec) -> Result<Self> {
        let inner = if scheme.is_one_step() {
            RadiusEvaluator::OneStep(amplification(scheme)?)
        } else {
            RadiusEvaluator::Multistep(MultiplierMatrix::from_scheme(scheme)?.characteristic_polynomial())
        };
        Ok(Self { inner })
    }

    /// All eigenvalues of `M(ζ)`.
    pub fn eigenvalues(&self, zeta: Complex64) -> Result<Vec<Complex64>> {
        match &self.inner {
            RadiusEvaluator::OneStep(g) => Ok(vec![g.eval(zeta)]),
            RadiusEvaluator::Multistep(charpoly) => {
                let coeffs: Vec<Complex64> = charpoly.iter().map(|c| c.eval(zeta)).collect();
                polyroots::all_roots(&coeffs)
            }
        }
    }

    pub fn at(&self, zeta: Complex64) -> Result<f64> {
        Ok(self
            .eigenvalues(zeta)?
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max))
    }
}

/// `ρ(M(ζ)) = max_i |λ_i(ζ)|`.
pub fn spectral_radius(scheme: &SchemeSpec, zeta: Complex64) -> Result<f64> {
    SpectralRadius::new(scheme)?.at(zeta)
}

/// Thick-line von Neumann condition `ρ(M(ζ)) ≤ 1 + C δt`.
pub fn is_stable(scheme: &SchemeSpec, zeta: Complex64, growth_rate: f64, dt: f64) -> Result<bool> {
    if !(dt > 0.0) || growth_rate < 0.0 {
        return Err(Error::OutOfRange(format!(
            "need dt > 0 and C >= 0, got dt = {dt}, C = {growth_rate}"
        )));
    }
    Ok(spectral_radius(scheme, zeta)? <= 1.0 + growth_rate * dt)
}

/// `e^{iθ} - 1` without cancellation for small `θ`.
fn exp_i_minus_one(theta: f64) -> Complex64 {
    let half = (0.5 * theta).sin();
    Complex64::new(-2.0 * half * half, theta.sin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub thetas: Vec<f64>,
    pub points: Vec<Complex64>,
}

impl Branch {
    pub fn is_closed(&self) -> bool {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) if self.points.len() > 2 => (a - b).norm() <= 1e-9 * (1.0 + a.norm()),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainBoundary {
    pub scheme_name: String,
    pub branches: Vec<Branch>,
}

impl DomainBoundary {
    /// Boundary points as CSV with columns `theta,re_zeta,im_zeta,branch_id`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,re_zeta,im_zeta,branch_id\n");
        for (id, branch) in self.branches.iter().enumerate() {
            for (t, z) in branch.thetas.iter().zip(&branch.points) {
                let _ = writeln!(out, "{t:.17e},{:.17e},{:.17e},{id}", z.re, z.im);
            }
        }
        out
    }
}

/// Boundary polynomial in `ζ` for a fixed `θ`: `det(e^{iθ} Id - M(ζ))`.
struct BoundaryPolynomial {
    /// `charpoly[k]` is the coefficient of `X^k`, a polynomial in ζ.
    charpoly: Vec<TruncatedSeries>,
    degree: usize,
}

impl BoundaryPolynomial {
    fn new(scheme: &SchemeSpec) -> Result<Self> {
        let charpoly = MultiplierMatrix::from_scheme(scheme)?.characteristic_polynomial();
        let degree = (0..=charpoly[0].order())
            .rev()
            .find(|&j| charpoly.iter().any(|c| c.coeff(j).norm() > 0.0))
            .unwrap_or(0);
        Ok(Self { charpoly, degree })
    }

    /// Coefficients in ascending powers of `ζ`. The constant term is summed
    /// as `Σ_k c_{k,0} (e^{ikθ} - 1) + Σ_k c_{k,0}` so that small `θ` keep
    /// full relative accuracy.
    fn coefficients(&self, theta: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.degree + 1];
        for (k, c) in self.charpoly.iter().enumerate() {
            let x = Complex64::from_polar(1.0, k as f64 * theta);
            let xm1 = exp_i_minus_one(k as f64 * theta);
            out[0] += c.coeff(0) * xm1 + c.coeff(0);
            for (j, slot) in out.iter_mut().enumerate().skip(1) {
                *slot += c.coeff(j) * x;
            }
        }
        out
    }

    /// Same coefficients in double-double precision.
    fn coefficients_dd(&self, theta: f64) -> Vec<Cdd> {
        let one = Cdd::real(Dd::new(1.0));
        let x = dd::exp_i_minus_one(theta).add(one);
        let mut out = vec![Cdd::ZERO; self.degree + 1];
        let mut xk = one;
        let mut constant = Cdd::ZERO;
        for c in &self.charpoly {
            let c0 = Cdd::new(c.coeff(0));
            out[0] = out[0].add(xk.sub(one).mul(c0));
            constant = constant.add(c0);
            for (j, slot) in out.iter_mut().enumerate().skip(1) {
                *slot = slot.add(xk.mul(Cdd::new(c.coeff(j))));
            }
            xk = xk.mul(x);
        }
        out[0] = out[0].add(constant);
        out
    }
}

/// Boundary points with `|θ|` up to here are refined in double-double so that
/// `Re ζ ~ T θ^{2r}` keeps its relative accuracy for large `r`.
const DD_WINDOW: f64 = 0.3;

fn polish_dd(coeffs: &[Cdd], z0: Complex64) -> Complex64 {
    let plain: Vec<Complex64> = coeffs.iter().map(|c| c.to_c64()).collect();
    let mut z = Cdd::new(z0);
    for _ in 0..3 {
        let p = coeffs.iter().rev().fold(Cdd::ZERO, |acc, &c| acc.mul(z).add(c));
        let zf = z.to_c64();
        let dp = plain
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (k, &c)| acc * zf + c * k as f64);
        let step = p.to_c64() / dp;
        if !step.is_finite() {
            break;
        }
        z = z.add_c64(-step);
    }
    z.to_c64()
}

fn ab_closed_form_dd(alphas: &[f64], theta: f64) -> Complex64 {
    let num = dd::exp_i_minus_one(theta);
    let inv = num.add(Cdd::real(Dd::new(1.0))).conj();
    let mut den = Cdd::ZERO;
    let mut power = Cdd::real(Dd::new(1.0));
    for &a in alphas {
        den = den.add(power.scale(a));
        power = power.mul(inv);
    }
    let d = den.to_c64();
    let z0 = num.to_c64() / d;
    let r = num.sub(Cdd::new(z0).mul(den));
    Cdd::new(z0).add_c64(r.to_c64() / d).to_c64()
}

fn ab_closed_form(alphas: &[f64], theta: f64) -> Complex64 {
    let denom: Complex64 = alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| Complex64::from_polar(a, -(k as f64) * theta))
        .sum();
    exp_i_minus_one(theta) / denom
}

/// Matches each previous root with its nearest new root.
fn match_roots(prev: &[Complex64], next: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = prev.len();
    if next.len() != n {
        return None;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut used = vec![false; n];
    for i in 0..n {
        let separation = (0..n)
            .filter(|&j| j != i)
            .map(|j| (prev[i] - prev[j]).norm())
            .fold(f64::INFINITY, f64::min);
        let mut dists: Vec<(usize, f64)> = next.iter().map(|z| (prev[i] - z).norm()).enumerate().collect();
        dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let (best, d) = dists[0];
        if used[best] || d > 0.3 * separation {
            return None;
        }
        if n > 1 && (dists[1].1 - d).abs() <= 1e-9 {
            return None;
        }
        used[best] = true;
        out[i] = next[best];
    }
    Some(out)
}

/// Traces the boundary on a `θ` grid of step `π / n_points`.
///
/// Adams-Bashforth boundaries come from the closed form
/// `ζ(θ) = (e^{iθ} - 1) / Σ α_k e^{-ikθ}`; all other kinds follow every root
/// of `det(e^{iθ} Id - M(ζ)) = 0` by nearest-neighbour continuation from the
/// roots at `θ = 0`, halving the step where the continuation is unclear.
pub fn trace_boundary(scheme: &SchemeSpec, n_points: usize) -> Result<DomainBoundary> {
    if n_points < 64 {
        return Err(Error::OutOfRange(format!("need at least 64 boundary points, got {n_points}")));
    }
    let step = PI / n_points as f64;
    let half_grid: Vec<f64> = (0..=n_points).map(|j| j as f64 * step).collect();

    let half_branches: Vec<Vec<Complex64>> = match &scheme.kind {
        SchemeKind::AdamsBashforth { alphas } => {
            vec![half_grid
                .iter()
                .map(|&t| if t <= DD_WINDOW { ab_closed_form_dd(alphas, t) } else { ab_closed_form(alphas, t) })
                .collect()]
        }
        _ => {
            let poly = BoundaryPolynomial::new(scheme)?;
            let mut tracks = continue_roots(&poly, &half_grid)?;
            for (j, &t) in half_grid.iter().enumerate().take_while(|(_, t)| **t <= DD_WINDOW) {
                let coeffs = poly.coefficients_dd(t);
                for track in tracks.iter_mut() {
                    track[j] = polish_dd(&coeffs, track[j]);
                }
            }
            tracks
        }
    };

    // ζ(-θ) = conj ζ(θ) for real coefficients
    let branches = half_branches
        .into_iter()
        .map(|half| {
            let mut thetas = Vec::with_capacity(2 * n_points + 1);
            let mut points = Vec::with_capacity(2 * n_points + 1);
            for j in (1..=n_points).rev() {
                thetas.push(-half_grid[j]);
                points.push(half[j].conj());
            }
            thetas.extend_from_slice(&half_grid);
            points.extend_from_slice(&half);
            Branch { thetas, points }
        })
        .collect();
    Ok(DomainBoundary {
        scheme_name: scheme.name.clone(),
        branches,
    })
}

fn continue_roots(poly: &BoundaryPolynomial, grid: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let polish = |coeffs: &[Complex64], z: Complex64| polyroots::polish(coeffs, z, 2);
    let c0 = poly.coefficients(grid[0]);
    let mut current: Vec<Complex64> = polyroots::all_roots(&c0)?
        .into_iter()
        .map(|z| polish(&c0, z))
        .collect();
    let n = current.len();
    let mut tracks: Vec<Vec<Complex64>> = current.iter().map(|&z| vec![z]).collect();

    for w in grid.windows(2) {
        let (start, end) = (w[0], w[1]);
        let mut theta = start;
        let mut h = end - start;
        let mut halvings = 0;
        while theta < end {
            let target = (theta + h).min(end);
            let coeffs = poly.coefficients(target);
            let candidate = polyroots::all_roots_from(&coeffs, Some(&current))?;
            match match_roots(&current, &candidate) {
                Some(matched) => {
                    current = matched.into_iter().map(|z| polish(&coeffs, z)).collect();
                    theta = target;
                    if halvings > 0 {
                        h *= 2.0;
                        halvings -= 1;
                    }
                }
                None => {
                    h *= 0.5;
                    halvings += 1;
                    if halvings > 40 {
                        return Err(Error::AmbiguousBranch { theta: target });
                    }
                }
            }
        }
        for (track, &z) in tracks.iter_mut().zip(&current) {
            track.push(z);
        }
    }
    debug_assert!(tracks.iter().all(|t| t.len() == grid.len()) && tracks.len() == n);
    Ok(tracks)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangencyFit {
    pub r: usize,
    /// Fitted `T_{2r}` in `Re ζ(θ) ≈ T_{2r} θ^{2r}`.
    pub coefficient: f64,
    /// Relative residual of the single-term fit that selected `r`.
    pub relative_residual: f64,
}

pub const FIT_WINDOW: f64 = 0.1;
pub const REFINE_WINDOW: f64 = DD_WINDOW;
pub const MAX_FIT_ORDER: usize = 8;
/// Fitted coefficients below this are treated as zero (half the energy
/// coefficient threshold, since `T_{2r} = -S_r/2`).
pub const TANGENCY_TOL: f64 = 0.5e-12;

/// Least-squares tangency order and coefficient at the origin.
///
/// `Re ζ(θ)` over `0 < θ ≤ 0.1` is fitted by even powers `θ^2 … θ^{2(R+3)}`
/// (`R = MAX_FIT_ORDER`); `r` is the first power whose coefficient exceeds
/// [`TANGENCY_TOL`]. The coefficient is then refitted over `θ ≤ 0.3` with
/// the powers up to `θ^{2r+12}`. `relative_residual` is the residual norm of the joint fit over
/// the norm of the data.
///
/// The joint fit needs at least 13 samples with `θ ≤ 0.1`, i.e. a trace
/// with roughly 512 points or more.
pub fn fit_tangency(boundary: &DomainBoundary) -> Result<TangencyFit> {
    let branch = boundary
        .branches
        .iter()
        .find(|b| {
            b.thetas
                .iter()
                .zip(&b.points)
                .filter(|(t, _)| t.abs() <= 1e-12)
                .any(|(_, z)| z.norm() < 1e-6)
        })
        .ok_or(Error::NoTangency)?;

    let window = |w: f64| -> Vec<(f64, f64)> {
        branch
            .thetas
            .iter()
            .zip(&branch.points)
            .filter(|(t, _)| **t > 0.0 && **t <= w * (1.0 + 1e-12))
            .map(|(t, z)| (*t / w, z.re))
            .collect()
    };
    let samples = window(FIT_WINDOW);
    if samples.len() < MAX_FIT_ORDER + 5 {
        return Err(Error::InconclusiveFit {
            relative_residual: f64::INFINITY,
        });
    }
    let signal: f64 = samples.iter().map(|(_, y)| y * y).sum::<f64>().sqrt();
    if signal == 0.0 {
        return Err(Error::InconclusiveFit {
            relative_residual: f64::INFINITY,
        });
    }

    // joint fit over all even powers, then the leading significant one
    let joint = least_squares_even_powers(&samples, FIT_WINDOW, 1, MAX_FIT_ORDER + 3)
        .ok_or(Error::InconclusiveFit { relative_residual: f64::INFINITY })?;
    let relative_residual = joint.1 / signal;
    if relative_residual > 0.1 {
        return Err(Error::InconclusiveFit { relative_residual });
    }
    let r = joint
        .0
        .iter()
        .take(MAX_FIT_ORDER)
        .position(|a| a.abs() > TANGENCY_TOL)
        .map(|i| i + 1)
        .ok_or(Error::InconclusiveFit { relative_residual })?;
    // refit on a wider window where θ^{2r} stands clear of the rounding
    // level; the lower powers stay in as nuisance terms that absorb
    // rounding-level energy coefficients of the scheme
    let (coeffs, _) = least_squares_even_powers(&window(REFINE_WINDOW), REFINE_WINDOW, 1, r + 6)
        .ok_or(Error::InconclusiveFit { relative_residual })?;
    Ok(TangencyFit {
        r,
        coefficient: coeffs[r - 1],
        relative_residual,
    })
}

/// Coefficients `a_j` (unscaled, `j = lo..=hi`) of `Σ a_j θ^{2j}` fitted to
/// samples `(θ / width, y)`, with the residual norm.
fn least_squares_even_powers(samples: &[(f64, f64)], width: f64, lo: usize, hi: usize) -> Option<(Vec<f64>, f64)> {
    let cols = hi - lo + 1;
    if samples.len() < cols + 2 {
        return None;
    }
    let design = DMatrix::from_fn(samples.len(), cols, |i, j| samples[i].0.powi(2 * (lo + j) as i32));
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|(_, y)| *y));
    let svd = design.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-15;
    let sol = svd.solve(&rhs, cutoff).ok()?;
    let residual = (&design * &sol - &rhs).norm();
    let coeffs = sol
        .iter()
        .enumerate()
        .map(|(j, b)| b / width.powi(2 * (lo + j) as i32))
        .collect();
    Some((coeffs, residual))
}

/// An extra curve drawn dashed on top of the stability boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    pub label: String,
    pub points: Vec<Complex64>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

/// SVG 1.1 plot of boundaries (one path per branch) and dashed overlays.
pub fn render_svg(boundaries: &[DomainBoundary], overlays: &[Overlay]) -> String {
    let (width, height, margin) = (800.0, 640.0, 50.0);
    let all = boundaries
        .iter()
        .flat_map(|b| b.branches.iter().flat_map(|br| br.points.iter()))
        .chain(overlays.iter().flat_map(|o| o.points.iter()))
        .filter(|z| z.is_finite());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (-0.1f64, 0.1f64, -0.1f64, 0.1f64);
    for z in all {
        xmin = xmin.min(z.re);
        xmax = xmax.max(z.re);
        ymin = ymin.min(z.im);
        ymax = ymax.max(z.im);
    }
    let pad = 0.05 * (xmax - xmin).max(ymax - ymin);
    let (xmin, xmax, ymin, ymax) = (xmin - pad, xmax + pad, ymin - pad, ymax + pad);
    // equal scaling on both axes
    let scale = ((width - 2.0 * margin) / (xmax - xmin)).min((height - 2.0 * margin) / (ymax - ymin));
    let px = |x: f64| margin + (x - xmin) * scale;
    let py = |y: f64| height - margin - (y - ymin) * scale;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<g stroke="#888" stroke-width="1"><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/></g>"##,
        px(xmin),
        py(0.0),
        px(xmax),
        py(0.0),
        px(0.0),
        py(ymin),
        px(0.0),
        py(ymax)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">Re ζ</text><text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">Im ζ</text>"#,
        px(xmax) - 30.0,
        py(0.0) - 6.0,
        px(0.0) + 6.0,
        py(ymax) + 12.0
    );

    for (idx, boundary) in boundaries.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        for branch in &boundary.branches {
            let mut d = String::new();
            for (k, z) in branch.points.iter().filter(|z| z.is_finite()).enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, px(z.re), py(z.im));
            }
            if branch.is_closed() {
                d.push('Z');
            }
            let _ = writeln!(
                svg,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                d.trim_end()
            );
        }
    }
    for (idx, overlay) in overlays.iter().enumerate() {
        let color = PALETTE[(boundaries.len() + idx) % PALETTE.len()];
        let pts: Vec<String> = overlay
            .points
            .iter()
            .filter(|z| z.is_finite())
            .map(|z| format!("{:.2},{:.2}", px(z.re), py(z.im)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2" stroke-dasharray="6,4"/>"#,
            pts.join(" ")
        );
    }

    let mut y = margin;
    let legend: Vec<(&str, bool)> = boundaries
        .iter()
        .map(|b| (b.scheme_name.as_str(), false))
        .chain(overlays.iter().map(|o| (o.label.as_str(), true)))
        .collect();
    for (idx, (label, dashed)) in legend.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let dash = if *dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{}</text></g>"#,
            width - 170.0,
            width - 140.0,
            width - 132.0,
            y + 4.0,
            xml_escape(label)
        );
        y += 18.0;
    }
    svg.push_str("</svg>\n");
    svg
}

pub(crate) fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
