//! Finite-difference symbols, combined space-time CFL exponents and the
//! reduction of multi-component transport systems to a scalar speed.
//!
//! A stencil approximates `∂x` at unit spacing by `Σ_j w_j u(x + o_j δx)`;
//! its symbol is `σδx(θ) = Σ_j w_j e^{i o_j θ}`. Near the origin
//! `σδx(θ) = iθ + V_{2p} θ^{2p} + …`, and `V_{2p} < 0` means the stencil
//! damps high modes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};

pub const MOMENT_TOL: f64 = 1e-12;
/// Highest even moment examined before declaring the symbol purely imaginary.
pub const MAX_EVEN_ORDER: u32 = 12;
pub const DEFAULT_DIRECTIONS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub label: String,
    pub offsets: Vec<i32>,
    pub weights: Vec<f64>,
}

impl Stencil {
    /// Checks `Σ w = 0` and `Σ o w = 1`.
    pub fn new(label: impl Into<String>, offsets: Vec<i32>, weights: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if offsets.is_empty() || offsets.len() != weights.len() {
            return Err(Error::InvalidScheme(format!(
                "stencil `{label}` needs one weight per offset ({} offsets, {} weights)",
                offsets.len(),
                weights.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        let first: f64 = offsets.iter().zip(&weights).map(|(&o, w)| o as f64 * w).sum();
        if sum.abs() > 1e-12 || (first - 1.0).abs() > 1e-12 {
            return Err(Error::Inconsistent(format!(
                "stencil `{label}` has Σw = {sum} and Σ o·w = {first}; need 0 and 1"
            )));
        }
        Ok(Self { label, offsets, weights })
    }

    pub fn centered() -> Self {
        Self::new("centered", vec![1, -1], vec![0.5, -0.5]).expect("valid")
    }

    /// `u(x+δx) - u(x)`, dissipative for the operator `∂x`.
    pub fn upwind1() -> Self {
        Self::new("upwind1", vec![1, 0], vec![1.0, -1.0]).expect("valid")
    }

    /// `u(x) - u(x-δx)`, the mirror of [`Stencil::upwind1`].
    pub fn downwind1() -> Self {
        Self::new("downwind1", vec![0, -1], vec![1.0, -1.0]).expect("valid")
    }

    /// Third-order upwind-biased four-point stencil.
    pub fn upwind3() -> Self {
        Self::new(
            "upwind3",
            vec![2, 1, 0, -1],
            vec![-1.0 / 6.0, 1.0, -0.5, -1.0 / 3.0],
        )
        .expect("valid")
    }

    /// Fourth-order upwind-biased five-point stencil.
    pub fn upwind4() -> Self {
        Self::new(
            "upwind4",
            vec![-1, 0, 1, 2, 3],
            vec![-3.0 / 12.0, -10.0 / 12.0, 18.0 / 12.0, -6.0 / 12.0, 1.0 / 12.0],
        )
        .expect("valid")
    }

    pub fn builtin(label: &str) -> Result<Self> {
        match label {
            "centered" => Ok(Self::centered()),
            "upwind1" => Ok(Self::upwind1()),
            "downwind1" => Ok(Self::downwind1()),
            "upwind3" => Ok(Self::upwind3()),
            "upwind4" => Ok(Self::upwind4()),
            _ => Err(Error::InvalidScheme(format!(
                "unknown stencil `{label}` (built-ins: centered, upwind1, downwind1, upwind3, upwind4)"
            ))),
        }
    }

    pub fn symbol_at(&self, theta: f64) -> Complex64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&o, &w)| Complex64::from_polar(w, o as f64 * theta))
            .sum()
    }

    /// `M_k = Σ w o^k`.
    pub fn moment(&self, k: u32) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(&o, &w)| w * (o as f64).powi(k as i32))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolCurve {
    pub label: String,
    pub thetas: Vec<f64>,
    pub sigma_dx: Vec<Complex64>,
}

impl SymbolCurve {
    /// Columns `theta,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,re,im\n");
        for (t, s) in self.thetas.iter().zip(&self.sigma_dx) {
            let _ = writeln!(out, "{t:.17e},{:.17e},{:.17e}", s.re, s.im);
        }
        out
    }

    /// The curve scaled into the `ζ` plane, `ζ = ν σδx`, with `ν = δt/δx`.
    pub fn scaled(&self, nu: f64) -> Vec<Complex64> {
        self.sigma_dx.iter().map(|s| s * nu).collect()
    }
}

fn theta_grid(n_points: usize) -> Vec<f64> {
    let n = n_points.max(2);
    (0..=2 * n).map(|j| -PI + PI * j as f64 / n as f64).collect()
}

/// Symbol on `2 n_points + 1` uniformly spaced `θ ∈ [-π, π]`.
pub fn stencil_symbol(stencil: &Stencil, n_points: usize) -> SymbolCurve {
    let thetas = theta_grid(n_points);
    let sigma_dx = thetas.iter().map(|&t| stencil.symbol_at(t)).collect();
    SymbolCurve {
        label: stencil.label.clone(),
        thetas,
        sigma_dx,
    }
}

/// Symbol of exact Fourier differentiation, `iθ`.
pub fn spectral_symbol(n_points: usize) -> SymbolCurve {
    let thetas = theta_grid(n_points);
    let sigma_dx = thetas.iter().map(|&t| Complex64::new(0.0, t)).collect();
    SymbolCurve {
        label: "spectral".into(),
        thetas,
        sigma_dx,
    }
}

/// Half-order `p` of the first even power with a nonzero real coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangencyOrder {
    Finite(u32),
    /// Purely imaginary symbol (centered and spectral differentiation).
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilTangency {
    pub p: TangencyOrder,
    /// `V_{2p}`; zero for the infinite order.
    pub coefficient: f64,
}

/// `V_{2m} = (-1)^m M_{2m} / (2m)!` for the first even moment that does not
/// vanish.
pub fn stencil_tangency(stencil: &Stencil) -> StencilTangency {
    let mut factorial = 1.0;
    for m in 1..=MAX_EVEN_ORDER / 2 {
        factorial *= ((2 * m - 1) * 2 * m) as f64;
        let moment = stencil.moment(2 * m);
        if moment.abs() > MOMENT_TOL {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            return StencilTangency {
                p: TangencyOrder::Finite(m),
                coefficient: sign * moment / factorial,
            };
        }
    }
    StencilTangency {
        p: TangencyOrder::Infinite,
        coefficient: 0.0,
    }
}

/// CFL exponent of a time scheme with tangency order `q` combined with a
/// space discretization of order `p`:
/// `1` if `p ≤ q`, `q(2p-1)/(p(2q-1))` if `p ≥ q`, `2q/(2q-1)` if `p = ∞`.
///
/// `v_2p` is the space tangency coefficient; a positive value (downwind
/// bias) is unconditionally unstable.
pub fn combined_exponent(p: TangencyOrder, v_2p: f64, q: u32) -> Result<Ratio<i64>> {
    if q == 0 {
        return Err(Error::OutOfRange("time tangency order q must be at least 1".into()));
    }
    let q = q as i64;
    match p {
        TangencyOrder::Infinite => Ok(Ratio::new(2 * q, 2 * q - 1)),
        TangencyOrder::Finite(0) => Err(Error::OutOfRange("space tangency order p must be at least 1".into())),
        TangencyOrder::Finite(_) if v_2p > 0.0 => Err(Error::UnconditionallyUnstable { coefficient: v_2p }),
        TangencyOrder::Finite(p) => {
            let p = p as i64;
            if p <= q {
                Ok(Ratio::from_integer(1))
            } else {
                Ok(Ratio::new(q * (2 * p - 1), p * (2 * q - 1)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub matrices: Vec<DMatrix<f64>>,
}

impl SystemSpec {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = matrices.first().map(|m| m.nrows()).unwrap_or(0);
        if n == 0 || matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::InvalidScheme("system matrices must be square, nonempty and of equal size".into()));
        }
        Ok(Self { matrices })
    }

    pub fn dimension(&self) -> usize {
        self.matrices.len()
    }

    /// `M(ξ) = Σ_i ξ_i M_i`.
    pub fn symbol(&self, xi: &[f64]) -> DMatrix<f64> {
        let n = self.matrices[0].nrows();
        self.matrices
            .iter()
            .zip(xi)
            .fold(DMatrix::zeros(n, n), |acc, (m, &x)| acc + m * x)
    }
}

/// Unit directions: `{1}` in one dimension, `count` angles on the half
/// circle in two, a Fibonacci sphere of `count` points in three.
pub fn sample_directions(dimension: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    let count = count.max(1);
    match dimension {
        1 => Ok(vec![vec![1.0]]),
        2 => Ok((0..count)
            .map(|j| {
                let a = PI * j as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            Ok((0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * j as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect())
        }
        d => Err(Error::OutOfRange(format!("direction sampling supports 1 to 3 dimensions, got {d}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reduction {
    /// Every sampled `M(ξ)` is real-diagonalizable.
    Hyperbolic { a_eff: f64 },
    /// Some `M(ξ)` has a Jordan block; the scalar reduction does not apply
    /// there (the coupling acts as a source term).
    JordanBlock { direction: Vec<f64>, a_eff: f64 },
}

impl Reduction {
    pub fn a_eff(&self) -> f64 {
        match self {
            Reduction::Hyperbolic { a_eff } | Reduction::JordanBlock { a_eff, .. } => *a_eff,
        }
    }
}

fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}

/// `a_eff = max_ξ max |λ(M(ξ))|` over the sampled directions.
pub fn reduce_system(system: &SystemSpec, directions: &[Vec<f64>]) -> Result<Reduction> {
    if directions.is_empty() {
        return Err(Error::OutOfRange("no directions to sample".into()));
    }
    let n = system.matrices[0].nrows();
    let mut a_eff: f64 = 0.0;
    let mut defective: Option<Vec<f64>> = None;
    for xi in directions {
        if xi.len() != system.dimension() {
            return Err(Error::OutOfRange(format!(
                "direction of length {} for a {}-dimensional system",
                xi.len(),
                system.dimension()
            )));
        }
        let m = system.symbol(xi);
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let eig = m.complex_eigenvalues();
        if let Some(bad) = eig.iter().find(|l| l.im.abs() > 1e-8 * scale) {
            return Err(Error::NotHyperbolic { imag: bad.im });
        }
        let mut values: Vec<f64> = eig.iter().map(|l| l.re).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        a_eff = a_eff.max(values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));

        if defective.is_none() {
            // geometric multiplicity of each eigenvalue cluster
            let cluster_tol = 1e-6 * (1.0 + scale);
            let mut start = 0;
            while start < n {
                let mut end = start + 1;
                while end < n && values[end] - values[end - 1] <= cluster_tol {
                    end += 1;
                }
                let lambda = values[start..end].iter().sum::<f64>() / (end - start) as f64;
                let shifted = &m - DMatrix::identity(n, n) * lambda;
                if n - numerical_rank(&shifted, 1e-7 * scale) < end - start {
                    defective = Some(xi.clone());
                    break;
                }
                start = end;
            }
        }
    }
    Ok(match defective {
        Some(direction) => Reduction::JordanBlock { direction, a_eff },
        None => Reduction::Hyperbolic { a_eff },
    })
}

/// Stencil catalog: one `label offsets = o… weights = w…` record per line.
pub fn parse_stencils(text: &str) -> Result<Vec<Stencil>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").replace('=', " = ");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let o_at = tokens.iter().position(|t| *t == "offsets");
        let w_at = tokens.iter().position(|t| *t == "weights");
        let (o_at, w_at) = match (o_at, w_at) {
            (Some(1), Some(w)) if w > 2 && tokens[2] == "=" && tokens.get(w + 1) == Some(&"=") => (1, w),
            _ => return Err(err("expected `label offsets = … weights = …`".into())),
        };
        let offsets = tokens[o_at + 2..w_at]
            .iter()
            .map(|t| t.parse::<i32>().map_err(|_| err(format!("`{t}` is not an integer offset"))))
            .collect::<Result<Vec<_>>>()?;
        let weights = tokens[w_at + 2..]
            .iter()
            .map(|t| crate::catalog::parse_number(t).ok_or_else(|| err(format!("`{t}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        out.push(Stencil::new(tokens[0], offsets, weights).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}
