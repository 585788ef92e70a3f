//! Scheme definitions, amplification polynomials and the energy-coefficient
//! stability classification.
//!
//! A linear Fourier mode `e^{iξx}` advanced by a one-step scheme is
//! multiplied by `g(ζ) = Σ β_ℓ ζ^ℓ`, where `ζ = σ(ξ)·δt`. For pure transport
//! `ζ = -i a ξ δt` and
//!
//! ```text
//! |g(-i y)|² = Σ_ℓ S_ℓ y^{2ℓ},   S_ℓ = Σ_{j=0}^{2ℓ} (-1)^{ℓ+j} β_j β_{2ℓ-j}.
//! ```
//!
//! The first nonzero `S_r` (`r ≥ 1`) decides the regime: `S_r > 0` forces
//! `δt ≤ (2C/S_r)^{1/(2r-1)} (δx/a)^{2r/(2r-1)}`, `S_r < 0` leaves a linear
//! CFL condition.

use num_complex::Complex64;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::power_series::TruncatedSeries;
use crate::stability_domain::MultiplierMatrix;

/// Absolute threshold below which an energy coefficient counts as zero.
pub const ZERO_TOL: f64 = 1e-12;
/// Tolerance on `β_0 = β_1 = 1`.
pub const CONSISTENCY_TOL: f64 = 1e-12;
/// Default allowed exponential growth rate `C` in `|λ| ≤ 1 + C δt`.
pub const DEFAULT_GROWTH_RATE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKind {
    /// Nested chain `u⁺ = u + α_1 δt F(u + α_2 δt F(… + α_p δt F(u)))`.
    RkChain { alphas: Vec<f64> },
    /// Explicit stage form: stage `ℓ` (1-based) is
    /// `u_(ℓ) = Σ_{i<ℓ} a[ℓ-1][i] u_(i) + δt Σ_{i<ℓ} b[ℓ-1][i] F(u_(i))`,
    /// the last stage being the new step.
    Tableau { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// `u_{n+1} = u_n + δt Σ_k α_k F(u_{n-k})`.
    AdamsBashforth { alphas: Vec<f64> },
    /// General multistep scheme given by its multiplier matrix; each entry is
    /// a real polynomial in `ζ` (ascending coefficients).
    MultiplierMatrix { entries: Vec<Vec<Vec<f64>>> },
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::RkChain { .. } => "rk_chain",
            SchemeKind::Tableau { .. } => "explicit_tableau",
            SchemeKind::AdamsBashforth { .. } => "adams_bashforth",
            SchemeKind::MultiplierMatrix { .. } => "multiplier_matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub name: String,
    pub kind: SchemeKind,
}

impl SchemeSpec {
    pub fn rk_chain(name: impl Into<String>, alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidScheme("an rk_chain needs at least one coefficient".into()));
        }
        check_finite(&alphas)?;
        Ok(Self {
            name: name.into(),
            kind: SchemeKind::RkChain { alphas },
        })
    }

    /// Stage rows shorter than the stage index are padded with zeros; longer
    /// rows would reference the stage itself (implicit) and are rejected.
    pub fn tableau(name: impl Into<String>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::InvalidScheme(format!(
                "tableau needs matching nonempty stage tables (a has {} rows, b has {})",
                a.len(),
                b.len()
            )));
        }
        let pad = |rows: Vec<Vec<f64>>, which: &str| -> Result<Vec<Vec<f64>>> {
            rows.into_iter()
                .enumerate()
                .map(|(l, mut row)| {
                    if row.len() > l + 1 {
                        return Err(Error::InvalidScheme(format!(
                            "tableau {which} row {} has {} entries; explicit stages may only use the {} previous stages",
                            l + 1,
                            row.len(),
                            l + 1
                        )));
                    }
                    check_finite(&row)?;
                    row.resize(l + 1, 0.0);
                    Ok(row)
                })
                .collect()
        };
        Ok(Self {
            name: name.into(),
            kind: SchemeKind::Tableau {
                a: pad(a, "a")?,
                b: pad(b, "b")?,
            },
        })
    }

    pub fn adams_bashforth(name: impl Into<String>, alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidScheme("an Adams-Bashforth scheme needs at least α_0".into()));
        }
        check_finite(&alphas)?;
        Ok(Self {
            name: name.into(),
            kind: SchemeKind::AdamsBashforth { alphas },
        })
    }

    /// Trailing zero coefficients of the entries are dropped.
    pub fn multiplier_matrix(name: impl Into<String>, mut entries: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for poly in entries.iter_mut().flatten() {
            while poly.last() == Some(&0.0) {
                poly.pop();
            }
        }
        let n = entries.len();
        if n == 0 || entries.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidScheme("multiplier matrix must be square and nonempty".into()));
        }
        for row in &entries {
            for poly in row {
                check_finite(poly)?;
            }
        }
        Ok(Self {
            name: name.into(),
            kind: SchemeKind::MultiplierMatrix { entries },
        })
    }

    /// Number of past states (besides the current one) the scheme reads.
    pub fn history_len(&self) -> usize {
        match &self.kind {
            SchemeKind::AdamsBashforth { alphas } => alphas.len() - 1,
            SchemeKind::MultiplierMatrix { entries } => entries.len() - 1,
            _ => 0,
        }
    }

    pub fn is_one_step(&self) -> bool {
        matches!(self.kind, SchemeKind::RkChain { .. } | SchemeKind::Tableau { .. })
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidScheme("non-finite coefficient".into()))
    }
}

/// Coefficients `β_0..β_s` of the amplification factor.
///
/// `series_order` is `Some(T)` when the coefficients come from a truncated
/// expansion of an algebraic multiplier (multistep schemes); only the energy
/// coefficients with `2ℓ ≤ T` are then meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationPolynomial {
    pub betas: Vec<f64>,
    pub series_order: Option<usize>,
}

impl AmplificationPolynomial {
    pub fn new(betas: Vec<f64>) -> Self {
        Self { betas, series_order: None }
    }

    /// Real parts of a truncated multiplier expansion.
    pub fn from_series(series: &TruncatedSeries) -> Self {
        Self {
            betas: series.coeffs().iter().map(|c| c.re).collect(),
            series_order: Some(series.order()),
        }
    }

    pub fn degree(&self) -> usize {
        self.betas.len().saturating_sub(1)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.betas
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &b| acc * z + b)
    }

    /// `g(ζ) - 1`, evaluated without the cancellation of the constant term.
    pub fn eval_minus_one(&self, z: Complex64) -> Complex64 {
        let tail = self
            .betas
            .iter()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &b| acc * z + b);
        tail * z + (self.betas.first().copied().unwrap_or(0.0) - 1.0)
    }

    pub fn is_consistent(&self) -> bool {
        self.betas.len() >= 2
            && (self.betas[0] - 1.0).abs() <= CONSISTENCY_TOL
            && (self.betas[1] - 1.0).abs() <= CONSISTENCY_TOL
    }
}

/// Linear-mode multiplier of a one-step scheme.
pub fn amplification(scheme: &SchemeSpec) -> Result<AmplificationPolynomial> {
    match &scheme.kind {
        SchemeKind::RkChain { alphas } => {
            let mut betas = Vec::with_capacity(alphas.len() + 1);
            betas.push(1.0);
            let mut prod = 1.0;
            for &a in alphas {
                prod *= a;
                betas.push(prod);
            }
            Ok(AmplificationPolynomial::new(betas))
        }
        SchemeKind::Tableau { a, b } => {
            // stage values as real polynomials in ζ
            let mut stages: Vec<Vec<f64>> = vec![vec![1.0]];
            for (arow, brow) in a.iter().zip(b) {
                let len = stages.last().map_or(1, |s| s.len()) + 1;
                let mut next = vec![0.0; len];
                for (i, stage) in stages.iter().enumerate() {
                    for (k, &c) in stage.iter().enumerate() {
                        next[k] += arow[i] * c;
                        next[k + 1] += brow[i] * c;
                    }
                }
                stages.push(next);
            }
            let mut betas = stages.pop().unwrap_or_else(|| vec![1.0]);
            while betas.len() > 1 && betas.last() == Some(&0.0) {
                betas.pop();
            }
            Ok(AmplificationPolynomial::new(betas))
        }
        kind => Err(Error::UnsupportedKind {
            kind: kind.label(),
            reason: "multistep multipliers are matrices; use the dominant multiplier series",
        }),
    }
}

/// `S_ℓ = Σ_{j=0}^{2ℓ} (-1)^{ℓ+j} β_j β_{2ℓ-j}` with `β_j = 0` beyond the
/// stored coefficients. Returns `S_0..S_s` for a polynomial of degree `s`,
/// or `S_0..S_{⌊T/2⌋}` for a truncated expansion of order `T`.
pub fn energy_coefficients(beta: &AmplificationPolynomial) -> Vec<f64> {
    if beta.betas.is_empty() {
        return Vec::new();
    }
    let max_ell = match beta.series_order {
        Some(t) => t / 2,
        None => beta.degree(),
    };
    let get = |j: usize| beta.betas.get(j).copied().unwrap_or(0.0);
    (0..=max_ell)
        .map(|ell| {
            let mut q = DotAccumulator::default();
            for j in 0..=2 * ell {
                let sign = if (ell + j) % 2 == 0 { 1.0 } else { -1.0 };
                q.add(sign * get(j), get(2 * ell - j));
            }
            q.value()
        })
        .collect()
}

/// Compensated dot product (Ogita-Rump-Oishi `Dot2`); the quadratic forms
/// cancel to exactly zero for the optimized schemes, so plain summation
/// error would leak into the zero test.
#[derive(Default)]
struct DotAccumulator {
    sum: f64,
    err: f64,
}

impl DotAccumulator {
    fn add(&mut self, a: f64, b: f64) {
        let p = a * b;
        let pe = a.mul_add(b, -p);
        let s = self.sum + p;
        let bb = s - self.sum;
        let se = (self.sum - (s - bb)) + (p - bb);
        self.sum = s;
        self.err += pe + se;
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every `S_ℓ` (ℓ ≥ 1) vanishes: `|g|` stays 1 along the imaginary axis.
    Neutral,
    /// First nonzero `S_r > 0`: `δt ≤ K δx^{2r/(2r-1)}`.
    ShrinkingCfl,
    /// First nonzero `S_r < 0`: classical `δt ≤ K δx`.
    LinearCfl,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Neutral => "neutral",
            Regime::ShrinkingCfl => "shrinking CFL",
            Regime::LinearCfl => "linear CFL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPrediction {
    pub energy_coeffs: Vec<f64>,
    pub r: Option<usize>,
    pub regime: Regime,
    /// `2r/(2r-1)`, only in the shrinking-CFL regime.
    pub exponent: Option<Ratio<i64>>,
    /// `(2C/S_r)^{1/(2r-1)}` at the growth rate the prediction was made for.
    pub constant_factor: Option<f64>,
    pub growth_rate: f64,
}

impl StabilityPrediction {
    /// Tangency coefficient implied at the origin, `T_{2r} = -S_r/2`.
    pub fn tangency_coefficient(&self) -> Option<f64> {
        self.r.map(|r| -self.energy_coeffs[r] / 2.0)
    }

    pub fn exponent_f64(&self) -> f64 {
        self.exponent.map_or(1.0, |e| *e.numer() as f64 / *e.denom() as f64)
    }
}

/// Thick-line classification from precomputed energy coefficients.
pub fn classify_energy(energy_coeffs: Vec<f64>, growth_rate: f64) -> Result<StabilityPrediction> {
    if !(growth_rate > 0.0) {
        return Err(Error::OutOfRange(format!("growth rate C must be positive, got {growth_rate}")));
    }
    let r = energy_coeffs
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, s)| s.abs() > ZERO_TOL)
        .map(|(ell, _)| ell);
    let (regime, exponent, constant_factor) = match r {
        None => (Regime::Neutral, None, None),
        Some(r) if energy_coeffs[r] > 0.0 => {
            let s_r = energy_coeffs[r];
            let twice = 2 * r as i64;
            let constant = (2.0 * growth_rate / s_r).powf(1.0 / (twice - 1) as f64);
            (Regime::ShrinkingCfl, Some(Ratio::new(twice, twice - 1)), Some(constant))
        }
        Some(_) => (Regime::LinearCfl, None, None),
    };
    Ok(StabilityPrediction {
        energy_coeffs,
        r,
        regime,
        exponent,
        constant_factor,
        growth_rate,
    })
}

pub fn classify(beta: &AmplificationPolynomial, growth_rate: f64) -> Result<StabilityPrediction> {
    if !beta.is_consistent() {
        return Err(Error::Inconsistent(format!(
            "amplification factor must start with β_0 = β_1 = 1, got {:?}",
            &beta.betas[..beta.betas.len().min(2)]
        )));
    }
    classify_energy(energy_coefficients(beta), growth_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderReport {
    pub order: usize,
    /// Set when the order exceeds two: the `β_ℓ = 1/ℓ!` correspondence only
    /// certifies the order for linear right-hand sides.
    pub linear_only: bool,
}

/// Largest `m` with `β_ℓ = 1/ℓ!` for every `ℓ ≤ m`.
pub fn scheme_order(beta: &AmplificationPolynomial) -> OrderReport {
    let mut inv_fact = 1.0;
    let mut order = 0;
    for (ell, &b) in beta.betas.iter().enumerate() {
        if ell > 0 {
            inv_fact /= ell as f64;
        }
        if (b - inv_fact).abs() > CONSISTENCY_TOL {
            break;
        }
        order = ell;
    }
    OrderReport {
        order,
        linear_only: order > 2,
    }
}

/// Expansion in `ζ` of the eigenvalue branch through 1 at `ζ = 0`.
///
/// For one-step schemes this is `g` itself; for Adams-Bashforth schemes it is
/// the root of `X^{K+1} - X^K - ζ Σ α_k X^{K-k}`, for general multiplier
/// matrices the corresponding root of `det(X·Id - M(ζ))`.
pub fn dominant_multiplier(scheme: &SchemeSpec, order: usize) -> Result<TruncatedSeries> {
    match &scheme.kind {
        SchemeKind::RkChain { .. } | SchemeKind::Tableau { .. } => {
            Ok(TruncatedSeries::from_real(&amplification(scheme)?.betas, order))
        }
        _ => {
            let matrix = MultiplierMatrix::from_scheme(scheme)?;
            let charpoly = matrix.characteristic_polynomial();
            let poly: Vec<TruncatedSeries> = charpoly
                .iter()
                .map(|c| TruncatedSeries::from_slice(c.coeffs(), order))
                .collect();
            TruncatedSeries::root_newton(&poly, Complex64::new(1.0, 0.0), order)
        }
    }
}

/// Dominant multiplier series of an Adams-Bashforth scheme.
pub fn ab_dominant_multiplier(scheme: &SchemeSpec, order: usize) -> Result<TruncatedSeries> {
    match &scheme.kind {
        SchemeKind::AdamsBashforth { alphas } => {
            let k = alphas.len() - 1;
            // P(X) = X^{K+1} - X^K - ζ Σ_k α_k X^{K-k}
            let mut poly = vec![TruncatedSeries::zero(order); k + 2];
            poly[k + 1] = TruncatedSeries::one(order);
            for (j, &a) in alphas.iter().enumerate() {
                let idx = k - j;
                let base = if idx == k { -1.0 } else { 0.0 };
                poly[idx] = TruncatedSeries::from_real(&[base, -a], order);
            }
            TruncatedSeries::root_newton(&poly, Complex64::new(1.0, 0.0), order)
        }
        kind => Err(Error::UnsupportedKind {
            kind: kind.label(),
            reason: "only Adams-Bashforth schemes have a companion multiplier",
        }),
    }
}

/// Amplification data and classification for any scheme kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeAnalysis {
    pub amplification: AmplificationPolynomial,
    pub prediction: StabilityPrediction,
    pub order: OrderReport,
}

pub fn analyze(scheme: &SchemeSpec, growth_rate: f64, series_order: usize) -> Result<SchemeAnalysis> {
    let amplification = if scheme.is_one_step() {
        amplification(scheme)?
    } else {
        AmplificationPolynomial::from_series(&dominant_multiplier(scheme, series_order)?)
    };
    let prediction = classify(&amplification, growth_rate)?;
    let order = match &scheme.kind {
        SchemeKind::AdamsBashforth { alphas } => OrderReport {
            order: crate::scheme_constructor::ab_order(alphas),
            linear_only: false,
        },
        _ => scheme_order(&amplification),
    };
    Ok(SchemeAnalysis {
        amplification,
        prediction,
        order,
    })
}
