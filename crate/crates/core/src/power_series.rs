//! Truncated power series with complex coefficients.
//!
//! A [`TruncatedSeries`] of order `T` stores the coefficients of
//! `θ^0 .. θ^T`; every operation drops terms beyond `θ^T`. The series are
//! used to expand amplification factors, stability-boundary curves and the
//! dominant eigenvalue branch of multistep schemes around the origin.

use num_complex::Complex64;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

/// Default truncation order; high enough to resolve eighth-order tangency
/// coefficients with a safety margin.
pub const DEFAULT_ORDER: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<Complex64>,
}

impl TruncatedSeries {
    /// Builds a series from its coefficients; the truncation order is
    /// `coeffs.len() - 1`.
    ///
    /// # Panics
    /// Panics when `coeffs` is empty.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a truncated series needs at least one coefficient");
        Self { coeffs }
    }

    /// Builds an order-`order` series from leading coefficients, padding with
    /// zeros or dropping the excess.
    pub fn from_slice(leading: &[Complex64], order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order + 1];
        for (dst, src) in coeffs.iter_mut().zip(leading) {
            *dst = *src;
        }
        Self { coeffs }
    }

    pub fn from_real(leading: &[f64], order: usize) -> Self {
        let c: Vec<Complex64> = leading.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_slice(&c, order)
    }

    pub fn zero(order: usize) -> Self {
        Self::from_slice(&[], order)
    }

    pub fn constant(value: Complex64, order: usize) -> Self {
        Self::from_slice(&[value], order)
    }

    pub fn one(order: usize) -> Self {
        Self::constant(Complex64::new(1.0, 0.0), order)
    }

    /// The series of the expansion variable itself.
    pub fn variable(order: usize) -> Self {
        Self::from_slice(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn check_order(&self, other: &Self) -> Result<()> {
        if self.order() == other.order() {
            Ok(())
        } else {
            Err(Error::OrderMismatch {
                left: self.order(),
                right: other.order(),
            })
        }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let t = self.order();
        let mut out = vec![Complex64::new(0.0, 0.0); t + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, &b) in other.coeffs[..=t - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(Self { coeffs: out })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * factor).collect(),
        }
    }

    /// Multiplicative inverse via the standard recurrence
    /// `r_k = -(1/a_0) Σ_{j=1}^{k} a_j r_{k-j}`.
    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0.norm() <= 1e-300 {
            return Err(Error::SingularSeries);
        }
        let inv0 = a0.inv();
        let t = self.order();
        let mut r = vec![Complex64::new(0.0, 0.0); t + 1];
        r[0] = inv0;
        for k in 1..=t {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                acc += self.coeffs[j] * r[k - j];
            }
            r[k] = -inv0 * acc;
        }
        Ok(Self { coeffs: r })
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.mul(&other.reciprocal()?)
    }

    /// Derivative with respect to the expansion variable, keeping the order.
    pub fn derivative(&self) -> Self {
        let t = self.order();
        let mut out = vec![Complex64::new(0.0, 0.0); t + 1];
        for k in 1..=t {
            out[k - 1] = self.coeffs[k] * k as f64;
        }
        Self { coeffs: out }
    }

    /// Horner evaluation of the truncated polynomial at `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Maclaurin series of `exp(i·scale·θ)`: coefficients `(i·scale)^k / k!`.
    pub fn exp_i_theta(scale: f64, order: usize) -> Self {
        let step = Complex64::new(0.0, scale);
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut term = Complex64::new(1.0, 0.0);
        coeffs.push(term);
        for k in 1..=order {
            term = term * step / k as f64;
            coeffs.push(term);
        }
        Self { coeffs }
    }

    /// Substitutes `Y` into `P(Y) = Σ_k poly[k]·Y^k` (series coefficients).
    pub fn compose_polynomial(poly: &[TruncatedSeries], y: &Self) -> Result<Self> {
        let mut acc = Self::zero(y.order());
        for c in poly.iter().rev() {
            acc = (&acc.mul(y)? + c)?;
        }
        Ok(acc)
    }

    /// Residual of `P(Y)` relative to the largest coefficient of the
    /// magnitude bound `Σ_k |poly[k]|·|Y|^k` (coefficientwise moduli).
    pub fn relative_residual(poly: &[TruncatedSeries], y: &Self) -> Result<f64> {
        let p = Self::compose_polynomial(poly, y)?;
        let modulus = |s: &Self| Self::new(s.coeffs.iter().map(|c| Complex64::new(c.norm(), 0.0)).collect());
        let abs_poly: Vec<Self> = poly.iter().map(modulus).collect();
        let bound = Self::compose_polynomial(&abs_poly, &modulus(y))?;
        Ok(p.max_abs() / bound.max_abs().max(1e-300))
    }

    /// Series root `Y(ζ)` of `P(Y) = Σ_k poly[k](ζ)·Y^k` with `Y(0) = y0`.
    ///
    /// Newton's iteration on series doubles the number of correct terms per
    /// step, so `ceil(log2(T+1)) + 2` iterations are allowed before giving up.
    pub fn root_newton(poly: &[TruncatedSeries], y0: Complex64, order: usize) -> Result<Self> {
        if poly.is_empty() {
            return Err(Error::OutOfRange("empty polynomial".into()));
        }
        let poly: Vec<TruncatedSeries> = poly
            .iter()
            .map(|c| Self::from_slice(c.coeffs(), order))
            .collect();
        let dpoly: Vec<TruncatedSeries> = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.scale(Complex64::new(k as f64, 0.0)))
            .collect();

        let d0: Complex64 = dpoly
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * y0 + c.coeff(0));
        if d0.norm() <= 1e-10 {
            return Err(Error::NonSimpleRoot { derivative: d0.norm() });
        }

        let max_iter = (usize::BITS - order.leading_zeros()) as usize + 2;
        let mut y = Self::constant(y0, order);
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let p = Self::compose_polynomial(&poly, &y)?;
            residual = Self::relative_residual(&poly, &y)?;
            if residual <= 1e-15 {
                return Ok(y);
            }
            let dp = if dpoly.is_empty() {
                Self::zero(order)
            } else {
                Self::compose_polynomial(&dpoly, &y)?
            };
            y = (&y - &p.div(&dp)?)?;
        }
        let final_residual = Self::relative_residual(&poly, &y)?;
        if final_residual <= 1e-11 {
            Ok(y)
        } else {
            Err(Error::NoConvergence {
                what: "series Newton iteration",
                iterations: max_iter,
                residual: final_residual.min(residual),
            })
        }
    }
}

impl Add for &TruncatedSeries {
    type Output = Result<TruncatedSeries>;

    fn add(self, rhs: Self) -> Self::Output {
        self.check_order(rhs)?;
        Ok(TruncatedSeries {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        })
    }
}

impl Sub for &TruncatedSeries {
    type Output = Result<TruncatedSeries>;

    fn sub(self, rhs: Self) -> Self::Output {
        self.check_order(rhs)?;
        Ok(TruncatedSeries {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        })
    }
}

impl Neg for &TruncatedSeries {
    type Output = TruncatedSeries;

    fn neg(self) -> Self::Output {
        TruncatedSeries {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}
