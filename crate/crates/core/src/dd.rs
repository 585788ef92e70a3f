//! Double-double arithmetic for the few places where the real part of a
//! boundary point near the origin sits far below the rounding level of its
//! imaginary part.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn scale(self, x: f64) -> Dd {
        self.mul(Dd::new(x))
    }

    pub fn div_f64(self, x: f64) -> Dd {
        let q1 = self.hi / x;
        let r = self.sub(Dd::new(x).scale(q1));
        let q2 = r.hi / x;
        let r = r.sub(Dd::new(x).scale(q2));
        let q3 = r.hi / x;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::new(q3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd { re: Dd::ZERO, im: Dd::ZERO };

    pub fn new(z: Complex64) -> Self {
        Cdd { re: Dd::new(z.re), im: Dd::new(z.im) }
    }

    pub fn real(x: Dd) -> Self {
        Cdd { re: x, im: Dd::ZERO }
    }

    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.add(o.re), im: self.im.add(o.im) }
    }

    pub fn sub(self, o: Cdd) -> Cdd {
        Cdd { re: self.re.sub(o.re), im: self.im.sub(o.im) }
    }

    pub fn mul(self, o: Cdd) -> Cdd {
        Cdd {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }

    pub fn scale(self, x: f64) -> Cdd {
        Cdd { re: self.re.scale(x), im: self.im.scale(x) }
    }

    pub fn conj(self) -> Cdd {
        Cdd { re: self.re, im: self.im.neg() }
    }

    /// `self + δ` for a small correction carried in double precision.
    pub fn add_c64(self, d: Complex64) -> Cdd {
        self.add(Cdd::new(d))
    }
}

/// `(cos θ - 1, sin θ)` to double-double accuracy by Taylor series; meant
/// for `|θ| ≤ 1`.
pub(crate) fn exp_i_minus_one(theta: f64) -> Cdd {
    let t = Dd::new(theta);
    let mut re = Dd::ZERO;
    let mut im = Dd::ZERO;
    // term = θ^n / n!
    let mut term = t;
    for n in 1..60usize {
        let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if n % 2 == 1 {
            im = im.add(term.scale(sign));
        } else {
            re = re.add(term.scale(sign));
        }
        term = term.mul(t).div_f64((n + 1) as f64);
        if term.hi.abs() < 1e-40 * theta.abs() {
            break;
        }
    }
    Cdd { re, im }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_capture_rounding() {
        let a = Dd::new(1.0 + f64::EPSILON);
        let p = a.mul(a);
        // (1 + ε)² = 1 + 2ε + ε²
        assert_eq!(p.hi, 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(p.lo, f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn exp_series_matches_libm() {
        for &t in &[1e-3, 0.05, 0.1, 0.25, 0.9] {
            let e = exp_i_minus_one(t);
            let half = (0.5 * t).sin();
            assert!((e.re.to_f64() + 2.0 * half * half).abs() <= 4e-16 * t * t);
            assert!((e.im.to_f64() - t.sin()).abs() <= 4e-16 * t);
        }
        // cos θ - 1 + θ²/2 = θ⁴/24 - θ⁶/720 + …, far below the rounding level of θ²/2
        let t = 1e-3;
        let tail = exp_i_minus_one(t).re.add(Dd::new(t).mul(Dd::new(t)).scale(0.5));
        let expected = t.powi(4) / 24.0 - t.powi(6) / 720.0 + t.powi(8) / 40320.0;
        assert!((tail.to_f64() - expected).abs() <= 1e-10 * expected);
    }
}
