//! Complex numbers carried as `mantissa * exp(log)`.
//!
//! Moments and lattice values routinely leave the double range (q^{k^2} at
//! k ~ 30 already underflows for q = 1/2), so the summation machinery works
//! on this representation and only converts at the boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    m: Complex64,
    log: f64,
}

impl Default for Scaled {
    fn default() -> Self {
        Scaled::ZERO
    }
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { m: Complex64 { re: 0.0, im: 0.0 }, log: 0.0 };
    pub const ONE: Scaled = Scaled { m: Complex64 { re: 1.0, im: 0.0 }, log: 0.0 };

    pub fn new(z: Complex64) -> Self {
        Scaled { m: z, log: 0.0 }.norm()
    }

    pub fn real(x: f64) -> Self {
        Self::new(Complex64::new(x, 0.0))
    }

    /// `m * exp(log)`.
    pub fn from_parts(m: Complex64, log: f64) -> Self {
        if m == Complex64::new(0.0, 0.0) || log == f64::NEG_INFINITY {
            return Scaled::ZERO;
        }
        Scaled { m, log }.norm()
    }

    /// A positive real with the given natural logarithm.
    pub fn exp_real(log: f64) -> Self {
        Self::from_parts(Complex64::new(1.0, 0.0), log)
    }

    fn norm(self) -> Self {
        let a = self.m.norm();
        if a == 0.0 {
            return Scaled::ZERO;
        }
        if !a.is_finite() {
            // Infinite or NaN mantissa: keep as-is so it propagates visibly.
            return self;
        }
        if (1e-30..1e30).contains(&a) {
            return self;
        }
        Scaled { m: self.m / a, log: self.log + a.ln() }
    }

    pub fn is_zero(&self) -> bool {
        self.m.re == 0.0 && self.m.im == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.m.re.is_finite() && self.m.im.is_finite() && !self.log.is_nan()
    }

    /// Natural log of the modulus; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.m.norm().ln() + self.log
        }
    }

    pub fn abs(&self) -> Scaled {
        Scaled { m: Complex64::new(self.m.norm(), 0.0), log: self.log }
    }

    /// Modulus as a plain double (may under/overflow).
    pub fn norm_f64(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            self.m.norm() * self.log.exp()
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        if self.log.abs() < 700.0 {
            return self.m * self.log.exp();
        }
        let a = self.m.norm();
        let l = self.log + a.ln();
        let phase = self.m / a;
        if l > 709.0 {
            phase * f64::INFINITY
        } else {
            phase * l.exp()
        }
    }

    pub fn conj(&self) -> Scaled {
        Scaled { m: self.m.conj(), log: self.log }
    }

    /// Unit-modulus phase factor (zero for zero).
    pub fn phase(&self) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            self.m / self.m.norm()
        }
    }

    pub fn mul_c(self, z: Complex64) -> Scaled {
        Scaled { m: self.m * z, log: self.log }.norm()
    }

    pub fn scale_exp(self, log: f64) -> Scaled {
        if self.is_zero() {
            return self;
        }
        Scaled { m: self.m, log: self.log + log }
    }

    pub fn powi(self, n: i32) -> Scaled {
        if n == 0 {
            return Scaled::ONE;
        }
        if self.is_zero() {
            return if n > 0 { Scaled::ZERO } else { Scaled { m: Complex64::new(f64::INFINITY, 0.0), log: 0.0 } };
        }
        let a = self.m.norm();
        let ph = self.m / a;
        Scaled::from_parts(ph.powi(n), n as f64 * (self.log + a.ln()))
    }

    /// |self| <= tol * |other|, robust to zeros.
    pub fn small_rel(&self, other: &Scaled, tol: f64) -> bool {
        if self.is_zero() {
            return true;
        }
        if other.is_zero() {
            return false;
        }
        self.ln_abs() <= other.ln_abs() + tol.ln()
    }
}

impl From<Complex64> for Scaled {
    fn from(z: Complex64) -> Self {
        Scaled::new(z)
    }
}

impl From<f64> for Scaled {
    fn from(x: f64) -> Self {
        Scaled::real(x)
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, o: Scaled) -> Scaled {
        if self.is_zero() || o.is_zero() {
            return Scaled::ZERO;
        }
        Scaled { m: self.m * o.m, log: self.log + o.log }.norm()
    }
}

impl Div for Scaled {
    type Output = Scaled;
    fn div(self, o: Scaled) -> Scaled {
        if self.is_zero() && !o.is_zero() {
            return Scaled::ZERO;
        }
        Scaled { m: self.m / o.m, log: self.log - o.log }.norm()
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, o: Scaled) -> Scaled {
        if self.is_zero() {
            return o;
        }
        if o.is_zero() {
            return self;
        }
        let (big, small) = if self.log >= o.log { (self, o) } else { (o, self) };
        let d = small.log - big.log;
        let m = if d < -745.0 { big.m } else { big.m + small.m * d.exp() };
        Scaled { m, log: big.log }.norm()
    }
}

impl Neg for Scaled {
    type Output = Scaled;
    fn neg(self) -> Scaled {
        Scaled { m: -self.m, log: self.log }
    }
}

impl Sub for Scaled {
    type Output = Scaled;
    fn sub(self, o: Scaled) -> Scaled {
        self + (-o)
    }
}

impl std::iter::Sum for Scaled {
    fn sum<I: Iterator<Item = Scaled>>(iter: I) -> Scaled {
        iter.fold(Scaled::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_ordinary_values() {
        let z = Complex64::new(3.5, -2.25);
        assert_eq!(Scaled::new(z).to_c64(), z);
    }

    #[test]
    fn underflowing_products_keep_their_logarithm() {
        let x = Scaled::real(1e-200);
        let y = x * x * x;
        assert!((y.ln_abs() - 3.0 * (1e-200f64).ln()).abs() < 1e-9);
        assert_eq!(y.to_c64(), Complex64::new(0.0, 0.0));
        let back = y / (x * x);
        assert!((back.to_c64().re - 1e-200).abs() < 1e-212);
    }

    #[test]
    fn addition_aligns_exponents() {
        let a = Scaled::exp_real(1000.0);
        let b = Scaled::exp_real(1000.0 + 2f64.ln());
        assert!(((a + b).ln_abs() - (1000.0 + 3f64.ln())).abs() < 1e-12);
        assert!((a - a).is_zero());
    }
}
