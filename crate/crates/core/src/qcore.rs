//! Base q-arithmetic: Pochhammer symbols, q-numbers, q-binomials and the two
//! normalisation constants b_q, c_q(gamma).

use crate::error::{QError, Result};
use crate::scaled::Scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// The fixed base together with every truncation policy knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QContext {
    pub q: f64,
    pub tail_rel_tol: f64,
    pub max_terms: usize,
    pub decay_window: usize,
    pub max_lattice_index: i64,
}

impl QContext {
    pub fn new(q: f64) -> Result<Self> {
        let ctx = QContext { q, tail_rel_tol: 1e-14, max_terms: 10_000, decay_window: 5, max_lattice_index: 2000 };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tail_rel_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_terms(mut self, n: usize) -> Result<Self> {
        self.max_terms = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(QError::Domain(format!("q must lie in (0,1), got {}", self.q)));
        }
        if !(self.tail_rel_tol > 0.0) {
            return Err(QError::Domain("tail_rel_tol must be positive".into()));
        }
        if self.decay_window < 2 || self.max_terms < self.decay_window {
            return Err(QError::Domain("need max_terms >= decay_window >= 2".into()));
        }
        if self.max_lattice_index < 1 {
            return Err(QError::Domain("max_lattice_index must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn ln_q(&self) -> f64 {
        self.q.ln()
    }
}

/// Length of a Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Len {
    Finite(usize),
    Infinite,
}

/// b_q, c_q(gamma) evaluated once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QConstants {
    pub b_q: f64,
    pub c_q_gamma: f64,
    pub gamma: f64,
}

impl QConstants {
    pub fn new(gamma: f64, ctx: &QContext) -> Result<Self> {
        Ok(QConstants { b_q: constant_bq(ctx)?, c_q_gamma: constant_cq(gamma, ctx)?, gamma })
    }
}

/// (a; base)_n in log-magnitude form.
pub fn qpoch_base(a: Complex64, base: f64, n: Len, ctx: &QContext) -> Result<Scaled> {
    let mut acc = Scaled::ONE;
    let mut t = a;
    match n {
        Len::Finite(n) => {
            for _ in 0..n {
                acc = acc.mul_c(Complex64::new(1.0, 0.0) - t);
                t *= base;
            }
            Ok(acc)
        }
        Len::Infinite => {
            // Factors with |t| > 1e150 are handled in log form so huge
            // arguments never overflow the running product.
            for j in 0..ctx.max_terms {
                let tn = t.norm();
                if tn < ctx.tail_rel_tol && j >= ctx.decay_window {
                    return Ok(acc);
                }
                acc = acc.mul_c(Complex64::new(1.0, 0.0) - t);
                t *= base;
            }
            Err(QError::CapExceeded { what: "infinite q-Pochhammer product", cap: ctx.max_terms })
        }
    }
}

/// (a; q)_k as a plain complex number.
pub fn q_pochhammer(a: Complex64, k: Len, ctx: &QContext) -> Result<Complex64> {
    Ok(qpoch_base(a, ctx.q, k, ctx)?.to_c64())
}

/// (c q^{m0}; q^{step})_inf with the power of q tracked as an integer, so a
/// factor whose exponent sums to zero with c = 1 is exactly zero. This is what
/// makes lattice zeros (e.g. E_{q^2}(-x^2) at x = q^{-j}) exact.
pub fn qpoch_int_exp(c: Complex64, m0: i64, step: i64, ctx: &QContext) -> Result<Scaled> {
    debug_assert!(step > 0);
    let lq = ctx.ln_q();
    let lc = c.norm().ln();
    let one = Complex64::new(1.0, 0.0);
    let mut acc = Scaled::ONE;
    let mut m = m0;
    let mut j = 0usize;
    loop {
        let lt = lc + m as f64 * lq;
        if lt < ctx.tail_rel_tol.ln() && j >= ctx.decay_window {
            return Ok(acc);
        }
        if j >= ctx.max_terms {
            return Err(QError::CapExceeded { what: "lattice q-Pochhammer product", cap: ctx.max_terms });
        }
        if lt > 300.0 {
            // 1 - t = -t (1 - 1/t)
            let ph = c / c.norm();
            let inv = Scaled::exp_real(-lt).mul_c(ph.inv()).to_c64();
            acc = acc * Scaled::from_parts(-ph * (one - inv), lt);
        } else {
            let t = c * pow_q(ctx.q, m);
            acc = acc.mul_c(one - t);
        }
        if acc.is_zero() {
            return Ok(acc);
        }
        m += step;
        j += 1;
    }
}

/// q^m for integer m.
#[inline]
pub fn pow_q(q: f64, m: i64) -> f64 {
    if m.unsigned_abs() < i32::MAX as u64 {
        q.powi(m as i32)
    } else {
        (m as f64 * q.ln()).exp()
    }
}

/// [n]_q = (1 - q^n)/(1 - q).
pub fn q_number(n: usize, ctx: &QContext) -> f64 {
    (1.0 - pow_q(ctx.q, n as i64)) / (1.0 - ctx.q)
}

/// [n]_q! as a plain double (overflows only for very large n).
pub fn q_factorial(n: usize, ctx: &QContext) -> f64 {
    (1..=n).map(|j| q_number(j, ctx)).product()
}

/// [n]_q! in log-magnitude form.
pub fn q_factorial_scaled(n: usize, ctx: &QContext) -> Scaled {
    let mut acc = Scaled::ONE;
    for j in 1..=n {
        acc = acc.mul_c(Complex64::new(q_number(j, ctx), 0.0));
    }
    acc
}

/// (q; q)_n as a double.
pub fn qq_finite(n: usize, q: f64) -> f64 {
    let mut p = 1.0;
    let mut t = q;
    for _ in 0..n {
        p *= 1.0 - t;
        t *= q;
    }
    p
}

/// Gaussian binomial coefficient. Always evaluated through min(k, n-k) so the
/// k <-> n-k symmetry is exact.
pub fn q_binomial(n: usize, k: usize, ctx: &QContext) -> Result<f64> {
    if k > n {
        return Err(QError::Domain(format!("q_binomial: k = {k} exceeds n = {n}")));
    }
    let k = k.min(n - k);
    let q = ctx.q;
    let mut v = 1.0;
    for j in 1..=k {
        v *= (1.0 - pow_q(q, (n - k + j) as i64)) / (1.0 - pow_q(q, j as i64));
    }
    Ok(v)
}

/// Row n of the q-binomial triangle.
pub fn q_binomial_row(n: usize, ctx: &QContext) -> Vec<f64> {
    (0..=n).map(|k| q_binomial(n, k, ctx).expect("k <= n")).collect()
}

/// b_q = (1-q)(q, -q, -1; q)_inf.
pub fn constant_bq(ctx: &QContext) -> Result<f64> {
    let q = ctx.q;
    let c = |a: f64| qpoch_base(Complex64::new(a, 0.0), q, Len::Infinite, ctx).map(|s| s.to_c64().re);
    Ok((1.0 - q) * c(q)? * c(-q)? * c(-1.0)?)
}

/// c_q(gamma) = 2(1-q)(q^2, -q gamma^2, -q/gamma^2; q^2)_inf gamma / (-gamma^2, -q^2/gamma^2, q; q^2)_inf.
pub fn constant_cq(gamma: f64, ctx: &QContext) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(QError::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let q = ctx.q;
    let q2 = q * q;
    let g2 = gamma * gamma;
    let c = |a: f64| qpoch_base(Complex64::new(a, 0.0), q2, Len::Infinite, ctx).map(|s| s.to_c64().re);
    let num = c(q2)? * c(-q * g2)? * c(-q / g2)?;
    let den = c(-g2)? * c(-q2 / g2)? * c(q)?;
    Ok(2.0 * (1.0 - q) * num * gamma / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(q: f64) -> QContext {
        QContext::new(q).unwrap()
    }

    #[test]
    fn context_rejects_bad_q() {
        assert!(QContext::new(0.0).is_err());
        assert!(QContext::new(1.0).is_err());
        assert!(QContext::new(-0.5).is_err());
        assert!(QContext::new(0.5).unwrap().with_tol(0.0).is_err());
    }

    #[test]
    fn finite_pochhammer() {
        let c = ctx(0.5);
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(q_pochhammer(Complex64::new(7.0, 3.0), Len::Finite(0), &c).unwrap(), one);
        let v = q_pochhammer(Complex64::new(0.5, 0.0), Len::Finite(3), &c).unwrap();
        assert!((v.re - 0.328125).abs() < 1e-16);
    }

    #[test]
    fn infinite_pochhammer_against_long_product() {
        let c = ctx(0.5);
        let v = q_pochhammer(Complex64::new(0.5, 0.0), Len::Infinite, &c).unwrap().re;
        let brute: f64 = (1..=200).map(|j| 1.0 - 0.5f64.powi(j)).product();
        assert!((v - brute).abs() < 1e-13);
        // (q;q)_inf at q = 1/2, from an mpmath oracle.
        assert!((v - 0.288_788_095_086_602_4).abs() < 1e-13);
    }

    #[test]
    fn binomials() {
        let c = ctx(0.5);
        assert_eq!(q_binomial(7, 0, &c).unwrap(), 1.0);
        assert!((q_binomial(2, 1, &c).unwrap() - 1.5).abs() < 1e-15);
        let oracle = qq_finite(6, 0.5) / qq_finite(3, 0.5).powi(2);
        assert!((q_binomial(6, 3, &c).unwrap() - oracle).abs() < 1e-13);
        assert!(q_binomial(2, 3, &c).is_err());
    }

    #[test]
    fn constants_match_oracle_values() {
        assert!((constant_bq(&ctx(0.5)).unwrap() - 1.641_632_560_655_153_9).abs() < 1e-13);
        assert!((constant_cq(1.0, &ctx(0.5)).unwrap() - 1.380_446_551_465_257_3).abs() < 1e-13);
        assert!((constant_bq(&ctx(0.3)).unwrap() - 1.858_828_886_963_117_5).abs() < 1e-13);
        assert!((constant_cq(0.7, &ctx(0.3)).unwrap() - 1.375_253_270_070_74).abs() < 1e-12);
        assert!((constant_cq(0.5, &ctx(0.7)).unwrap() - 1.204_237_489_041_177).abs() < 1e-12);
        let b = constant_bq(&ctx(0.01)).unwrap();
        assert!(b > 0.0 && b < 4.0);
    }

    #[test]
    fn integer_exponent_products_hit_exact_zeros() {
        let c = ctx(0.7);
        // (q^{-4}; q)_inf contains the factor 1 - q^0.
        let z = qpoch_int_exp(Complex64::new(1.0, 0.0), -4, 1, &c).unwrap();
        assert!(z.is_zero());
        let nz = qpoch_int_exp(Complex64::new(-1.0, 0.0), -40, 2, &c).unwrap();
        assert!(nz.is_finite() && nz.ln_abs() > 100.0);
    }
}
