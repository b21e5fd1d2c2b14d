//! q-exponentials, the three q-Gaussians, discrete q-Hermite II polynomials,
//! the Rodrigues formula, the kernel K(t, x), the g_m family and the two
//! counterexample functions.

use crate::error::{QError, Result};
use crate::lattice::{Analyticity, Evaluate, LatticeFunction, LatticePoint, Parity};
use crate::qcore::{constant_cq, pow_q, qpoch_base, qpoch_int_exp, Len, QContext};
use crate::scaled::Scaled;
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpecialKind {
    /// e_q(x) = 1/(x;q)_inf
    EqSmall,
    /// E_q(x) = (-x;q)_inf
    EqBig,
    /// e_{q^2}(-x^2)
    GaussSmall,
    /// E_{q^2}(-x^2)
    GaussBig,
    /// 𝓔_{q^2}(-x^2)
    GaussCal,
    Gm(u32),
    /// The lattice function of the 1psi1 counterexample, on L(1).
    AltExample,
    /// exp(-c log(z^2+1)^2)
    StripExample(f64),
}

impl SpecialKind {
    pub fn analyticity(&self) -> Analyticity {
        match self {
            SpecialKind::EqSmall => Analyticity::Disk(1.0),
            SpecialKind::EqBig | SpecialKind::GaussBig | SpecialKind::GaussCal => Analyticity::Entire,
            SpecialKind::GaussSmall | SpecialKind::Gm(_) | SpecialKind::StripExample(_) => Analyticity::Strip(1.0),
            SpecialKind::AltExample => Analyticity::LatticeOnly,
        }
    }

    pub fn parity(&self) -> Parity {
        match self {
            SpecialKind::EqSmall | SpecialKind::EqBig => Parity::None,
            _ => Parity::Even,
        }
    }
}

impl fmt::Display for SpecialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecialKind::EqSmall => write!(f, "eq"),
            SpecialKind::EqBig => write!(f, "Eq"),
            SpecialKind::GaussSmall => write!(f, "gauss_e"),
            SpecialKind::GaussBig => write!(f, "gauss_E"),
            SpecialKind::GaussCal => write!(f, "gauss_cal"),
            SpecialKind::Gm(m) => write!(f, "gm:{m}"),
            SpecialKind::AltExample => write!(f, "alt"),
            SpecialKind::StripExample(c) => write!(f, "strip:{c}"),
        }
    }
}

impl FromStr for SpecialKind {
    type Err = QError;
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        fn need<'a>(name: &str, p: Option<&'a str>) -> Result<&'a str> {
            p.ok_or_else(|| QError::Parse(format!("{name} needs a parameter, e.g. {name}:1")))
        }
        Ok(match name {
            "eq" | "e_q" => SpecialKind::EqSmall,
            "Eq" | "E_q" => SpecialKind::EqBig,
            "gauss_e" => SpecialKind::GaussSmall,
            "gauss_E" => SpecialKind::GaussBig,
            "gauss_cal" => SpecialKind::GaussCal,
            "gm" => SpecialKind::Gm(need(name, param)?.parse().map_err(|_| QError::Parse(format!("bad m in {s:?}")))?),
            "alt" => SpecialKind::AltExample,
            "strip" => {
                let c: f64 = need(name, param)?.parse().map_err(|_| QError::Parse(format!("bad c in {s:?}")))?;
                if !(c > 0.0) {
                    return Err(QError::Domain("strip example needs c > 0".into()));
                }
                SpecialKind::StripExample(c)
            }
            _ => return Err(QError::Parse(format!("unknown function {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpecialFunction {
    pub kind: SpecialKind,
    ctx: QContext,
}

impl SpecialFunction {
    pub fn new(kind: SpecialKind, ctx: &QContext) -> Self {
        SpecialFunction { kind, ctx: *ctx }
    }

    /// As a lattice function on L(gamma). The counterexample lives on L(1)
    /// only.
    pub fn on_lattice(&self, gamma: f64) -> Result<LatticeFunction> {
        if self.kind == SpecialKind::AltExample && lattice_offset(gamma, self.ctx.q).is_none() {
            return Err(QError::Domain("the 1psi1 counterexample is defined on L(1) only".into()));
        }
        LatticeFunction::rule(self.kind.to_string(), Arc::new(*self), gamma, self.kind.analyticity(), self.kind.parity(), &self.ctx)
    }
}

/// n with gamma = q^n, if gamma is on L(1).
fn lattice_offset(gamma: f64, q: f64) -> Option<i64> {
    let n = (gamma.ln() / q.ln()).round();
    let n_i = n as i64;
    ((pow_q(q, n_i) - gamma).abs() <= 1e-12 * gamma).then_some(n_i)
}

fn x2_scaled(p: &LatticePoint, ctx: &QContext) -> Scaled {
    Scaled::exp_real(2.0 * p.ln_abs(ctx))
}

impl Evaluate for SpecialFunction {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        eval_special(self, z)
    }

    fn eval_lattice(&self, p: &LatticePoint) -> Result<Scaled> {
        let ctx = &self.ctx;
        let eps = p.epsilon as f64;
        match self.kind {
            SpecialKind::EqBig => qpoch_int_exp(Complex64::new(-eps * p.gamma, 0.0), p.k, 1, ctx),
            SpecialKind::EqSmall => {
                let d = qpoch_int_exp(Complex64::new(eps * p.gamma, 0.0), p.k, 1, ctx)?;
                if d.is_zero() {
                    return Err(QError::Pole { re: p.value, im: 0.0 });
                }
                Ok(Scaled::ONE / d)
            }
            SpecialKind::GaussSmall => Ok(Scaled::ONE / qpoch_int_exp(Complex64::new(-p.gamma * p.gamma, 0.0), 2 * p.k, 2, ctx)?),
            SpecialKind::GaussBig => qpoch_int_exp(Complex64::new(p.gamma * p.gamma, 0.0), 2 * p.k, 2, ctx),
            SpecialKind::GaussCal => gauss_cal_lattice(p, ctx),
            SpecialKind::Gm(m) => {
                let x2 = x2_scaled(p, ctx);
                let e = Scaled::ONE / qpoch_int_exp(Complex64::new(-p.gamma * p.gamma, 0.0), 2 * p.k, 2, ctx)?;
                Ok(e * gm_series(m, x2, ctx)?)
            }
            SpecialKind::AltExample => {
                let n = lattice_offset(p.gamma, ctx.q).ok_or_else(|| QError::Domain("ALT example is defined on L(1) only".into()))?;
                let k = p.k + n;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let den = qpoch_int_exp(Complex64::new(-1.0, 0.0), 2 * k, 2, ctx)?;
                Ok(Scaled::from_parts(Complex64::new(sign, 0.0), k as f64 * ctx.ln_q()) / den)
            }
            SpecialKind::StripExample(c) => {
                let lx = p.ln_abs(ctx);
                // log(x^2 + 1) for real x without overflow.
                let l = if lx > 0.0 { 2.0 * lx + (-2.0 * lx).exp().ln_1p() } else { (2.0 * lx).exp().ln_1p() };
                Ok(Scaled::exp_real(-c * l * l))
            }
        }
    }

    fn exact_derivative(&self, order: usize, z: Complex64) -> Option<Result<Scaled>> {
        let ctx = &self.ctx;
        let q = ctx.q;
        match self.kind {
            SpecialKind::GaussSmall => Some(rodrigues_scaled(order, z, ctx)),
            SpecialKind::EqBig => {
                let c = eq_big_derivative_factor(order, ctx);
                Some(eval_special(self, z * pow_q(q, order as i64)).map(|v| c.mul_c(v)))
            }
            SpecialKind::EqSmall => Some(eval_special(self, z).map(|v| Scaled::from(v).scale_exp(-(order as f64) * (1.0 - q).ln()))),
            _ => None,
        }
    }

    fn exact_lattice_derivative(&self, order: usize, p: &LatticePoint) -> Option<Result<Scaled>> {
        let ctx = &self.ctx;
        match self.kind {
            SpecialKind::GaussSmall => Some(rodrigues_lattice(order, p, ctx)),
            SpecialKind::EqBig => {
                // ∂^n E_q(eps q^k gamma) = q^{n(n-1)/2}/(1-q)^n (-eps q^{k+n} gamma; q)_inf
                let c = eq_big_derivative_factor(order, ctx);
                Some(self.eval_lattice(&p.shifted(order as i64, ctx)).map(|v| c * v))
            }
            SpecialKind::EqSmall => Some(self.eval_lattice(p).map(|v| v.scale_exp(-(order as f64) * (1.0 - ctx.q).ln()))),
            _ => None,
        }
    }
}

fn eq_big_derivative_factor(n: usize, ctx: &QContext) -> Scaled {
    let n = n as f64;
    Scaled::exp_real(n * (n - 1.0) / 2.0 * ctx.ln_q() - n * (1.0 - ctx.q).ln())
}

/// Pointwise value of a special function.
pub fn eval_special(sf: &SpecialFunction, x: Complex64) -> Result<Complex64> {
    let ctx = &sf.ctx;
    let q = ctx.q;
    let q2 = q * q;
    let inf = Len::Infinite;
    match sf.kind {
        SpecialKind::EqBig => Ok(qpoch_base(-x, q, inf, ctx)?.to_c64()),
        SpecialKind::EqSmall => {
            check_poles(x, |j| pow_q(q, -j), ctx)?;
            Ok((Scaled::ONE / qpoch_base(x, q, inf, ctx)?).to_c64())
        }
        SpecialKind::GaussSmall => {
            check_gauss_poles(x, ctx)?;
            Ok((Scaled::ONE / qpoch_base(-x * x, q2, inf, ctx)?).to_c64())
        }
        SpecialKind::GaussBig => Ok(qpoch_base(x * x, q2, inf, ctx)?.to_c64()),
        SpecialKind::GaussCal => Ok(gauss_cal_general(x, ctx)?.to_c64()),
        SpecialKind::Gm(m) => {
            check_gauss_poles(x, ctx)?;
            let e = Scaled::ONE / qpoch_base(-x * x, q2, inf, ctx)?;
            Ok((e * gm_series(m, Scaled::from(x * x), ctx)?).to_c64())
        }
        SpecialKind::AltExample => {
            if x.im != 0.0 || x.re == 0.0 {
                return Err(QError::Domain(format!("ALT example evaluated off L(1) at {x}")));
            }
            let k = (x.re.abs().ln() / q.ln()).round() as i64;
            if (pow_q(q, k) - x.re.abs()).abs() > 1e-12 * x.re.abs() {
                return Err(QError::Domain(format!("ALT example evaluated off L(1) at {x}")));
            }
            let p = LatticePoint::new(if x.re < 0.0 { -1 } else { 1 }, k, 1.0, ctx);
            Ok(sf.eval_lattice(&p)?.to_c64())
        }
        SpecialKind::StripExample(c) => {
            if x.im.abs() >= 1.0 {
                return Err(QError::Domain(format!("strip example is only defined for |Im z| < 1, got {x}")));
            }
            let l = (x * x + 1.0).ln();
            Ok((-c * l * l).exp())
        }
    }
}

fn check_poles(x: Complex64, pole: impl Fn(i64) -> f64, ctx: &QContext) -> Result<()> {
    if x.norm() < 0.5 {
        return Ok(());
    }
    let jmax = ((x.norm().ln() / -ctx.ln_q()).ceil() as i64) + 1;
    for j in 0..=jmax {
        if (ONE - x / pole(j)).norm() < 1e-12 {
            return Err(QError::Pole { re: x.re, im: x.im });
        }
    }
    Ok(())
}

fn check_gauss_poles(x: Complex64, ctx: &QContext) -> Result<()> {
    // poles at ±i q^{-j}
    let q = ctx.q;
    if x.norm() < 0.5 {
        return Ok(());
    }
    let jmax = ((x.norm().ln() / -ctx.ln_q()).ceil() as i64) + 1;
    for j in 0..=jmax {
        for s in [1.0, -1.0] {
            if (ONE - x / (I * s * pow_q(q, -j))).norm() < 1e-12 {
                return Err(QError::Pole { re: x.re, im: x.im });
            }
        }
    }
    Ok(())
}

/// Σ_r (-1)^r q^{2r(r-1)} q^{(1+2m)r} x^{2r} / ((q^{1+2m};q^2)_r (q^2;q^2)_r).
fn gm_series(m: u32, x2: Scaled, ctx: &QContext) -> Result<Scaled> {
    let q = ctx.q;
    let a = pow_q(q, 1 + 2 * m as i64);
    let mut term = Scaled::ONE;
    let mut sum = Scaled::ONE;
    let mut abs_sum = Scaled::ONE;
    let mut small = 0;
    for r in 0..ctx.max_terms {
        let rr = r as i64;
        let ratio = -pow_q(q, 4 * rr) * a / ((1.0 - a * pow_q(q, 2 * rr)) * (1.0 - pow_q(q, 2 * rr + 2)));
        term = (term * x2).mul_c(Complex64::new(ratio, 0.0));
        sum = sum + term;
        abs_sum = abs_sum + term.abs();
        if term.small_rel(&abs_sum, ctx.tail_rel_tol * 1e-2) {
            small += 1;
            if small >= ctx.decay_window {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(QError::CapExceeded { what: "g_m series", cap: ctx.max_terms })
}

/// 𝓔_{q^2}(-x^2) = (1/(-q;q)_inf) Σ_m q^{m(m+1)/2}/(q;q)_m (x^2 q^m; q)_inf.
/// All terms are nonnegative on the real line, so there is no cancellation;
/// on L(1) the products vanish exactly for m <= 2n at x = q^{-n}.
fn gauss_cal_sum(prod: impl Fn(i64) -> Result<Scaled>, ctx: &QContext) -> Result<Scaled> {
    let q = ctx.q;
    let mut sum = Scaled::ZERO;
    let mut started = false;
    let mut small = 0;
    let mut qq = 1.0; // (q;q)_m
    for m in 0..ctx.max_terms as i64 {
        if m > 0 {
            qq *= 1.0 - pow_q(q, m);
        }
        let p = prod(m)?;
        let t = p.scale_exp((m * (m + 1)) as f64 / 2.0 * ctx.ln_q()).mul_c(Complex64::new(1.0 / qq, 0.0));
        if !t.is_zero() {
            started = true;
        }
        sum = sum + t;
        if started {
            if t.small_rel(&sum, ctx.tail_rel_tol * 1e-2) {
                small += 1;
                if small >= ctx.decay_window {
                    let norm = qpoch_base(Complex64::new(-q, 0.0), q, Len::Infinite, ctx)?;
                    return Ok(sum / norm);
                }
            } else {
                small = 0;
            }
        }
    }
    Err(QError::CapExceeded { what: "q-Gaussian interpolation sum", cap: ctx.max_terms })
}

fn gauss_cal_lattice(p: &LatticePoint, ctx: &QContext) -> Result<Scaled> {
    let g2 = Complex64::new(p.gamma * p.gamma, 0.0);
    gauss_cal_sum(|m| qpoch_int_exp(g2, 2 * p.k + m, 1, ctx), ctx)
}

fn gauss_cal_general(x: Complex64, ctx: &QContext) -> Result<Scaled> {
    let x2 = x * x;
    gauss_cal_sum(|m| qpoch_base(x2 * pow_q(ctx.q, m), ctx.q, Len::Infinite, ctx), ctx)
}

/// The defining power series of 𝓔_{q^2}(-x^2); accurate only for moderate |x|.
pub fn gauss_cal_series(x: Complex64, ctx: &QContext) -> Result<Complex64> {
    let q = ctx.q;
    let x2 = x * x;
    let mut term = ONE;
    let mut sum = ONE;
    let mut small = 0;
    for k in 0..ctx.max_terms as i64 {
        // ratio: -q^k x^2 / (1 - q^{2k+2})
        term *= -x2 * pow_q(q, k) / (1.0 - pow_q(q, 2 * k + 2));
        sum += term;
        if term.norm() <= ctx.tail_rel_tol * sum.norm() {
            small += 1;
            if small >= ctx.decay_window {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(QError::CapExceeded { what: "q-Gaussian power series", cap: ctx.max_terms })
}

/// E_q via its power series Σ q^{k(k-1)/2} x^k/(q;q)_k.
pub fn eq_big_series(x: Complex64, ctx: &QContext) -> Result<Complex64> {
    let q = ctx.q;
    let mut term = ONE;
    let mut sum = ONE;
    let mut small = 0;
    for k in 0..ctx.max_terms as i64 {
        term *= x * pow_q(q, k) / (1.0 - pow_q(q, k + 1));
        sum += term;
        if term.norm() <= ctx.tail_rel_tol * sum.norm() {
            small += 1;
            if small >= ctx.decay_window {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(QError::CapExceeded { what: "E_q power series", cap: ctx.max_terms })
}

fn ln_qpoch_real(a: f64, base: f64, n: usize) -> f64 {
    let mut s = 0.0;
    let mut t = a;
    for _ in 0..n {
        s += (1.0 - t).ln();
        t *= base;
    }
    s
}

/// h̃_k(x;q) in log-magnitude form; the power x^{k-2l} is supplied by `xpow`.
fn hermite_with(k: usize, xpow: impl Fn(i64) -> Scaled, ctx: &QContext) -> Scaled {
    let q = ctx.q;
    let lq = ctx.ln_q();
    let lqk = ln_qpoch_real(q, q, k);
    let mut sum = Scaled::ZERO;
    for l in 0..=k / 2 {
        let (lf, kf) = (l as f64, k as f64);
        let lmag = lqk - ln_qpoch_real(q * q, q * q, l) - ln_qpoch_real(q, q, k - 2 * l) + (-2.0 * lf * kf + 2.0 * lf * lf + lf) * lq;
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum = sum + xpow((k - 2 * l) as i64).mul_c(Complex64::new(sign, 0.0)).scale_exp(lmag);
    }
    sum
}

/// Discrete q-Hermite II polynomial h̃_k(x;q).
pub fn hermite_ii(k: usize, x: Complex64, ctx: &QContext) -> Complex64 {
    hermite_ii_scaled(k, x, ctx).to_c64()
}

pub fn hermite_ii_scaled(k: usize, x: Complex64, ctx: &QContext) -> Scaled {
    let xs = Scaled::from(x);
    hermite_with(k, |n| xs.powi(n as i32), ctx)
}

/// h̃_0..h̃_k(x;q) by h̃_{n+1} = x h̃_n - q^{-2n+1}(1 - q^n) h̃_{n-1}.
pub fn hermite_ii_recurrence(k: usize, x: Complex64, ctx: &QContext) -> Vec<Scaled> {
    let q = ctx.q;
    let xs = Scaled::from(x);
    let mut out = vec![Scaled::ONE, xs];
    for n in 1..k {
        let c = Scaled::exp_real((1.0 - 2.0 * n as f64) * ctx.ln_q()).mul_c(Complex64::new(1.0 - q.powi(n as i32), 0.0));
        let next = xs * out[n] - c * out[n - 1];
        out.push(next);
    }
    out.truncate(k + 1);
    out
}

fn rodrigues_prefactor(k: usize, ctx: &QContext) -> Scaled {
    let kf = k as f64;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    Scaled::from_parts(Complex64::new(sign, 0.0), (kf * kf - kf) / 2.0 * ctx.ln_q() - kf * (1.0 - ctx.q).ln())
}

fn rodrigues_scaled(k: usize, x: Complex64, ctx: &QContext) -> Result<Scaled> {
    check_gauss_poles(x, ctx)?;
    let e = Scaled::ONE / qpoch_base(-x * x, ctx.q * ctx.q, Len::Infinite, ctx)?;
    Ok(rodrigues_prefactor(k, ctx) * hermite_ii_scaled(k, x, ctx) * e)
}

fn rodrigues_lattice(k: usize, p: &LatticePoint, ctx: &QContext) -> Result<Scaled> {
    let lx = p.ln_abs(ctx);
    let eps = p.epsilon as f64;
    let h = hermite_with(k, |n| Scaled::from_parts(Complex64::new(eps.powi(n as i32), 0.0), n as f64 * lx), ctx);
    let e = Scaled::ONE / qpoch_int_exp(Complex64::new(-p.gamma * p.gamma, 0.0), 2 * p.k, 2, ctx)?;
    Ok(rodrigues_prefactor(k, ctx) * h * e)
}

/// (∂^k e_{q^2}(-X^2))(x) = (-1)^k q^{(k^2-k)/2}/(1-q)^k h̃_k(x;q) e_{q^2}(-x^2).
pub fn rodrigues_gaussian_derivative(k: usize, x: Complex64, ctx: &QContext) -> Result<Complex64> {
    rodrigues_scaled(k, x, ctx).map(|s| s.to_c64())
}

/// K(t, x) = Σ_k q^{k^2} t^k h̃_k(x;q)/(q;q)_k.
pub fn kernel_k(t: Complex64, x: Complex64, ctx: &QContext) -> Result<Complex64> {
    let q = ctx.q;
    let ts = Scaled::from(t);
    let mut sum = Scaled::ZERO;
    let mut abs_sum = Scaled::ZERO;
    let mut small = 0;
    let mut lqq = 0.0;
    for k in 0..ctx.max_terms {
        if k > 0 {
            lqq += (1.0 - pow_q(q, k as i64)).ln();
        }
        let kf = k as f64;
        let term = (ts.powi(k as i32) * hermite_ii_scaled(k, x, ctx)).scale_exp(kf * kf * ctx.ln_q() - lqq);
        sum = sum + term;
        abs_sum = abs_sum + term.abs();
        if term.small_rel(&abs_sum, ctx.tail_rel_tol * 1e-2) {
            small += 1;
            if small >= ctx.decay_window {
                return Ok(sum.to_c64());
            }
        } else {
            small = 0;
        }
    }
    Err(QError::CapExceeded { what: "kernel K(t,x) series", cap: ctx.max_terms })
}

/// Basic hypergeometric 1phi1(a; b; q, z) in the Gasper–Rahman convention.
pub fn phi11(a: Complex64, b: Complex64, z: Complex64, ctx: &QContext) -> Result<Complex64> {
    let q = ctx.q;
    let mut term = ONE;
    let mut sum = ONE;
    let mut small = 0;
    for n in 0..ctx.max_terms as i64 {
        let qn = pow_q(q, n);
        term *= (ONE - a * qn) / ((1.0 - q * qn) * (ONE - b * qn)) * (-qn) * z;
        sum += term;
        if term.norm() <= ctx.tail_rel_tol * 1e-2 * sum.norm().max(1e-300) {
            small += 1;
            if small >= ctx.decay_window {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(QError::CapExceeded { what: "1phi1 series", cap: ctx.max_terms })
}

/// Closed-form moments of g_m:
/// c_q(γ)(q^2;q^2)_inf/(q^{2m+1};q^2)_inf · q^{k^2+k}(q;q^2)_k/(q^2;q^2)_{m-k-1}
/// for e = 2k, k < m, and 0 otherwise.
pub fn gm_moment_closed_form(m: u32, e: usize, gamma: f64, ctx: &QContext) -> Result<Complex64> {
    let m = m as usize;
    if e % 2 == 1 || e / 2 >= m {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let k = e / 2;
    let q = ctx.q;
    let q2 = q * q;
    let inf = |a: f64| qpoch_base(Complex64::new(a, 0.0), q2, Len::Infinite, ctx).map(|s| s.to_c64().re);
    let fin = |a: f64, n: usize| qpoch_base(Complex64::new(a, 0.0), q2, Len::Finite(n), ctx).map(|s| s.to_c64().re);
    let pre = constant_cq(gamma, ctx)? * inf(q2)? / inf(pow_q(q, 2 * m as i64 + 1))?;
    let kk = k as i64;
    let v = pre * pow_q(q, kk * kk + kk) * fin(q, k)? / fin(q2, m - k - 1)?;
    Ok(Complex64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(kind: SpecialKind, q: f64) -> SpecialFunction {
        SpecialFunction::new(kind, &QContext::new(q).unwrap())
    }

    #[test]
    fn exponentials_at_zero_and_reciprocity() {
        let c = QContext::new(0.5).unwrap();
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(eval_special(&sf(SpecialKind::EqBig, 0.5), z).unwrap(), ONE);
        assert_eq!(eval_special(&sf(SpecialKind::EqSmall, 0.5), z).unwrap(), ONE);
        for x in [Complex64::new(0.3, 0.1), Complex64::new(-3.7, 0.4), Complex64::new(5.5, -2.0)] {
            let a = eval_special(&sf(SpecialKind::EqSmall, 0.5), x).unwrap();
            let b = eval_special(&sf(SpecialKind::EqBig, 0.5), -x).unwrap();
            assert!((a * b - ONE).norm() < 1e-13);
            if x.norm() <= 2.0 {
                let s = eq_big_series(x, &c).unwrap();
                assert!((s - eval_special(&sf(SpecialKind::EqBig, 0.5), x).unwrap()).norm() < 1e-12 * s.norm());
            }
        }
        assert!(matches!(eval_special(&sf(SpecialKind::EqSmall, 0.5), Complex64::new(2.0, 0.0)), Err(QError::Pole { .. })));
    }

    #[test]
    fn hermite_at_i() {
        for q in [0.5, 0.7] {
            let c = QContext::new(q).unwrap();
            for k in 0..=12usize {
                let h = hermite_ii(k, I, &c);
                let want = I.powi(k as i32) * q.powf(-((k * (k.max(1) - 1)) as f64) / 2.0);
                assert!((h - want).norm() < 1e-12 * want.norm(), "k={k} q={q}");
            }
        }
    }

    #[test]
    fn hermite_low_orders() {
        let c = QContext::new(0.5).unwrap();
        let x = Complex64::new(0.37, -1.2);
        assert_eq!(hermite_ii(0, x, &c), ONE);
        assert!((hermite_ii(1, x, &c) - x).norm() < 1e-15);
    }

    #[test]
    fn hermite_recurrence_matches_sum() {
        for q in [0.5, 0.7] {
            let c = QContext::new(q).unwrap();
            for x in [Complex64::new(32.0, 0.0), Complex64::new(0.25, 0.0), Complex64::new(0.3, 1.1)] {
                let rec = hermite_ii_recurrence(70, x, &c);
                for (k, r) in rec.iter().enumerate() {
                    let s = hermite_ii_scaled(k, x, &c);
                    assert!((*r - s).norm_f64() <= 1e-10 * s.norm_f64().max(r.norm_f64()), "q={q} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn kernel_at_i_is_big_exponential() {
        for q in [0.5, 0.7] {
            let c = QContext::new(q).unwrap();
            for t in [ONE, -ONE, Complex64::new(q, 0.0), Complex64::new(-q, 0.0), Complex64::new(0.0, 2.0)] {
                let k = kernel_k(t, I, &c).unwrap();
                let e = eval_special(&sf(SpecialKind::EqBig, q), I * q * t).unwrap();
                // E_q(-1) = 0 exactly at q = 1/2, so zero values are compared absolutely.
                assert!((k - e).norm() < 1e-10 * e.norm().max(1.0), "q={q} t={t} {k} vs {e}");
            }
            assert_eq!(kernel_k(Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.2), &c).unwrap(), ONE);
        }
    }

    #[test]
    fn alt_example_decay_identity() {
        let c = QContext::new(0.5).unwrap();
        let g = sf(SpecialKind::AltExample, 0.5);
        let q = 0.5f64;
        let m1 = qpoch_base(Complex64::new(-1.0, 0.0), q * q, Len::Infinite, &c).unwrap().to_c64().re;
        for k in 0..=20i64 {
            for eps in [1i8, -1] {
                let v = g.eval_lattice(&LatticePoint::new(eps, -k, 1.0, &c)).unwrap();
                let want = q.powi((k * k) as i32) / (qpoch_base(Complex64::new(-q * q, 0.0), q * q, Len::Finite(k as usize), &c).unwrap().to_c64().re * m1);
                assert!((v.norm_f64() - want).abs() < 1e-12 * want);
            }
        }
        assert!(eval_special(&g, Complex64::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn gauss_cal_sum_matches_series() {
        for q in [0.5, 0.7] {
            let c = QContext::new(q).unwrap();
            let g = sf(SpecialKind::GaussCal, q);
            for x in [0.0, 0.4, 1.0, 1.7, 2.5] {
                let z = Complex64::new(x, 0.0);
                let a = eval_special(&g, z).unwrap();
                let b = gauss_cal_series(z, &c).unwrap();
                assert!((a - b).norm() < 1e-12, "q={q} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn g0_is_real_part_of_small_exponential() {
        let c = QContext::new(0.5).unwrap();
        let g0 = sf(SpecialKind::Gm(0), 0.5);
        let e = sf(SpecialKind::EqSmall, 0.5);
        for k in 0..12 {
            for eps in [1i8, -1] {
                let p = LatticePoint::new(eps, k, 1.0, &c);
                let a = g0.eval_lattice(&p).unwrap().to_c64();
                let b = eval_special(&e, I * p.value).unwrap().re;
                assert!((a.re - b).abs() < 1e-10, "k={k}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for s in ["eq", "Eq", "gauss_e", "gauss_E", "gauss_cal", "gm:3", "alt", "strip:0.5"] {
            assert_eq!(s.parse::<SpecialKind>().unwrap().to_string(), s);
        }
        assert!("nope".parse::<SpecialKind>().is_err());
        assert!("gm".parse::<SpecialKind>().is_err());
    }
}
