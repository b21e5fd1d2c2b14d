//! q-Fourier transforms: the integral form with kernel E_q(iqxy), the
//! moment-series form, the inverse on the bounded lattice, and the
//! homomorphism F(f * g) = F(f) F(g).

use crate::convolution::{convolution_moments, moment_power_series};
use crate::error::{QError, Result};
use crate::lattice::{integrate_weighted, lattice_sum, LatticeFunction, LatticePoint, Parity, Status};
use crate::moments::MomentSequence;
use crate::qcore::{constant_bq, constant_cq, qpoch_int_exp, QContext};
use crate::scaled::Scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FourierForm {
    Integral,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierResult {
    pub value: Complex64,
    pub form: FourierForm,
    pub status: Status,
}

impl FourierResult {
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            Status::Converged => Ok(self),
            Status::Divergent => Err(QError::Divergent(format!("{:?} form of the transform", self.form))),
            Status::Capped => Err(QError::CapExceeded { what: "transform", cap: 0 }),
        }
    }
}

/// E_q(c q^{k+1}) as (-c q^{k+1}; q)_∞ with exact integer exponents.
fn kernel_big(c: Complex64, k: i64, ctx: &QContext) -> Result<Scaled> {
    qpoch_int_exp(-c, k + 1, 1, ctx)
}

/// ∫_γ E_q(iqxy) f(x) d_qx.
pub fn fourier_integral(f: &LatticeFunction, gamma: f64, y: Complex64, ctx: &QContext) -> Result<FourierResult> {
    let parity = if y == Complex64::new(0.0, 0.0) { f.parity() } else { Parity::None };
    // Kernel failures (caps) surface after the sweep; the weight closure
    // itself cannot return an error.
    let err = std::sync::Mutex::new(None);
    let weight = |p: &LatticePoint, v: Scaled| -> Scaled {
        if v.is_zero() {
            return v;
        }
        let c = Complex64::new(0.0, p.epsilon as f64 * p.gamma) * y;
        match kernel_big(c, p.k, ctx) {
            Ok(kv) => kv * v,
            Err(e) => {
                *err.lock().unwrap() = Some(e);
                Scaled::ZERO
            }
        }
    };
    let r = integrate_weighted(f, gamma, parity, false, &weight, ctx)?;
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e);
    }
    Ok(FourierResult { value: r.value, form: FourierForm::Integral, status: r.status })
}

/// Σ_k μ_{k,γ}(f) (iy)^k/(q;q)_k.
pub fn fourier_series(fm: &MomentSequence, y: Complex64, ctx: &QContext) -> Result<FourierResult> {
    let status = match moment_power_series(fm, Complex64::new(0.0, 1.0) * y, ctx) {
        Ok(v) => return Ok(FourierResult { value: v.to_c64(), form: FourierForm::Series, status: Status::Converged }),
        Err(QError::Divergent(_)) => Status::Divergent,
        Err(QError::InsufficientData { .. }) => Status::Capped,
        Err(e) => return Err(e),
    };
    Ok(FourierResult { value: Complex64::new(f64::NAN, f64::NAN), form: FourierForm::Series, status })
}

/// (1/(c_q(γ) b_q)) ∫_{-1}^{1} e_q(-ixy) φ(y) d_qy, with φ sampled at ±q^k.
pub fn fourier_inverse(
    phi: &(dyn Fn(f64) -> Result<Complex64> + Sync),
    x: Complex64,
    gamma: f64,
    ctx: &QContext,
) -> Result<Complex64> {
    let q = ctx.q;
    let lq = ctx.ln_q();
    let term = |k: i64| -> Result<Scaled> {
        let y = q.powi(k as i32);
        let mut s = Scaled::ZERO;
        for eps in [1.0, -1.0] {
            let v = phi(eps * y)?;
            if v == Complex64::new(0.0, 0.0) {
                continue;
            }
            // e_q(z) = 1/(z; q)_∞ with z = -i x eps q^k
            let d = qpoch_int_exp(Complex64::new(0.0, -eps) * x, k, 1, ctx)?;
            if d.is_zero() {
                return Err(QError::Pole { re: 0.0, im: -eps * y });
            }
            s = s + Scaled::from(v) / d;
        }
        Ok(s.scale_exp((1.0 - q).ln() + k as f64 * lq))
    };
    let r = lattice_sum(&term, true, ctx)?.into_result()?;
    let norm = constant_cq(gamma, ctx)? * constant_bq(ctx)?;
    Ok(r.value / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomomorphismReport {
    pub y: Complex64,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub difference: f64,
}

impl HomomorphismReport {
    pub fn relative(&self) -> f64 {
        let s = self.lhs.norm().max(self.rhs.norm());
        if s == 0.0 {
            self.difference
        } else {
            self.difference / s
        }
    }
}

/// F̃(f * g)(y) against F̃(f)(y) F̃(g)(y), the left side built from the
/// convolution-moment formula.
pub fn homomorphism_check(fm: &MomentSequence, gm: &MomentSequence, y: Complex64, ctx: &QContext) -> Result<HomomorphismReport> {
    let conv = convolution_moments(fm, gm, ctx)?;
    let lhs = fourier_series(&conv, y, ctx)?.into_result()?.value;
    let rhs = fourier_series(fm, y, ctx)?.into_result()?.value * fourier_series(gm, y, ctx)?.into_result()?.value;
    Ok(HomomorphismReport { y, lhs, rhs, difference: (lhs - rhs).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{SpecialFunction, SpecialKind};

    #[test]
    fn zero_frequency_is_the_integral() {
        let ctx = QContext::new(0.5).unwrap();
        let g = SpecialFunction::new(SpecialKind::GaussSmall, &ctx).on_lattice(1.0).unwrap();
        let r = fourier_integral(&g, 1.0, Complex64::new(0.0, 0.0), &ctx).unwrap();
        let c = constant_cq(1.0, &ctx).unwrap();
        assert!((r.value.re - c).abs() < 1e-13 * c);
    }

    #[test]
    fn zero_moments_zero_transform() {
        let ctx = QContext::new(0.5).unwrap();
        let ms = MomentSequence::zero(1.0, 0.5, 8);
        let r = fourier_series(&ms, Complex64::new(1.3, 0.0), &ctx).unwrap();
        assert_eq!(r.value, Complex64::new(0.0, 0.0));
        assert_eq!(fourier_inverse(&|_| Ok(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0), 1.0, &ctx).unwrap(), Complex64::new(0.0, 0.0));
    }
}
