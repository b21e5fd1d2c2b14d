//! The q-convolution (f *_γ g)(x) = Σ_e (-1)^e μ_{e,γ}(f)/[e]_q! (∂^e g)(x),
//! in pointwise and power-series form, its moments, type propagation and
//! commutator diagnostics.
//!
//! The left factor enters only through its moment sequence and the right
//! factor only as an evaluable function, exactly as in the definition.

use crate::deriv::{q_derivatives, DerivMethod, Point};
use crate::error::{QError, Result};
use crate::lattice::{Analyticity, Evaluate, LatticeFunction, LatticePoint, Repr};
use crate::moments::{MomentEntry, MomentSequence, NOISE_FLOOR};
use crate::qcore::{q_binomial, q_factorial_scaled, qq_finite, QContext};
use crate::lattice::Status;
use crate::scaled::Scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Σ c_l x^l with a radius estimate (None = infinite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub coefficients: Vec<Complex64>,
    pub radius_estimate: Option<f64>,
}

impl PowerSeries {
    pub fn new(coefficients: Vec<Complex64>) -> Self {
        let radius_estimate = estimate_radius(&coefficients);
        PowerSeries { coefficients, radius_estimate }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// The series as a lattice function (its exact q-derivatives come from
    /// shifting coefficients: ∂x^n = [n]_q x^{n-1}).
    pub fn to_lattice_function(&self, label: &str, gamma: f64, ctx: &QContext) -> Result<LatticeFunction> {
        let an = match self.radius_estimate {
            None => Analyticity::Entire,
            Some(r) => Analyticity::Disk(r),
        };
        let ev = SeriesEval { s: self.clone(), ctx: *ctx };
        LatticeFunction::rule(label, Arc::new(ev), gamma, an, crate::lattice::Parity::None, ctx)
    }

    /// Coefficients of ∂^k of the series.
    pub fn q_derivative(&self, k: usize, ctx: &QContext) -> PowerSeries {
        let c: Vec<Complex64> = (k..self.coefficients.len())
            .map(|n| self.coefficients[n] * (q_factorial_scaled(n, ctx) / q_factorial_scaled(n - k, ctx)).to_c64())
            .collect();
        PowerSeries { coefficients: c, radius_estimate: self.radius_estimate }
    }
}

/// 1/limsup |c_l|^{1/l} over the tail half of the list.
pub fn estimate_radius(c: &[Complex64]) -> Option<f64> {
    let n = c.len();
    if n < 4 {
        return None;
    }
    let mut sup = 0.0f64;
    for (l, cl) in c.iter().enumerate().skip(n / 2) {
        if l > 0 && cl.norm() > 0.0 {
            sup = sup.max(cl.norm().powf(1.0 / l as f64));
        }
    }
    if sup <= 1e-3 {
        // Superexponential decay over the visible tail: treat as entire.
        None
    } else {
        Some(1.0 / sup)
    }
}

struct SeriesEval {
    s: PowerSeries,
    ctx: QContext,
}

impl Evaluate for SeriesEval {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.s.eval(z))
    }
    fn exact_derivative(&self, order: usize, z: Complex64) -> Option<Result<Scaled>> {
        Some(Ok(Scaled::from(self.s.q_derivative(order, &self.ctx).eval(z))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConvStatus {
    Converged,
    Capped,
    /// Ran out of moments or table window before the tail rule was met.
    InputExhausted,
    /// Terms grow without bound.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionResult {
    pub value: Complex64,
    pub scaled: Scaled,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub status: ConvStatus,
    /// Σ|terms|; the rounding floor of `value`.
    pub abs_sum: f64,
}

impl ConvolutionResult {
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            ConvStatus::Converged => Ok(self),
            ConvStatus::Divergent => Err(QError::Divergent(format!("convolution terms grow after {} terms", self.terms_used))),
            ConvStatus::Capped => Err(QError::CapExceeded { what: "convolution series", cap: self.terms_used }),
            ConvStatus::InputExhausted => Err(QError::EvaluationFailure(format!(
                "convolution input exhausted after {} terms (tail bound {:e})",
                self.terms_used, self.tail_bound
            ))),
        }
    }
}

/// Sums Σ_e (-1)^e μ_e/[e]! d_e with the tail rule; `exhausted` says whether
/// running off the end of `derivs` means missing data.
fn sum_series(fm: &MomentSequence, derivs: &[Scaled], exhausted: bool, ctx: &QContext) -> Result<ConvolutionResult> {
    let n = derivs.len().min(fm.len());
    let tol = ctx.tail_rel_tol;
    let mut sum = Scaled::ZERO;
    let mut abs_sum = Scaled::ZERO;
    let mut small = 0usize;
    let mut grow = 0usize;
    let mut prev: Option<(usize, f64)> = None;
    let mut prev_rate = f64::NAN;
    let mut last_nonzero = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for e in 0..n {
        let mu = fm.effective(e)?;
        let t = if mu.is_zero() || derivs[e].is_zero() {
            Scaled::ZERO
        } else {
            let sign = if e % 2 == 0 { 1.0 } else { -1.0 };
            (mu * derivs[e] / q_factorial_scaled(e, ctx)).mul_c(Complex64::new(sign, 0.0))
        };
        if !t.is_finite() {
            return Err(QError::EvaluationFailure(format!("non-finite convolution term at e = {e}")));
        }
        sum = sum + t;
        abs_sum = abs_sum + t.abs();
        if t.small_rel(&abs_sum, tol) {
            small += 1;
        } else {
            small = 0;
        }
        let ln = t.ln_abs();
        if ln.is_finite() {
            last_nonzero = (last_nonzero.1, ln);
            if let Some((pe, pl)) = prev {
                let rate = (ln - pl) / (e - pe) as f64;
                if rate > 0.0 && (prev_rate.is_nan() || rate >= prev_rate - 1e-9 * (1.0 + rate.abs())) {
                    grow += 1;
                } else {
                    grow = 0;
                }
                prev_rate = rate;
            }
            prev = Some((e, ln));
        }
        if grow >= ctx.decay_window && !t.small_rel(&abs_sum, tol) {
            return Ok(finish(sum, abs_sum, e + 1, f64::INFINITY, ConvStatus::Divergent));
        }
        if small >= ctx.decay_window {
            let (a, b) = last_nonzero;
            let tail = if b.is_finite() && a.is_finite() && b < a {
                let r = (b - a).exp();
                b.exp() * r / (1.0 - r)
            } else {
                0.0
            };
            return Ok(finish(sum, abs_sum, e + 1, tail, ConvStatus::Converged));
        }
        if e + 1 >= ctx.max_terms {
            return Ok(finish(sum, abs_sum, e + 1, last_nonzero.1.exp(), ConvStatus::Capped));
        }
    }
    // Every remaining moment beyond the sequence is unknown.
    let status = if exhausted || n < derivs.len() || n == fm.len() { ConvStatus::InputExhausted } else { ConvStatus::Capped };
    Ok(finish(sum, abs_sum, n, last_nonzero.1.exp(), status))
}

fn finish(sum: Scaled, abs_sum: Scaled, terms: usize, tail: f64, status: ConvStatus) -> ConvolutionResult {
    ConvolutionResult { value: sum.to_c64(), scaled: sum, terms_used: terms, tail_bound: tail, status, abs_sum: abs_sum.norm_f64() }
}

/// q-derivatives of g at x up to `max_order`, or as many as a table window
/// allows (second component true when truncated by the window).
fn available_derivatives(g: &LatticeFunction, x: Point, max_order: usize, ctx: &QContext) -> Result<(Vec<Scaled>, bool)> {
    if let Repr::Table(t) = g.repr() {
        let Point::Lattice(p) = x else {
            return Err(QError::Domain("a table can only be convolved at its lattice points".into()));
        };
        if p.k < t.k_lo || p.k > t.k_hi() {
            return Err(QError::WindowExceeded { k: p.k, lo: t.k_lo, hi: t.k_hi() });
        }
        let room = (t.k_hi() - p.k) as usize;
        let ord = max_order.min(room);
        return Ok((q_derivatives(g, x, ord, DerivMethod::Auto, ctx)?, ord < max_order));
    }
    Ok((q_derivatives(g, x, max_order, DerivMethod::Auto, ctx)?, false))
}

/// (f *_γ g)(x) from the moments of f.
pub fn convolve_at(fm: &MomentSequence, g: &LatticeFunction, x: impl Into<Point>, ctx: &QContext) -> Result<ConvolutionResult> {
    let x = x.into();
    if fm.entries.iter().all(|e| !e.above_noise) {
        return Ok(finish(Scaled::ZERO, Scaled::ZERO, fm.len(), 0.0, ConvStatus::Converged));
    }
    let (d, truncated) = available_derivatives(g, x, fm.max_order(), ctx)?;
    sum_series(fm, &d, truncated, ctx)
}

/// (f *_γ ∂^k g)(x), which equals ∂^k(f *_γ g)(x) (derivative interchange).
pub fn convolve_derivative_at(fm: &MomentSequence, g: &LatticeFunction, x: impl Into<Point>, k: usize, ctx: &QContext) -> Result<ConvolutionResult> {
    let (d, truncated) = available_derivatives(g, x.into(), fm.max_order() + k, ctx)?;
    if d.len() <= k {
        return Ok(finish(Scaled::ZERO, Scaled::ZERO, 0, f64::INFINITY, ConvStatus::InputExhausted));
    }
    sum_series(fm, &d[k..], truncated, ctx)
}

/// The convolution f *_γ g as an evaluable rule; its q-derivatives are exact
/// through the interchange ∂^k(f*g) = f*∂^k g.
pub struct Convolved {
    fm: MomentSequence,
    g: LatticeFunction,
    ctx: QContext,
}

impl Convolved {
    pub fn function(fm: &MomentSequence, g: &LatticeFunction, ctx: &QContext) -> Result<LatticeFunction> {
        let ev = Convolved { fm: fm.clone(), g: g.clone(), ctx: *ctx };
        let an = g.analyticity();
        let parity = g.parity();
        let label = format!("(f *_{} {})", fm.gamma, g.label());
        let f = LatticeFunction::rule(label, Arc::new(ev), g.gamma(), an, parity, ctx)?;
        crate::lattice::Memo::wrap(&f, ctx)
    }

    fn at(&self, x: Point) -> Result<Scaled> {
        Ok(convolve_at(&self.fm, &self.g, x, &self.ctx)?.into_result()?.scaled)
    }

    fn batch(&self, x: Point, max_order: usize) -> Result<Vec<Scaled>> {
        let (d, truncated) = available_derivatives(&self.g, x, self.fm.max_order() + max_order, &self.ctx)?;
        (0..=max_order)
            .map(|k| {
                if d.len() <= k {
                    return Err(QError::EvaluationFailure("derivative window exhausted".into()));
                }
                Ok(sum_series(&self.fm, &d[k..], truncated, &self.ctx)?.into_result()?.scaled)
            })
            .collect()
    }
}

impl Evaluate for Convolved {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.at(Point::Complex(z)).map(|s| s.to_c64())
    }
    fn eval_lattice(&self, p: &LatticePoint) -> Result<Scaled> {
        self.at(Point::Lattice(*p))
    }
    fn exact_derivative(&self, order: usize, z: Complex64) -> Option<Result<Scaled>> {
        Some(self.batch(Point::Complex(z), order).map(|v| v[order]))
    }
    fn exact_lattice_derivative(&self, order: usize, p: &LatticePoint) -> Option<Result<Scaled>> {
        Some(self.batch(Point::Lattice(*p), order).map(|v| v[order]))
    }
    fn exact_derivatives(&self, max_order: usize, z: Complex64) -> Option<Result<Vec<Scaled>>> {
        Some(self.batch(Point::Complex(z), max_order))
    }
    fn exact_lattice_derivatives(&self, max_order: usize, p: &LatticePoint) -> Option<Result<Vec<Scaled>>> {
        Some(self.batch(Point::Lattice(*p), max_order))
    }
}

/// Coefficients b_p = Σ_e (-1)^e μ_e qbinom(p+e, e) c_{p+e} of f *_γ g for a
/// power series g.
pub fn convolve_series(fm: &MomentSequence, g: &PowerSeries, ctx: &QContext) -> Result<PowerSeries> {
    let l = g.coefficients.len();
    let mut out = Vec::with_capacity(l);
    for p in 0..l {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut abs = 0.0;
        let mut small = 0;
        for e in 0..l - p {
            if e > fm.max_order() {
                break;
            }
            let mu = fm.effective(e)?.to_c64();
            let sign = if e % 2 == 0 { 1.0 } else { -1.0 };
            let t = sign * mu * q_binomial(p + e, e, ctx)? * g.coefficients[p + e];
            sum += t;
            abs += t.norm();
            if t.norm() <= ctx.tail_rel_tol * abs {
                small += 1;
                if small >= ctx.decay_window {
                    break;
                }
            } else {
                small = 0;
            }
        }
        out.push(sum);
    }
    let mut s = PowerSeries::new(out);
    // The output is at least as analytic as g.
    s.radius_estimate = match (s.radius_estimate, g.radius_estimate) {
        (None, _) | (_, None) => g.radius_estimate.and(s.radius_estimate),
        (Some(a), Some(b)) => Some(a.max(b)),
    };
    Ok(s)
}

/// μ_k(f *_γ g) = Σ_e qbinom(k, e) μ_{e,γ}(f) μ_{k-e,γ'}(g).
pub fn convolution_moment(fm: &MomentSequence, gm: &MomentSequence, k: usize, ctx: &QContext) -> Result<Complex64> {
    Ok(convolution_moment_entry(fm, gm, k, ctx)?.mu.to_c64())
}

fn convolution_moment_entry(fm: &MomentSequence, gm: &MomentSequence, k: usize, ctx: &QContext) -> Result<MomentEntry> {
    if k > fm.max_order() || k > gm.max_order() {
        return Err(QError::Range { index: k, max: fm.max_order().min(gm.max_order()) });
    }
    let mut mu = Scaled::ZERO;
    let mut nu = Scaled::ZERO;
    let mut status = Status::Converged;
    for e in 0..=k {
        let b = q_binomial(k, e, ctx)?;
        let (a, c) = (&fm.entries[e], &gm.entries[k - e]);
        mu = mu + (fm.effective(e)? * gm.effective(k - e)?).mul_c(Complex64::new(b, 0.0));
        nu = nu + (a.nu * c.nu).mul_c(Complex64::new(b, 0.0));
        if a.status != Status::Converged || c.status != Status::Converged {
            status = Status::Capped;
        }
    }
    let above_noise = !mu.is_zero() && !mu.small_rel(&nu, NOISE_FLOOR);
    Ok(MomentEntry { e: k, mu, nu, status, above_noise })
}

/// Moment sequence of f *_γ g via the product formula. The `nu` field holds
/// the bound Σ qbinom(k,e) ν_e(f) ν_{k-e}(g) rather than a strict moment.
pub fn convolution_moments(fm: &MomentSequence, gm: &MomentSequence, ctx: &QContext) -> Result<MomentSequence> {
    let n = fm.max_order().min(gm.max_order());
    let entries = (0..=n).map(|k| convolution_moment_entry(fm, gm, k, ctx)).collect::<Result<Vec<_>>>()?;
    Ok(MomentSequence { gamma: fm.gamma, q: fm.q, entries })
}

/// η = αβ/(α+β), the type of a convolution of types α and β.
pub fn predicted_type(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(QError::Domain(format!("types must be positive, got {alpha} and {beta}")));
    }
    Ok(alpha * beta / (alpha + beta))
}

/// (f *_γ g)(x) - (g *_γ f)(x).
pub fn commutator_at(
    fm: &MomentSequence,
    gm: &MomentSequence,
    f: &LatticeFunction,
    g: &LatticeFunction,
    x: impl Into<Point>,
    ctx: &QContext,
) -> Result<Complex64> {
    let x = x.into();
    let a = convolve_at(fm, g, x, ctx)?.into_result()?;
    let b = convolve_at(gm, f, x, ctx)?.into_result()?;
    Ok((a.scaled - b.scaled).to_c64())
}

/// The probe Σ_k μ_{k,γ}(f) (iλ)^k/(q;q)_k.
///
/// The q-exponential kernel, expanded in its power series and integrated
/// termwise, gives exactly this normalisation; it agrees with the integral
/// transform of f at y = λ.
pub fn lambda_probe(fm: &MomentSequence, lambda: Complex64, ctx: &QContext) -> Result<Complex64> {
    Ok(moment_power_series(fm, Complex64::new(0.0, 1.0) * lambda, ctx)?.to_c64())
}

/// Σ_k μ_k w^k/(q;q)_k with the tail rule.
pub(crate) fn moment_power_series(fm: &MomentSequence, w: Complex64, ctx: &QContext) -> Result<Scaled> {
    let ws = Scaled::from(w);
    let mut sum = Scaled::ZERO;
    let mut abs = Scaled::ZERO;
    let mut small = 0;
    let mut grow = 0;
    let mut prev = f64::NAN;
    for k in 0..fm.len() {
        let mu = fm.effective(k)?;
        let t = (mu * ws.powi(k as i32)).mul_c(Complex64::new(1.0 / qq_finite(k, ctx.q), 0.0));
        sum = sum + t;
        abs = abs + t.abs();
        let ln = t.ln_abs();
        if ln.is_finite() && prev.is_finite() && ln > prev {
            grow += 1;
        } else if ln.is_finite() {
            grow = 0;
        }
        if ln.is_finite() {
            prev = ln;
        }
        if t.small_rel(&abs, ctx.tail_rel_tol) {
            small += 1;
            if small >= ctx.decay_window {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
        if grow >= ctx.decay_window.max(8) && k + 1 == fm.len() {
            break;
        }
    }
    if fm.entries.iter().all(|e| !e.above_noise) {
        return Ok(Scaled::ZERO);
    }
    if grow > 0 {
        Err(QError::Divergent(format!("moment series terms still growing at order {}", fm.max_order())))
    } else {
        Err(QError::InsufficientData { need: fm.len() + ctx.decay_window, have: fm.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> QContext {
        QContext::new(0.5).unwrap()
    }

    #[test]
    fn trivial_series_cases() {
        let c = ctx();
        let ms = MomentSequence::from_exact(1.0, 0.5, vec![Scaled::real(2.0), Scaled::real(3.0), Scaled::real(0.5)]);
        let one = PowerSeries::new(vec![Complex64::new(1.0, 0.0)]);
        let s = convolve_series(&ms, &one, &c).unwrap();
        assert_eq!(s.coefficients, vec![Complex64::new(2.0, 0.0)]);
        let x = PowerSeries::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let s = convolve_series(&ms, &x, &c).unwrap();
        assert_eq!(s.coefficients[0], Complex64::new(-3.0, 0.0));
        assert_eq!(s.coefficients[1], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn predicted_types() {
        assert_eq!(predicted_type(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(predicted_type(0.5, 0.5).unwrap(), 0.25);
        assert!(predicted_type(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_moments_give_zero() {
        let c = ctx();
        let ms = MomentSequence::zero(1.0, 0.5, 10);
        let g = LatticeFunction::from_fn("exp", |z: Complex64| z.exp(), 1.0, Analyticity::Entire, crate::lattice::Parity::None, &c).unwrap();
        let r = convolve_at(&ms, &g, Complex64::new(0.3, 0.0), &c).unwrap();
        assert_eq!(r.value, Complex64::new(0.0, 0.0));
        assert_eq!(r.status, ConvStatus::Converged);
        assert_eq!(lambda_probe(&ms, Complex64::new(0.7, 0.0), &c).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn convolution_moment_symmetry() {
        let c = ctx();
        let a = MomentSequence::from_exact(1.0, 0.5, (0..6).map(|e| Scaled::real(1.0 / (1.0 + e as f64))).collect());
        let b = MomentSequence::from_exact(1.0, 0.5, (0..6).map(|e| Scaled::real(0.5f64.powi(e))).collect());
        for k in 0..6 {
            assert_eq!(convolution_moment(&a, &b, k, &c).unwrap(), convolution_moment(&b, &a, k, &c).unwrap());
        }
        assert_eq!(convolution_moment(&a, &b, 0, &c).unwrap().re, 1.0);
    }
}
