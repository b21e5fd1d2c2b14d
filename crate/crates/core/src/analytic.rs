//! Deciding analytic extendability of a lattice function from uniform
//! q-derivative bounds, the derivative limits l_p = lim ∂^p g(εq^kγ), and
//! the reconstructed power series Σ l_k x^k/[k]_q!.

use crate::convolution::PowerSeries;
use crate::deriv::{q_derivatives, DerivMethod, Point};
use crate::error::{QError, Result};
use crate::lattice::{Analyticity, Evaluate, LatticeFunction, LatticePoint, Parity, Repr};
use crate::par;
use crate::qcore::{constant_cq, q_binomial, q_factorial_scaled, QContext};
use crate::scaled::Scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Evidence that |∂^k g(εq^tγ)| ≤ C r / ((r - q^tγ) r^k (1-q)^k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub k_max: usize,
    /// Lattice exponents t that were checked (inclusive).
    pub checked_indices: (i64, i64),
    pub holds: bool,
    pub worst_ratio: f64,
    /// max_k |∂^k g(q^tγ) - ∂^k g(-q^tγ)| at the innermost checked t.
    pub epsilon_agreement: Option<f64>,
}

impl BoundCertificate {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "r": self.r,
            "C": self.c,
            "k_max": self.k_max,
            "holds": self.holds,
            "worst_ratio": self.worst_ratio,
            "epsilon_agreement": self.epsilon_agreement,
        })
    }
}

/// ln|∂^k g(εq^tγ)| for both signs over a window of t.
struct DerivativeGrid {
    gamma: f64,
    k_max: usize,
    ts: Vec<i64>,
    // [t index][sign index][k]
    ln_abs: Vec<[Vec<f64>; 2]>,
    eps_agreement: f64,
}

fn default_window(g: &LatticeFunction, k_max: usize, ctx: &QContext) -> Result<(i64, i64)> {
    match g.repr() {
        Repr::Table(t) => {
            let hi = t.k_hi() - k_max as i64;
            if hi < t.k_lo {
                return Err(QError::WindowExceeded { k: t.k_lo + k_max as i64, lo: t.k_lo, hi: t.k_hi() });
            }
            Ok((t.k_lo, hi))
        }
        // Points inside the widest tested disk, r = 4γ, and 30 steps inward.
        Repr::Rule(_) => {
            let t0 = (4f64.ln() / ctx.ln_q()).floor() as i64 + 1;
            Ok((t0, t0 + 30))
        }
    }
}

impl DerivativeGrid {
    fn build(g: &LatticeFunction, k_max: usize, window: Option<(i64, i64)>, ctx: &QContext) -> Result<Self> {
        let gamma = g.gamma();
        let (lo, hi) = match window {
            Some(w) => w,
            None => default_window(g, k_max, ctx)?,
        };
        let ts: Vec<i64> = (lo..=hi).collect();
        let rows = par::map_slice(&ts, |&t| -> Result<[Vec<f64>; 2]> {
            let one = |eps: i8| -> Result<Vec<Scaled>> {
                let p = LatticePoint::new(eps, t, gamma, ctx);
                q_derivatives(g, Point::Lattice(p), k_max, DerivMethod::Auto, ctx)
            };
            let (a, b) = (one(1)?, one(-1)?);
            Ok([a.iter().map(|s| s.ln_abs()).collect(), b.iter().map(|s| s.ln_abs()).collect()])
        });
        let ln_abs = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let last = *ts.last().ok_or(QError::Domain("empty certification window".into()))?;
        let a = q_derivatives(g, Point::Lattice(LatticePoint::new(1, last, gamma, ctx)), k_max, DerivMethod::Auto, ctx)?;
        let b = q_derivatives(g, Point::Lattice(LatticePoint::new(-1, last, gamma, ctx)), k_max, DerivMethod::Auto, ctx)?;
        let eps_agreement = a.iter().zip(&b).map(|(x, y)| (*x - *y).norm_f64()).fold(0.0, f64::max);
        Ok(DerivativeGrid { gamma, k_max, ts, ln_abs, eps_agreement })
    }

    fn certify(&self, r: f64, c: f64, ctx: &QContext) -> BoundCertificate {
        let lq = (1.0 - ctx.q).ln();
        let mut worst = f64::NEG_INFINITY;
        let mut used = (i64::MAX, i64::MIN);
        for (i, &t) in self.ts.iter().enumerate() {
            let x = self.gamma * ctx.q.powi(t as i32);
            if x >= r {
                continue;
            }
            used = (used.0.min(t), used.1.max(t));
            let base = (r - x).ln() - c.ln() - r.ln();
            for sign in &self.ln_abs[i] {
                for (k, &la) in sign.iter().enumerate() {
                    if la == f64::NEG_INFINITY {
                        continue;
                    }
                    let lr = la + base + k as f64 * (r.ln() + lq);
                    worst = worst.max(lr);
                }
            }
        }
        let worst_ratio = if worst == f64::NEG_INFINITY { 0.0 } else { worst.exp() };
        BoundCertificate {
            r,
            c,
            k_max: self.k_max,
            checked_indices: used,
            holds: worst_ratio <= 1.0,
            worst_ratio,
            epsilon_agreement: Some(self.eps_agreement),
        }
    }
}

/// Checks the derivative bound for one (r, C).
pub fn certify_bounds(g: &LatticeFunction, r: f64, c: f64, k_max: usize, ctx: &QContext) -> Result<BoundCertificate> {
    certify_bounds_window(g, r, c, k_max, None, ctx)
}

pub fn certify_bounds_window(
    g: &LatticeFunction,
    r: f64,
    c: f64,
    k_max: usize,
    window: Option<(i64, i64)>,
    ctx: &QContext,
) -> Result<BoundCertificate> {
    if !(r > g.gamma()) || !(c > 0.0) {
        return Err(QError::Domain(format!("need r > gamma = {} and C > 0, got r = {r}, C = {c}", g.gamma())));
    }
    Ok(DerivativeGrid::build(g, k_max, window, ctx)?.certify(r, c, ctx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    /// The certificate with the smallest worst ratio.
    pub best: BoundCertificate,
    pub grid_points: usize,
    pub holding: usize,
}

/// Searches r ∈ (γ, 4γ] (12 steps) and C ∈ [1, 1e6] (25 log steps). A failed
/// search is evidence, not proof, of non-extendability.
pub fn grid_search(g: &LatticeFunction, k_max: usize, ctx: &QContext) -> Result<GridSearch> {
    let grid = DerivativeGrid::build(g, k_max, None, ctx)?;
    let gamma = g.gamma();
    let mut best: Option<BoundCertificate> = None;
    let mut holding = 0;
    let mut n = 0;
    for i in 1..=12 {
        let r = gamma * (1.0 + 3.0 * i as f64 / 12.0);
        for j in 0..=24 {
            let c = 10f64.powf(6.0 * j as f64 / 24.0);
            let cert = grid.certify(r, c, ctx);
            n += 1;
            if cert.holds {
                holding += 1;
            }
            if best.as_ref().map_or(true, |b| cert.worst_ratio < b.worst_ratio) {
                best = Some(cert);
            }
        }
    }
    Ok(GridSearch { best: best.expect("non-empty grid"), grid_points: n, holding })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeLimits {
    pub gamma: f64,
    /// l_p from the ε = +1 half-lattice.
    pub l: Vec<Complex64>,
    /// l_p from the ε = -1 half-lattice.
    pub l_minus: Vec<Complex64>,
    /// Estimated remaining drift of each l_p.
    pub convergence_evidence: Vec<f64>,
    /// |l_p(+) - l_p(-)|.
    pub epsilon_agreement: Vec<f64>,
}

/// Default drift acceptance, absolute below |l_p| = 1 and relative above.
pub const DEFAULT_DRIFT_TOL: f64 = 1e-9;

pub fn derivative_limits(g: &LatticeFunction, p_max: usize, ctx: &QContext) -> Result<DerivativeLimits> {
    derivative_limits_with(g, p_max, DEFAULT_DRIFT_TOL, ctx)
}

/// Estimates l_p for p ≤ p_max.
///
/// Rules with closed-form lattice derivatives are read off deep inside the
/// lattice (where ∂^p g(εq^kγ) - l_p = O(q^k) is below rounding) and
/// cross-validated against the two preceding points. Otherwise ∂^p g is
/// formed by difference quotients and extrapolated to x = 0 with Neville's
/// scheme on the geometric nodes q^kγ; the window whose estimate best agrees
/// with its neighbour's is kept, and that disagreement is the evidence.
pub fn derivative_limits_with(g: &LatticeFunction, p_max: usize, drift_tol: f64, ctx: &QContext) -> Result<DerivativeLimits> {
    let gamma = g.gamma();
    let exact = match g.repr() {
        Repr::Rule(ev) => ev.exact_lattice_derivative(0, &LatticePoint::new(1, 0, gamma, ctx)).is_some(),
        Repr::Table(_) => false,
    };
    let mut sides = Vec::with_capacity(2);
    for eps in [1i8, -1] {
        let side = if exact { exact_side(g, eps, p_max, ctx)? } else { extrapolated_side(g, eps, p_max, ctx)? };
        sides.push(side);
    }
    let (plus, minus) = (&sides[0], &sides[1]);
    let l: Vec<Complex64> = plus.iter().map(|s| s.0).collect();
    let l_minus: Vec<Complex64> = minus.iter().map(|s| s.0).collect();
    let convergence_evidence: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a.1.max(b.1)).collect();
    for (p, d) in convergence_evidence.iter().enumerate() {
        if !(*d <= drift_tol * l[p].norm().max(1.0)) {
            return Err(QError::NonConvergent { p, drift: *d });
        }
    }
    let epsilon_agreement = l.iter().zip(&l_minus).map(|(a, b)| (a - b).norm()).collect();
    Ok(DerivativeLimits { gamma, l, l_minus, convergence_evidence, epsilon_agreement })
}

fn exact_side(g: &LatticeFunction, eps: i8, p_max: usize, ctx: &QContext) -> Result<Vec<(Complex64, f64)>> {
    let gamma = g.gamma();
    // q^K γ below 1e-17: the O(x) remainder is beneath double rounding.
    let k = ((1e-17f64 / gamma).ln() / ctx.ln_q()).ceil() as i64;
    let at = |k: i64| -> Result<Vec<Complex64>> {
        let p = LatticePoint::new(eps, k, gamma, ctx);
        Ok(q_derivatives(g, Point::Lattice(p), p_max, DerivMethod::Auto, ctx)?.iter().map(|s| s.to_c64()).collect())
    };
    let (a, b, c) = (at(k)?, at(k - 1)?, at(k - 2)?);
    Ok((0..=p_max).map(|p| (a[p], (a[p] - b[p]).norm().max((a[p] - c[p]).norm()))).collect())
}

/// Neville extrapolation to 0 of (x_i, y_i).
fn neville_at_zero(x: &[f64], y: &[Complex64]) -> Complex64 {
    let mut p = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i] * x[i + m] - p[i + 1] * x[i]) / (x[i + m] - x[i]);
        }
    }
    p[0]
}

const MAX_NODES: usize = 10;
const NODE_FLOOR: f64 = 1e-8;

fn extrapolated_side(g: &LatticeFunction, eps: i8, p_max: usize, ctx: &QContext) -> Result<Vec<(Complex64, f64)>> {
    let gamma = g.gamma();
    let (lo, hi) = match g.repr() {
        Repr::Table(t) => (t.k_lo.max(0), t.k_hi()),
        Repr::Rule(_) => (0, 40),
    };
    if hi - lo < p_max as i64 + 2 {
        return Err(QError::InsufficientData { need: p_max + 3, have: (hi - lo + 1).max(0) as usize });
    }
    let ts: Vec<i64> = (lo..=hi - p_max as i64).collect();
    let rows = par::map_slice(&ts, |&t| {
        let room = ((hi - t) as usize).min(p_max);
        let p = LatticePoint::new(eps, t, gamma, ctx);
        q_derivatives(g, Point::Lattice(p), room, DerivMethod::Auto, ctx).map(|v| v.iter().map(|s| s.to_c64()).collect::<Vec<_>>())
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ts.iter().map(|&t| gamma * ctx.q.powi(t as i32)).collect();
    let mut out = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        // The p-th difference quotient at x carries roundoff ~ ε/((1-q)x)^p;
        // nodes beyond that are noise plateaus that would look "stable".
        let usable = xs.iter().take_while(|&&x| ((1.0 - ctx.q) * x).powi(p as i32) >= NODE_FLOOR).count().max(3).min(xs.len());
        let ys: Vec<Complex64> = rows[..usable].iter().map(|r| r[p]).collect();
        let xs = &xs[..usable];
        let mut best = (ys[ys.len() - 1], f64::INFINITY);
        // An estimate counts only if it is stable both under shifting the
        // window inward and under dropping its outermost node.
        let est = |s: usize, m: usize| neville_at_zero(&xs[s..s + m], &ys[s..s + m]);
        for m in 2..=MAX_NODES.min(ys.len().saturating_sub(2)) {
            for s in 0..ys.len() - m {
                let b = est(s + 1, m);
                let d = (est(s, m) - b).norm().max((est(s + 2, m - 1) - b).norm());
                if d < best.1 {
                    best = (b, d);
                }
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Σ_k l_k x^k/[k]_q! from the two-sided limits.
pub fn reconstruct_series(dl: &DerivativeLimits, tol: f64, ctx: &QContext) -> Result<PowerSeries> {
    for (p, d) in dl.epsilon_agreement.iter().enumerate() {
        if !(*d <= tol * dl.l[p].norm().max(1.0)) {
            return Err(QError::EpsilonMismatch { p, delta: *d });
        }
    }
    Ok(series_from(&dl.l, ctx))
}

/// The half-lattice extension for one sign, which exists even when the two
/// sides disagree.
pub fn reconstruct_half(dl: &DerivativeLimits, epsilon: i8, ctx: &QContext) -> PowerSeries {
    series_from(if epsilon >= 0 { &dl.l } else { &dl.l_minus }, ctx)
}

fn series_from(l: &[Complex64], ctx: &QContext) -> PowerSeries {
    let c = l.iter().enumerate().map(|(k, v)| v / q_factorial_scaled(k, ctx).to_c64()).collect();
    PowerSeries::new(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheck {
    pub n: usize,
    pub value: Complex64,
    pub expansion: Complex64,
    /// |expansion - value| / max(|value|, Σ|terms|).
    pub residual: f64,
}

/// g(x) = Σ_{k≤n} qbinom(n,k) (1-q)^k x^k (∂^k g)(q^{n-k} x) at a lattice point.
pub fn taylor_identity(g: &LatticeFunction, x: &LatticePoint, n: usize, ctx: &QContext) -> Result<TaylorCheck> {
    let value = g.eval_at(x)?;
    let mut sum = Scaled::ZERO;
    let mut abs = Scaled::ZERO;
    for k in 0..=n {
        let at = x.shifted((n - k) as i64, ctx);
        let d = q_derivatives(g, Point::Lattice(at), k, DerivMethod::Auto, ctx)?[k];
        let w = Scaled::real(q_binomial(n, k, ctx)?) * Scaled::real(1.0 - ctx.q).powi(k as i32) * Scaled::from(x.complex()).powi(k as i32);
        let t = w * d;
        sum = sum + t;
        abs = abs + t.abs();
    }
    let scale = value.norm_f64().max(abs.norm_f64());
    let diff = (sum - value).norm_f64();
    Ok(TaylorCheck {
        n,
        value: value.to_c64(),
        expansion: sum.to_c64(),
        residual: if scale == 0.0 { diff } else { diff / scale },
    })
}

/// x ↦ ∫ e_{q²}(-t²) d_qt over L(|x|): constant c_q(γ) along each lattice
/// L(γ), yet not analytic at the origin.
pub struct TailIntegral {
    ctx: QContext,
}

impl TailIntegral {
    pub fn function(gamma: f64, ctx: &QContext) -> Result<LatticeFunction> {
        LatticeFunction::rule("tail_integral", Arc::new(TailIntegral { ctx: *ctx }), gamma, Analyticity::LatticeOnly, Parity::Even, ctx)
    }

    /// |c(γ√q) - c(γ)|: the value on a neighbouring lattice differs, so no
    /// single power series can match the function off L(γ).
    pub fn off_lattice_gap(gamma: f64, ctx: &QContext) -> Result<f64> {
        Ok((constant_cq(gamma * ctx.q.sqrt(), ctx)? - constant_cq(gamma, ctx)?).abs())
    }
}

impl Evaluate for TailIntegral {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z.im != 0.0 || z.re == 0.0 {
            return Err(QError::Domain("the tail integral is defined for real x != 0".into()));
        }
        Ok(Complex64::new(constant_cq(z.re.abs(), &self.ctx)?, 0.0))
    }
    // The point set L(q^k γ) is L(γ) itself.
    fn eval_lattice(&self, p: &LatticePoint) -> Result<Scaled> {
        Ok(Scaled::real(constant_cq(p.gamma, &self.ctx)?))
    }
    fn exact_lattice_derivative(&self, order: usize, p: &LatticePoint) -> Option<Result<Scaled>> {
        Some(if order == 0 { self.eval_lattice(p) } else { Ok(Scaled::ZERO) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Table;
    use crate::special::{SpecialFunction, SpecialKind};

    fn ctx() -> QContext {
        QContext::new(0.5).unwrap()
    }

    #[test]
    fn constant_table() {
        let c = ctx();
        let n = 30;
        let t = Table::new(1.0, 0, vec![Complex64::new(3.0, 0.0); n], vec![Complex64::new(3.0, 0.0); n]).unwrap();
        let g = LatticeFunction::table("three", t, Parity::Even);
        let cert = certify_bounds(&g, 2.0, 3.0, 5, &c).unwrap();
        assert!(cert.holds);
        let dl = derivative_limits(&g, 4, &c).unwrap();
        assert_eq!(dl.l[0], Complex64::new(3.0, 0.0));
        assert!(dl.l[1..].iter().all(|v| v.norm() == 0.0));
        let s = reconstruct_series(&dl, 1e-9, &c).unwrap();
        assert_eq!(s.coefficients[0], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn eq_limits_exact_route() {
        let c = ctx();
        let g = SpecialFunction::new(SpecialKind::EqBig, &c).on_lattice(1.0).unwrap();
        let dl = derivative_limits(&g, 10, &c).unwrap();
        let s = reconstruct_series(&dl, 1e-9, &c).unwrap();
        for k in 0..=10 {
            let want = 0.5f64.powi((k * (k - 1) / 2) as i32) / crate::qcore::qq_finite(k as usize, 0.5);
            assert!((s.coefficients[k as usize].re - want).abs() < 1e-12 * want, "{k}");
        }
    }

    #[test]
    fn tail_integral_is_lattice_constant() {
        let c = ctx();
        let g = TailIntegral::function(1.0, &c).unwrap();
        let dl = derivative_limits(&g, 3, &c).unwrap();
        let cq = constant_cq(1.0, &c).unwrap();
        assert_eq!(dl.l[0].re, cq);
        assert!(TailIntegral::off_lattice_gap(1.0, &c).unwrap() > 1e-6);
    }

    #[test]
    fn neville_is_exact_on_polynomials() {
        let x = [1.0, 0.5, 0.25, 0.125];
        let y: Vec<Complex64> = x.iter().map(|v| Complex64::new(2.0 + 3.0 * v - v * v, 0.0)).collect();
        assert!((neville_at_zero(&x, &y).re - 2.0).abs() < 1e-14);
    }
}
