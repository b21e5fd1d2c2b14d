//! Moments and strict moments, the left-type classifier and the pointwise
//! decay characterisation.

use crate::error::{QError, Result};
use crate::lattice::{integrate_weighted, LatticeFunction, LatticePoint, Parity, QIntegralResult, Status};
use crate::qcore::{q_factorial_scaled, QContext};
use crate::scaled::Scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Moments whose modulus is below this multiple of the strict moment are
/// indistinguishable from zero in double precision (the sum of the moduli
/// of the terms is nu_e itself).
pub const NOISE_FLOOR: f64 = 64.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub e: usize,
    pub mu: Scaled,
    pub nu: Scaled,
    pub status: Status,
    /// |mu| is above the rounding floor NOISE_FLOOR * nu.
    pub above_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    pub gamma: f64,
    pub q: f64,
    pub entries: Vec<MomentEntry>,
}

#[derive(Serialize)]
struct EntryJson {
    e: usize,
    mu_re: f64,
    mu_im: f64,
    nu: f64,
    log_abs_mu: Option<f64>,
    status: Status,
}

#[derive(Serialize)]
struct SequenceJson {
    gamma: f64,
    q: f64,
    entries: Vec<EntryJson>,
}

impl MomentSequence {
    pub fn max_order(&self) -> usize {
        self.entries.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn entry(&self, e: usize) -> Result<&MomentEntry> {
        self.entries.get(e).ok_or(QError::Range { index: e, max: self.max_order() })
    }

    pub fn mu(&self, e: usize) -> Result<Complex64> {
        Ok(self.entry(e)?.mu.to_c64())
    }

    pub fn mu_scaled(&self, e: usize) -> Result<Scaled> {
        Ok(self.entry(e)?.mu)
    }

    pub fn nu(&self, e: usize) -> Result<f64> {
        Ok(self.entry(e)?.nu.norm_f64())
    }

    /// The moment with entries at the rounding floor replaced by zero; this is
    /// what the convolution series consumes.
    pub fn effective(&self, e: usize) -> Result<Scaled> {
        let en = self.entry(e)?;
        Ok(if en.above_noise { en.mu } else { Scaled::ZERO })
    }

    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.status == Status::Converged)
    }

    /// A sequence from exactly known values (strict moments set to |mu|).
    pub fn from_exact(gamma: f64, q: f64, mu: Vec<Scaled>) -> Self {
        let entries = mu
            .into_iter()
            .enumerate()
            .map(|(e, m)| MomentEntry { e, mu: m, nu: m.abs(), status: Status::Converged, above_noise: !m.is_zero() })
            .collect();
        MomentSequence { gamma, q, entries }
    }

    pub fn zero(gamma: f64, q: f64, max_order: usize) -> Self {
        Self::from_exact(gamma, q, vec![Scaled::ZERO; max_order + 1])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries = self
            .entries
            .iter()
            .map(|en| {
                let mu = en.mu.to_c64();
                let l = en.mu.ln_abs();
                EntryJson { e: en.e, mu_re: mu.re, mu_im: mu.im, nu: en.nu.norm_f64(), log_abs_mu: l.is_finite().then_some(l), status: en.status }
            })
            .collect();
        serde_json::to_value(SequenceJson { gamma: self.gamma, q: self.q, entries }).expect("serialisable")
    }
}

fn power_weight(e: usize, ctx: &QContext) -> impl Fn(&LatticePoint, Scaled) -> Scaled + Sync + '_ {
    move |p, v| {
        let sign = if p.epsilon < 0 && e % 2 == 1 { -1.0 } else { 1.0 };
        v.mul_c(Complex64::new(sign, 0.0)).scale_exp(e as f64 * p.ln_abs(ctx))
    }
}

fn prefactor(e: usize, ctx: &QContext) -> f64 {
    let e = e as f64;
    (e * e + e) / 2.0 * ctx.ln_q()
}

/// q^{(e^2+e)/2} ∫_γ f X^e as a full integral result.
pub fn moment_result(f: &LatticeFunction, e: usize, gamma: f64, ctx: &QContext) -> Result<QIntegralResult> {
    let w = power_weight(e, ctx);
    let mut r = integrate_weighted(f, gamma, f.parity().times_power(e), false, &w, ctx)?;
    rescale(&mut r, prefactor(e, ctx));
    Ok(r)
}

/// q^{(e^2+e)/2} ∫_γ |f X^e|.
pub fn strict_moment_result(f: &LatticeFunction, e: usize, gamma: f64, ctx: &QContext) -> Result<QIntegralResult> {
    let w = power_weight(e, ctx);
    let wa = move |p: &LatticePoint, v: Scaled| w(p, v).abs();
    let par = if f.parity() == Parity::None { Parity::None } else { Parity::Even };
    let mut r = integrate_weighted(f, gamma, par, false, &wa, ctx)?;
    rescale(&mut r, prefactor(e, ctx));
    Ok(r)
}

fn rescale(r: &mut QIntegralResult, log: f64) {
    r.scaled = r.scaled.scale_exp(log);
    r.abs_sum = r.abs_sum.scale_exp(log);
    r.value = r.scaled.to_c64();
    r.tail_bound *= log.exp();
}

/// μ_{e,γ}(f).
pub fn moment(f: &LatticeFunction, e: usize, gamma: f64, ctx: &QContext) -> Result<Complex64> {
    Ok(moment_result(f, e, gamma, ctx)?.into_result()?.value)
}

/// ν_{e,γ}(f).
pub fn strict_moment(f: &LatticeFunction, e: usize, gamma: f64, ctx: &QContext) -> Result<f64> {
    Ok(strict_moment_result(f, e, gamma, ctx)?.into_result()?.value.re)
}

/// Entries 0..=max_order, each carrying its own status.
pub fn moment_sequence(f: &LatticeFunction, max_order: usize, gamma: f64, ctx: &QContext) -> Result<MomentSequence> {
    let raw = crate::par::map_indexed(2 * (max_order + 1), |i| {
        let e = i / 2;
        if i % 2 == 0 {
            moment_result(f, e, gamma, ctx)
        } else {
            strict_moment_result(f, e, gamma, ctx)
        }
    });
    let mut entries = Vec::with_capacity(max_order + 1);
    let mut it = raw.into_iter();
    for e in 0..=max_order {
        let m = it.next().unwrap()?;
        let n = it.next().unwrap()?;
        let status = match (m.status, n.status) {
            (Status::Converged, Status::Converged) => Status::Converged,
            (Status::Divergent, _) | (_, Status::Divergent) => Status::Divergent,
            _ => Status::Capped,
        };
        // The strict moment bounds the moment; keep that exact even when the
        // two sums truncate at slightly different places.
        let nu = if n.scaled.ln_abs() < m.scaled.ln_abs() { m.scaled.abs() } else { n.scaled.abs() };
        let above_noise = !m.scaled.is_zero() && !m.scaled.small_rel(&nu, NOISE_FLOOR);
        entries.push(MomentEntry { e, mu: m.scaled, nu, status, above_noise });
    }
    Ok(MomentSequence { gamma, q: ctx.q, entries })
}

/// μ_{order,γ}(∂^k f) = (-1)^k [order]_q!/[order-k]_q! μ_{order-k,γ}(f), and 0
/// for order < k.
pub fn derivative_moment(ms: &MomentSequence, order: usize, k: usize, ctx: &QContext) -> Result<Complex64> {
    Ok(derivative_moment_scaled(ms, order, k, ctx)?.to_c64())
}

pub fn derivative_moment_scaled(ms: &MomentSequence, order: usize, k: usize, ctx: &QContext) -> Result<Scaled> {
    if order < k {
        return Ok(Scaled::ZERO);
    }
    let e = order - k;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let r = q_factorial_scaled(order, ctx) / q_factorial_scaled(e, ctx);
    Ok((ms.mu_scaled(e)? * r).mul_c(Complex64::new(sign, 0.0)))
}

/// μ_{e,γ}(f X^k) = q^{-k^2/2 - k/2 - ek} μ_{k+e,γ}(f).
pub fn xk_multiplied_moment(ms: &MomentSequence, e: usize, k: usize, ctx: &QContext) -> Result<Complex64> {
    let (ef, kf) = (e as f64, k as f64);
    Ok(ms.mu_scaled(e + k)?.scale_exp(-(kf * kf / 2.0 + kf / 2.0 + ef * kf) * ctx.ln_q()).to_c64())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TypeKind {
    Left,
    StrictLeft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeClassification {
    pub kind: TypeKind,
    pub alpha_hat: f64,
    pub b_hat: f64,
    pub residual: f64,
    pub beta: Option<f64>,
    pub points_used: usize,
}

/// Default residual threshold (natural-log units) for accepting a fit.
pub const DEFAULT_RESIDUAL_THRESHOLD: f64 = 0.5;

/// Least squares of ln m_e against [(e^2/2) ln q, e, 1] over e in [E/2, E].
pub fn classify_type(ms: &MomentSequence, kind: TypeKind) -> Result<TypeClassification> {
    classify_type_with(ms, kind, DEFAULT_RESIDUAL_THRESHOLD)
}

pub fn classify_type_with(ms: &MomentSequence, kind: TypeKind, threshold: f64) -> Result<TypeClassification> {
    let big_e = ms.max_order();
    let lq = ms.q.ln();
    let mut rows = Vec::new();
    for en in &ms.entries[big_e / 2..] {
        let m = match kind {
            TypeKind::Left if en.above_noise => en.mu.ln_abs(),
            TypeKind::Left => continue,
            TypeKind::StrictLeft => en.nu.ln_abs(),
        };
        if m.is_finite() && en.status == Status::Converged {
            let e = en.e as f64;
            rows.push(([e * e / 2.0 * lq, e, 1.0], m));
        }
    }
    if rows.len() < 5 {
        return Err(QError::InsufficientData { need: 5, have: rows.len() });
    }
    let coef = least_squares3(&rows).ok_or_else(|| QError::EvaluationFailure("degenerate moment fit".into()))?;
    let rss: f64 = rows
        .iter()
        .map(|(x, y)| {
            let r = y - (coef[0] * x[0] + coef[1] * x[1] + coef[2] * x[2]);
            r * r
        })
        .sum();
    let residual = (rss / rows.len() as f64).sqrt();
    if residual > threshold {
        return Err(QError::NotOfLeftType { residual, threshold });
    }
    let alpha = coef[0];
    Ok(TypeClassification {
        kind,
        alpha_hat: alpha,
        b_hat: coef[1].exp(),
        residual,
        beta: (alpha < 1.0).then(|| 1.0 / (1.0 - alpha)),
        points_used: rows.len(),
    })
}

/// Solves the 3-column normal equations; None if singular.
pub(crate) fn least_squares3(rows: &[([f64; 3], f64)]) -> Option<[f64; 3]> {
    let mut a = [[0.0f64; 4]; 3];
    for (x, y) in rows {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += x[i] * x[j];
            }
            a[i][3] += x[i] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

/// Result of fitting ln|f(±q^{-j}γ)| ≈ (β/2) j^2 ln q + j ln c + const.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted β; infinite if f vanishes identically at large j.
    pub beta_hat: f64,
    pub c_hat: f64,
    pub residual: f64,
    /// α = 1 - 1/β implied by the converse direction.
    pub alpha_implied: f64,
    pub vanishes: bool,
    pub j_max: i64,
}

/// Forward direction of the pointwise characterisation: sample f at
/// ±q^{-j}γ for j <= j_max and fit the decay exponent over j in [j_max/2, j_max].
pub fn pointwise_decay_check(f: &LatticeFunction, gamma: f64, j_max: i64, ctx: &QContext) -> Result<DecayFit> {
    if j_max < 10 {
        return Err(QError::InsufficientData { need: 10, have: j_max.max(0) as usize });
    }
    let lq = ctx.ln_q();
    let mut rows = Vec::new();
    let mut zeros = 0;
    for j in j_max / 2..=j_max {
        let a = f.eval_at(&LatticePoint::new(1, -j, gamma, ctx))?;
        let b = f.eval_at(&LatticePoint::new(-1, -j, gamma, ctx))?;
        let m = a.ln_abs().max(b.ln_abs());
        if m == f64::NEG_INFINITY {
            zeros += 1;
            continue;
        }
        let jf = j as f64;
        rows.push(([jf * jf / 2.0 * lq, jf, 1.0], m));
    }
    if rows.is_empty() && zeros > 0 {
        return Ok(DecayFit { beta_hat: f64::INFINITY, c_hat: 0.0, residual: 0.0, alpha_implied: 1.0, vanishes: true, j_max });
    }
    if rows.len() < 5 {
        return Err(QError::InsufficientData { need: 5, have: rows.len() });
    }
    let coef = least_squares3(&rows).ok_or_else(|| QError::EvaluationFailure("degenerate decay fit".into()))?;
    let rss: f64 = rows.iter().map(|(x, y)| (y - (coef[0] * x[0] + coef[1] * x[1] + coef[2] * x[2])).powi(2)).sum();
    let beta = coef[0];
    Ok(DecayFit {
        beta_hat: beta,
        c_hat: coef[1].exp(),
        residual: (rss / rows.len() as f64).sqrt(),
        alpha_implied: if beta > 1.0 { 1.0 - 1.0 / beta } else { f64::NAN },
        vanishes: false,
        j_max,
    })
}

/// Converse direction: decay exponent β > 1 plus boundedness on {±q^jγ, j >= 1}
/// gives strict left type α = 1 - 1/β. Boundedness is sampled up to
/// `ctx.max_lattice_index`, so this is a finite certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverseCertificate {
    pub beta: f64,
    pub alpha: f64,
    pub sup_small: f64,
    pub bounded: bool,
}

pub fn pointwise_converse(f: &LatticeFunction, beta: f64, gamma: f64, j_max: i64, ctx: &QContext) -> Result<ConverseCertificate> {
    if !(beta > 1.0) {
        return Err(QError::Domain(format!("converse needs a decay exponent beta > 1, got {beta}")));
    }
    let mut sup = 0.0f64;
    for j in 1..=j_max.min(ctx.max_lattice_index) {
        for eps in [1, -1] {
            sup = sup.max(f.eval_at(&LatticePoint::new(eps, j, gamma, ctx))?.norm_f64());
        }
    }
    let alpha = if beta.is_infinite() { 1.0 } else { 1.0 - 1.0 / beta };
    Ok(ConverseCertificate { beta, alpha, sup_small: sup, bounded: sup.is_finite() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{SpecialFunction, SpecialKind};

    #[test]
    fn fit_recovers_exact_quadratic_exponent() {
        let q: f64 = 0.5;
        let mu: Vec<Scaled> = (0..=30)
            .map(|e| Scaled::exp_real(0.37 * (e * e) as f64 / 2.0 * q.ln() + 0.2 * e as f64 + 1.0))
            .collect();
        let ms = MomentSequence::from_exact(1.0, q, mu);
        let t = classify_type(&ms, TypeKind::Left).unwrap();
        assert!((t.alpha_hat - 0.37).abs() < 1e-9);
        assert!((t.b_hat - 0.2f64.exp()).abs() < 1e-9);
        assert!(t.residual < 1e-9);
    }

    #[test]
    fn even_function_has_exact_odd_zeros_and_dominated_moments() {
        let c = QContext::new(0.5).unwrap();
        let f = SpecialFunction::new(SpecialKind::GaussSmall, &c).on_lattice(1.0).unwrap();
        let ms = moment_sequence(&f, 9, 1.0, &c).unwrap();
        for en in &ms.entries {
            assert!(en.nu.ln_abs() >= en.mu.ln_abs());
            if en.e % 2 == 1 {
                assert!(en.mu.is_zero());
            }
        }
    }

    #[test]
    fn derivative_moment_identity_and_low_orders() {
        let c = QContext::new(0.5).unwrap();
        let ms = MomentSequence::from_exact(1.0, 0.5, (0..6).map(|e| Scaled::real(1.0 + e as f64)).collect());
        assert_eq!(derivative_moment(&ms, 3, 0, &c).unwrap(), ms.mu(3).unwrap());
        assert_eq!(derivative_moment(&ms, 1, 2, &c).unwrap(), Complex64::new(0.0, 0.0));
        assert!(derivative_moment(&ms, 9, 1, &c).is_err());
        let x = xk_multiplied_moment(&ms, 0, 2, &c).unwrap();
        assert!((x.re - 8.0 * ms.mu(2).unwrap().re).abs() < 1e-12);
    }
}
