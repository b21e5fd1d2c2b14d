//! The identity-verification suite: a fixed, ordered list of numerical
//! checks, each tagged with a short anchor naming the identity it exercises.

use crate::analytic::{derivative_limits, grid_search, reconstruct_series, taylor_identity, TailIntegral};
use crate::convolution::{
    commutator_at, convolution_moments, convolve_at, lambda_probe, ConvStatus, Convolved,
};
use crate::deriv::{q_derivatives, DerivMethod, Point};
use crate::error::{QError, Result};
use crate::fourier::{fourier_integral, fourier_inverse, fourier_series, homomorphism_check};
use crate::lattice::{q_integral_bounded, q_integral_unbounded, q_shift, LatticeFunction, LatticePoint};
use crate::moments::{
    classify_type, moment_result, moment_sequence, pointwise_converse, pointwise_decay_check, MomentSequence, TypeKind,
};
use crate::par;
use crate::qcore::{constant_bq, constant_cq, qpoch_base, qq_finite, Len, QContext};
use crate::special::{
    eval_special, gm_moment_closed_form, hermite_ii, hermite_ii_recurrence, hermite_ii_scaled, kernel_k,
    rodrigues_gaussian_derivative, SpecialFunction, SpecialKind,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const SUITE_VERSION: &str = "1.0.0";

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub anchor: String,
    /// Acceptance criterion this check belongs to, if any.
    pub criterion: Option<u8>,
    pub status: CheckStatus,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    #[serde(skip)]
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tail_rel_tol: f64,
    pub max_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite_version: String,
    pub q: f64,
    pub gamma: f64,
    pub tolerances: Tolerances,
    pub status: CheckStatus,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn get(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Deterministic report under "report"; wall-clock times under "runtime".
    pub fn to_json(&self) -> serde_json::Value {
        let times: serde_json::Map<String, serde_json::Value> =
            self.checks.iter().map(|c| (c.id.clone(), serde_json::json!(round_ms(c.runtime_ms)))).collect();
        let total: f64 = self.checks.iter().map(|c| c.runtime_ms).sum();
        serde_json::json!({
            "report": self,
            "runtime": { "total_ms": round_ms(total), "checks_ms": times },
        })
    }

    pub fn table(&self) -> String {
        let mut s = format!("qconv verify {}  q = {}  gamma = {}\n", self.suite_version, self.q, self.gamma);
        for c in &self.checks {
            let st = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "SKIP",
            };
            s += &format!(
                "{st}  {:<34} {:>10.3e} / {:<9.1e} {:>8.1} ms  {}\n",
                c.id, c.measured, c.tolerance, c.runtime_ms, c.anchor
            );
            if c.status == CheckStatus::Fail {
                s += &format!("      {}\n", c.detail);
            }
        }
        let fails = self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count();
        s += &format!("{} checks, {} failed\n", self.checks.len(), fails);
        s
    }
}

fn round_ms(ms: f64) -> f64 {
    (ms * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub q: f64,
    pub gamma: f64,
    pub tail_rel_tol: Option<f64>,
    pub max_terms: Option<usize>,
    /// Glob over check ids or families (the id's first segment).
    pub only: Option<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { q: 0.5, gamma: 1.0, tail_rel_tol: None, max_terms: None, only: None }
    }
}

/// What a check measured.
struct Outcome {
    measured: f64,
    tolerance: f64,
    pass: bool,
    detail: String,
}

impl Outcome {
    /// measured ≤ tolerance.
    fn within(measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Outcome { measured, tolerance, pass: measured <= tolerance, detail: detail.into() }
    }
}

struct Env {
    ctx: QContext,
    gamma: f64,
}

impl Env {
    fn func(&self, kind: SpecialKind, gamma: f64) -> Result<LatticeFunction> {
        SpecialFunction::new(kind, &self.ctx).on_lattice(gamma)
    }

    /// Moments needed before the convolution series has converged: they
    /// decay like q^{αe²/2}, so the count grows like 1/√(-ln q).
    fn order(&self) -> usize {
        ((30.0 / (-self.ctx.ln_q()).sqrt()).ceil() as usize).clamp(40, 200)
    }

    fn q(&self) -> f64 {
        self.ctx.q
    }

    fn lp(&self, eps: i8, k: i64) -> LatticePoint {
        LatticePoint::new(eps, k, self.gamma, &self.ctx)
    }

    /// c with f_c of strict type `alpha`.
    fn strip_c(&self, alpha: f64) -> f64 {
        1.0 / (8.0 * -self.ctx.ln_q() * (1.0 - alpha))
    }

    fn moments(&self, f: &LatticeFunction, e: usize, gamma: f64) -> Result<MomentSequence> {
        let ms = moment_sequence(f, e, gamma, &self.ctx)?;
        if !ms.all_converged() {
            return Err(QError::EvaluationFailure(format!("moments of {} did not all converge", f.label())));
        }
        Ok(ms)
    }
}

type CheckFn = fn(&Env) -> Result<Outcome>;

struct Check {
    id: &'static str,
    anchor: &'static str,
    criterion: Option<u8>,
    run: CheckFn,
}

/// Type fits converge slowly in e for q near 1.
const FIT_ORDER: usize = 120;

fn rel(a: Complex64, b: Complex64) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

fn rel_to(a: Complex64, b: Complex64, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / scale
    }
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

// ---- the checks -----------------------------------------------------------

fn constants_bq(env: &Env) -> Result<Outcome> {
    let big = env.func(SpecialKind::GaussBig, 1.0)?;
    let shifted = q_shift(&big, 1, &env.ctx)?;
    let integral = q_integral_bounded(&shifted, 1.0, &env.ctx)?.into_result()?.value.re;
    let product = constant_bq(&env.ctx)?;
    Ok(Outcome::within((integral - product).abs() / product, 1e-10, format!("integral {integral:.17e}, product {product:.17e}")))
}

fn constants_cq(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::GaussSmall, env.gamma)?;
    let integral = q_integral_unbounded(&g, env.gamma, &env.ctx)?.into_result()?.value.re;
    let product = constant_cq(env.gamma, &env.ctx)?;
    Ok(Outcome::within((integral - product).abs() / product, 1e-10, format!("integral {integral:.17e}, product {product:.17e}")))
}

fn q_q2(k: usize, env: &Env) -> Result<f64> {
    Ok(qpoch_base(c(env.q()), env.q() * env.q(), Len::Finite(k), &env.ctx)?.to_c64().re)
}

fn moments_gauss_small(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::GaussSmall, env.gamma)?;
    let ms = env.moments(&g, 16, env.gamma)?;
    let cq = constant_cq(env.gamma, &env.ctx)?;
    let q = env.q();
    let mut worst = 0.0f64;
    for k in 0..=8usize {
        let want = cq * q_q2(k, env)? * q.powi((k * k + k) as i32);
        worst = worst.max(rel(ms.mu(2 * k)?, c(want)));
    }
    Ok(Outcome::within(worst, 1e-9, "k <= 8"))
}

fn gauss_big_moments(env: &Env, extra: impl Fn(usize) -> i32) -> Result<(f64, f64)> {
    let g = env.func(SpecialKind::GaussBig, 1.0)?;
    let ms = env.moments(&g, 16, 1.0)?;
    let bq = constant_bq(&env.ctx)?;
    let q = env.q();
    let mut worst = 0.0f64;
    let mut ratio8 = 0.0;
    for k in 0..=8usize {
        let want = bq * q_q2(k, env)? * q.powi(extra(k));
        let got = ms.mu(2 * k)?;
        worst = worst.max(rel(got, c(want)));
        ratio8 = got.re / want;
    }
    Ok((worst, ratio8))
}

fn moments_gauss_big(env: &Env) -> Result<Outcome> {
    let (worst, ratio8) = gauss_big_moments(env, |k| (2 * k * k + k) as i32)?;
    Ok(Outcome::within(
        worst,
        1e-9,
        format!("against b_q (q;q^2)_k q^(2k^2+k); measured/stated at k=8 is {ratio8:.6e} = q^{:.3}", ratio8.ln() / env.q().ln()),
    ))
}

fn moments_gauss_big_integral(env: &Env) -> Result<Outcome> {
    let (worst, _) = gauss_big_moments(env, |k| (2 * k * k + 3 * k + 1) as i32)?;
    Ok(Outcome::within(worst, 1e-9, "against q^(2k^2+k) * b_q q^(2k+1) (q;q^2)_k"))
}

fn moments_gm_closed_form(env: &Env) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for m in 1..=3u32 {
        let f = env.func(SpecialKind::Gm(m), env.gamma)?;
        let ms = env.moments(&f, 10, env.gamma)?;
        for e in 0..=10 {
            let want = gm_moment_closed_form(m, e, env.gamma, &env.ctx)?;
            worst = worst.max((ms.mu(e)? - want).norm() / ms.nu(e)?);
        }
    }
    Ok(Outcome::within(worst, 1e-9, "m = 1..3, e <= 10, error relative to the strict moment"))
}

fn hermite_value_at_i(env: &Env) -> Result<Outcome> {
    let q = env.q();
    let mut worst = 0.0f64;
    for k in 0..=12usize {
        let want = I.powi(k as i32) * q.powf(-((k * k.saturating_sub(1)) as f64) / 2.0);
        worst = worst.max(rel(hermite_ii(k, I, &env.ctx), want));
    }
    Ok(Outcome::within(worst, 1e-12, "k <= 12"))
}

fn hermite_recurrence(env: &Env) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for x in [c(env.gamma), c(2.5), Complex64::new(0.3, 1.1)] {
        let rec = hermite_ii_recurrence(60, x, &env.ctx);
        for (k, r) in rec.iter().enumerate() {
            let s = hermite_ii_scaled(k, x, &env.ctx);
            let scale = s.norm_f64().max(r.norm_f64());
            if scale > 0.0 {
                worst = worst.max((*r - s).norm_f64() / scale);
            }
        }
    }
    Ok(Outcome::within(worst, 1e-10, "explicit sum vs three-term recurrence, k <= 60"))
}

fn rodrigues(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::GaussSmall, env.gamma)?;
    let q = env.q();
    // Difference quotients lose digits as x → 0, so sample |x| ≥ 1.
    let t1 = (env.gamma.ln() / -env.ctx.ln_q()).floor() as i64;
    let mut worst = 0.0f64;
    for t in t1 - 3..=t1 {
        for eps in [1, -1] {
            let p = env.lp(eps, t);
            let x = p.complex();
            let d = q_derivatives(&g, Point::Lattice(p), 6, DerivMethod::Lattice, &env.ctx)?;
            let e0 = rodrigues_gaussian_derivative(0, x, &env.ctx)?.norm();
            for (k, dk) in d.iter().enumerate() {
                let want = rodrigues_gaussian_derivative(k, x, &env.ctx)?;
                // h̃_k(i|x|) is the absolute sum of h̃_k(x)'s terms; it
                // keeps the scale honest where h̃_k(x) has a zero.
                let pre = q.powf((k * k) as f64 / 2.0 - k as f64 / 2.0) / (1.0 - q).powi(k as i32);
                let scale = (pre * e0 * hermite_ii(k, I * x.re.abs(), &env.ctx).norm()).max(want.norm());
                worst = worst.max(rel_to(dk.to_c64(), want, scale));
            }
        }
    }
    Ok(Outcome::within(worst, 1e-8, format!("difference quotients at ±q^tγ, t in [{}, {t1}], k <= 6", t1 - 3)))
}

fn kernel_at_i(env: &Env) -> Result<Outcome> {
    let q = env.q();
    let big = SpecialFunction::new(SpecialKind::EqBig, &env.ctx);
    let mut worst = 0.0f64;
    for t in [c(1.0), c(-1.0), c(q), c(-q), Complex64::new(0.0, 2.0)] {
        let k = kernel_k(t, I, &env.ctx)?;
        let e = eval_special(&big, I * q * t)?;
        // E_q has lattice zeros (E_q(-1) = 0 at some q), so the scale has a floor of 1.
        worst = worst.max(rel_to(k, e, e.norm().max(1.0)));
    }
    Ok(Outcome::within(worst, 1e-10, "t in {1, -1, q, -q, 2i}"))
}

fn gauss_square(env: &Env) -> Result<(LatticeFunction, MomentSequence, LatticeFunction)> {
    let g = env.func(SpecialKind::GaussSmall, env.gamma)?;
    let ms = env.moments(&g, env.order(), env.gamma)?;
    let h = Convolved::function(&ms, &g, &env.ctx)?;
    Ok((g, ms, h))
}

fn momentconvo_formula(env: &Env) -> Result<Outcome> {
    let (_, ms, h) = gauss_square(env)?;
    let formula = convolution_moments(&ms, &ms, &env.ctx)?;
    let direct: Vec<Result<Complex64>> = par::map_indexed(9, |k| Ok(moment_result(&h, k, env.gamma, &env.ctx)?.into_result()?.value));
    let mut worst = 0.0f64;
    for (k, d) in direct.into_iter().enumerate() {
        worst = worst.max(rel(formula.mu(k)?, d?));
    }
    Ok(Outcome::within(worst, 1e-7, "f = g = e_{q^2}(-X^2), k <= 8"))
}

fn momentconvo_total(env: &Env) -> Result<Outcome> {
    let (g, _, h) = gauss_square(env)?;
    let direct = moment_result(&h, 0, env.gamma, &env.ctx)?.into_result()?.value;
    let i = q_integral_unbounded(&g, env.gamma, &env.ctx)?.into_result()?.value;
    Ok(Outcome::within(rel(direct, i * i), 1e-7, format!("integral of f*g {:.15e}, product {:.15e}", direct.re, (i * i).re)))
}

fn assoc_pool(env: &Env) -> Result<Outcome> {
    let c = env.strip_c(0.75);
    let pool = [SpecialKind::GaussSmall, SpecialKind::Gm(2), SpecialKind::StripExample(c)]
        .iter()
        .map(|k| env.func(*k, env.gamma))
        .collect::<Result<Vec<_>>>()?;
    let ms = pool.iter().map(|f| env.moments(f, env.order(), env.gamma)).collect::<Result<Vec<_>>>()?;
    let triples = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)];
    let q = env.q();
    let points = [c_(0.0), c_(env.gamma), c_(-env.gamma), c_(q * env.gamma), c_(-q * env.gamma)];
    let res = par::map_slice(&triples, |&(a, b, h)| -> Result<f64> {
        let fg = convolution_moments(&ms[a], &ms[b], &env.ctx)?;
        let gh = Convolved::function(&ms[b], &pool[h], &env.ctx)?;
        let mut worst = 0.0f64;
        for x in points {
            let l = convolve_at(&fg, &pool[h], x, &env.ctx)?.into_result()?.value;
            let r = convolve_at(&ms[a], &gh, x, &env.ctx)?.into_result()?.value;
            worst = worst.max(rel(l, r));
        }
        Ok(worst)
    });
    let worst = res.into_iter().collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok(Outcome::within(worst, 1e-7, "all orderings of {e_{q^2}(-X^2), g_2, f_c}, x in {0, ±γ, ±qγ}"))
}

fn c_(x: f64) -> Complex64 {
    c(x)
}

fn commut_strip(env: &Env) -> Result<Outcome> {
    let (c1, c2) = (env.strip_c(0.75), env.strip_c(0.65));
    let f = env.func(SpecialKind::StripExample(c1), env.gamma)?;
    let g = env.func(SpecialKind::StripExample(c2), env.gamma)?;
    let fm = env.moments(&f, env.order(), env.gamma)?;
    let gm = env.moments(&g, env.order(), env.gamma)?;
    let af = classify_type(&fm, TypeKind::StrictLeft)?.alpha_hat;
    let ag = classify_type(&gm, TypeKind::StrictLeft)?.alpha_hat;
    if af <= 0.55 || ag <= 0.55 {
        return Ok(Outcome { measured: af.min(ag), tolerance: 0.55, pass: false, detail: "fitted strict types not above 0.55".into() });
    }
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for t in 0..4 {
        for eps in [1, -1] {
            let p = env.lp(eps, t);
            let a = convolve_at(&fm, &g, p, &env.ctx)?.into_result()?;
            let b = convolve_at(&gm, &f, p, &env.ctx)?.into_result()?;
            let scale = a.abs_sum.max(b.abs_sum);
            let d = commutator_at(&fm, &gm, &f, &g, p, &env.ctx)?.norm() / scale;
            if d > worst {
                worst = d;
                at = p.complex().re;
            }
        }
    }
    Ok(Outcome::within(worst, 1e-7, format!("strict types {af:.3}, {ag:.3}; largest scaled commutator at x = {at:.6}")))
}

fn gm_noncommutative(env: &Env) -> Result<Outcome> {
    let g0 = env.func(SpecialKind::Gm(0), env.gamma)?;
    let g1 = env.func(SpecialKind::Gm(1), env.gamma)?;
    let m0 = env.moments(&g0, env.order(), env.gamma)?;
    let m1 = env.moments(&g1, env.order(), env.gamma)?;
    let x = c(env.gamma);
    let a = convolve_at(&m0, &g1, x, &env.ctx)?.into_result()?.value.norm();
    let b = convolve_at(&m1, &g0, x, &env.ctx)?.into_result()?.value.norm();
    Ok(Outcome {
        measured: a,
        tolerance: 1e-10,
        pass: a <= 1e-10 && b > 1e-3,
        detail: format!("|(g_0*g_1)(γ)| = {a:.3e}, |(g_1*g_0)(γ)| = {b:.6e} (must exceed 1e-3)"),
    })
}

fn alt_moments(env: &Env) -> Result<(LatticeFunction, MomentSequence)> {
    let alt = env.func(SpecialKind::AltExample, 1.0)?;
    let ms = env.moments(&alt, 14, 1.0)?;
    Ok((alt, ms))
}

fn alt_moments_vanish(env: &Env) -> Result<Outcome> {
    let (_, ms) = alt_moments(env)?;
    let mut worst = 0.0f64;
    for n in 0..=6 {
        worst = worst.max(ms.mu(2 * n)?.norm() / ms.nu(2 * n)?);
    }
    Ok(Outcome::within(worst, 1e-10, "|μ_2n| / ν_2n on L(1), n <= 6"))
}

fn alt_left_annihilates(env: &Env) -> Result<Outcome> {
    let (_, ms) = alt_moments(env)?;
    let mut worst = 0.0f64;
    for kind in [SpecialKind::GaussSmall, SpecialKind::Gm(2), SpecialKind::StripExample(env.strip_c(0.75))] {
        let f = env.func(kind, 1.0)?;
        for t in 0..4 {
            for eps in [1, -1] {
                let p = LatticePoint::new(eps, t, 1.0, &env.ctx);
                worst = worst.max(convolve_at(&ms, &f, p, &env.ctx)?.into_result()?.value.norm());
            }
        }
    }
    Ok(Outcome::within(worst, 1e-10, "f in {e_{q^2}(-X^2), g_2, f_c} at ±q^t, t < 4"))
}

fn alt_right_positive(env: &Env) -> Result<Outcome> {
    let (alt, _) = alt_moments(env)?;
    let g = env.func(SpecialKind::GaussSmall, 1.0)?;
    let gm = env.moments(&g, env.order(), 1.0)?;
    let mut min = f64::INFINITY;
    let mut notes = Vec::new();
    for k in 0..=5 {
        let p = LatticePoint::new(1, 2 * k, 1.0, &env.ctx);
        let r = convolve_at(&gm, &alt, p, &env.ctx)?;
        if r.status != ConvStatus::Converged {
            notes.push(format!("x = q^{}: {:?} after {} terms", 2 * k, r.status, r.terms_used));
            min = f64::NEG_INFINITY;
        } else {
            min = min.min(r.value.re);
        }
    }
    Ok(Outcome {
        measured: min,
        tolerance: 0.0,
        pass: min > 0.0,
        detail: if notes.is_empty() { "all values positive".into() } else { notes.join("; ") },
    })
}

fn fourier_forms(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::GaussSmall, env.gamma)?;
    let ms = env.moments(&g, env.order().max(60), env.gamma)?;
    let nu0 = ms.nu(0)?;
    let q = env.q();
    let mut worst = 0.0f64;
    for y in [0.0, q, -q, 1.0, -1.0, 1.5, -1.5, 2.0, -2.0] {
        let a = fourier_integral(&g, env.gamma, c(y), &env.ctx)?.into_result()?.value;
        let b = fourier_series(&ms, c(y), &env.ctx)?.into_result()?.value;
        worst = worst.max(rel_to(a, b, a.norm().max(nu0)));
    }
    Ok(Outcome::within(worst, 1e-8, "e_{q^2}(-X^2), |y| <= 2; scale max(|F|, ν_0)"))
}

fn fourier_homomorphism(env: &Env) -> Result<Outcome> {
    let cs = env.strip_c(0.75);
    let pairs = [
        (SpecialKind::GaussSmall, SpecialKind::GaussSmall),
        (SpecialKind::Gm(2), SpecialKind::StripExample(cs)),
        (SpecialKind::StripExample(cs), SpecialKind::GaussSmall),
    ];
    let q = env.q();
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let fm = env.moments(&env.func(a, env.gamma)?, env.order().max(60), env.gamma)?;
        let gm = env.moments(&env.func(b, env.gamma)?, env.order().max(60), env.gamma)?;
        for y in [c(1.0), c(-1.0), c(q), c(-q), I * q] {
            worst = worst.max(homomorphism_check(&fm, &gm, y, &env.ctx)?.relative());
        }
    }
    Ok(Outcome::within(worst, 1e-8, "3 pairs, y in {±1, ±q, iq}"))
}

fn fourier_round_trip(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::GaussSmall, env.gamma)?;
    let phi = |y: f64| fourier_integral(&g, env.gamma, c(y), &env.ctx)?.into_result().map(|r| r.value);
    let mut worst = 0.0f64;
    for t in 0..3 {
        for eps in [1, -1] {
            let p = env.lp(eps, t);
            let v = fourier_inverse(&phi, p.complex(), env.gamma, &env.ctx)?;
            worst = worst.max(rel(v, g.eval_at(&p)?.to_c64()));
        }
    }
    Ok(Outcome::within(worst, 1e-6, "inverse of the integral transform at ±q^tγ, t < 3"))
}

fn fourier_alt(env: &Env) -> Result<Outcome> {
    let (alt, ms) = alt_moments(env)?;
    let nu0 = ms.nu(0)?;
    let mut worst = 0.0f64;
    for y in [env.q(), 1.0, 2.0] {
        worst = worst.max(fourier_integral(&alt, 1.0, c(y), &env.ctx)?.into_result()?.value.norm() / nu0);
    }
    Ok(Outcome::within(worst, 1e-10, "|F(alt)(y)| / ν_0 for y in {q, 1, 2}"))
}

fn classify_check(env: &Env, kind: SpecialKind, gamma: f64, want: f64, tol: f64) -> Result<Outcome> {
    let f = env.func(kind, gamma)?;
    let ms = env.moments(&f, FIT_ORDER, gamma)?;
    let t = classify_type(&ms, TypeKind::StrictLeft)?;
    Ok(Outcome::within((t.alpha_hat - want).abs(), tol, format!("strict α̂ = {:.4}, residual {:.2e}", t.alpha_hat, t.residual)))
}

fn classify_gauss_small(env: &Env) -> Result<Outcome> {
    classify_check(env, SpecialKind::GaussSmall, env.gamma, 0.5, 0.05)
}

fn classify_gauss_big(env: &Env) -> Result<Outcome> {
    classify_check(env, SpecialKind::GaussBig, 1.0, 1.0, 0.05)
}

fn classify_gauss_cal(env: &Env) -> Result<Outcome> {
    classify_check(env, SpecialKind::GaussCal, 1.0, 0.75, 0.10)
}

fn classify_square(env: &Env) -> Result<Outcome> {
    let (_, ms, h) = gauss_square(env)?;
    let sq = env.moments(&h, 24, env.gamma)?;
    let strict = classify_type(&sq, TypeKind::StrictLeft)?;
    let formula = convolution_moments(&ms, &ms, &env.ctx)?;
    let left = classify_type(&formula, TypeKind::Left)?;
    Ok(Outcome::within(
        (strict.alpha_hat - 0.25).abs(),
        0.10,
        format!("strict α̂ of the computed square {:.4}; left α̂ from the moment formula {:.4}", strict.alpha_hat, left.alpha_hat),
    ))
}

fn decay_duality(env: &Env) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for alpha in [0.65, 0.75] {
        let f = env.func(SpecialKind::StripExample(env.strip_c(alpha)), env.gamma)?;
        let ms = env.moments(&f, FIT_ORDER, env.gamma)?;
        let a = classify_type(&ms, TypeKind::StrictLeft)?.alpha_hat;
        let fit = pointwise_decay_check(&f, env.gamma, 60, &env.ctx)?;
        let conv = pointwise_converse(&f, fit.beta_hat, env.gamma, 60, &env.ctx)?;
        let d = (fit.beta_hat - 1.0 / (1.0 - a)).abs();
        if !conv.bounded {
            return Ok(Outcome { measured: d, tolerance: 0.1, pass: false, detail: "converse: not bounded near 0".into() });
        }
        worst = worst.max(d);
        notes.push(format!("α̂ {a:.4}, β̂ {:.4}, converse α {:.4}", fit.beta_hat, conv.alpha));
    }
    Ok(Outcome::within(worst, 0.1, notes.join("; ")))
}

fn analytic_eq(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::EqBig, env.gamma)?;
    let dl = derivative_limits(&g, 10, &env.ctx)?;
    let s = reconstruct_series(&dl, 1e-9, &env.ctx)?;
    let q = env.q();
    let mut worst = 0.0f64;
    for k in 0..=10usize {
        let want = q.powi((k * k.saturating_sub(1) / 2) as i32) / qq_finite(k, q);
        worst = worst.max(rel(s.coefficients[k], c(want)));
    }
    Ok(Outcome::within(worst, 1e-8, "coefficients k <= 10 from closed-form lattice derivatives"))
}

fn analytic_alt(env: &Env) -> Result<Outcome> {
    let (alt, _) = alt_moments(env)?;
    let gs = grid_search(&alt, 8, &env.ctx)?;
    Ok(Outcome {
        measured: gs.holding as f64,
        tolerance: 0.0,
        pass: gs.holding == 0,
        detail: format!("{} of {} grid points hold; smallest worst ratio {:.3e}", gs.holding, gs.grid_points, gs.best.worst_ratio),
    })
}

fn analytic_taylor(env: &Env) -> Result<Outcome> {
    let g = env.func(SpecialKind::EqBig, env.gamma)?;
    let mut worst = 0.0f64;
    for n in 0..=10 {
        for t in [-2, 0, 3] {
            for eps in [1, -1] {
                worst = worst.max(taylor_identity(&g, &env.lp(eps, t), n, &env.ctx)?.residual);
            }
        }
    }
    Ok(Outcome::within(worst, 1e-10, "E_q restriction, n <= 10, x = ±q^tγ, t in {-2, 0, 3}"))
}

fn analytic_tail(env: &Env) -> Result<Outcome> {
    let g = TailIntegral::function(env.gamma, &env.ctx)?;
    let dl = derivative_limits(&g, 4, &env.ctx)?;
    let cq = constant_cq(env.gamma, &env.ctx)?;
    let err = ((dl.l[0].re - cq).abs() / cq).max(dl.l[1..].iter().map(|v| v.norm()).fold(0.0, f64::max));
    let gap = TailIntegral::off_lattice_gap(env.gamma, &env.ctx)?;
    Ok(Outcome {
        measured: err,
        tolerance: 1e-12,
        pass: err <= 1e-12 && gap > 0.0,
        detail: format!("l_0 = c_q(γ), l_p = 0; value on L(γ√q) differs by {gap:.3e}"),
    })
}

fn probe_strip(env: &Env) -> Result<Outcome> {
    let f = env.func(SpecialKind::StripExample(env.strip_c(0.75)), env.gamma)?;
    let ms = env.moments(&f, env.order(), env.gamma)?;
    let nu0 = ms.nu(0)?;
    let mut first = None;
    let mut largest = 0.0f64;
    for n in 0..=10 {
        let v = lambda_probe(&ms, c(env.q().powi(n)), &env.ctx)?.norm() / nu0;
        largest = largest.max(v);
        if first.is_none() && v > 1e-8 {
            first = Some(n);
        }
    }
    Ok(Outcome {
        measured: largest,
        tolerance: 1e-8,
        pass: first.is_some(),
        detail: match first {
            Some(n) => format!("first nonzero at n = {n}"),
            None => "zero for all n <= 10".into(),
        },
    })
}

const CHECKS: &[Check] = &[
    Check { id: "constants.bq", anchor: "b_q: product = bounded integral of E_{q^2}(-q^2x^2)", criterion: Some(1), run: constants_bq },
    Check { id: "constants.cq", anchor: "c_q(γ): product = integral of e_{q^2}(-x^2)", criterion: Some(1), run: constants_cq },
    Check { id: "moments.gauss-small", anchor: "μ_2k(e_{q^2}(-X^2)) = c_q(γ)(q;q^2)_k q^(k^2+k)", criterion: Some(2), run: moments_gauss_small },
    Check { id: "moments.gauss-big", anchor: "μ_2k,1(E_{q^2}(-X^2)) = b_q(q;q^2)_k q^(2k^2+k)", criterion: Some(2), run: moments_gauss_big },
    Check { id: "moments.gauss-big-integral", anchor: "∫x^2k E_{q^2}(-x^2) = b_q q^(2k+1)(q;q^2)_k", criterion: None, run: moments_gauss_big_integral },
    Check { id: "moments.gm-closed-form", anchor: "g_m moments: finite closed form", criterion: None, run: moments_gm_closed_form },
    Check { id: "hermite.value-at-i", anchor: "h̃_k(i) = i^k q^(-k(k-1)/2)", criterion: Some(3), run: hermite_value_at_i },
    Check { id: "hermite.recurrence", anchor: "h̃_k: explicit sum = three-term recurrence", criterion: None, run: hermite_recurrence },
    Check { id: "rodrigues.lattice", anchor: "∂^k e_{q^2}(-X^2) = Rodrigues closed form", criterion: Some(4), run: rodrigues },
    Check { id: "kernel.value-at-i", anchor: "K(t, i) = E_q(iqt)", criterion: Some(5), run: kernel_at_i },
    Check { id: "momentconvo.formula", anchor: "μ_k(f*g) = Σ qbinom(k,e) μ_e(f) μ_(k-e)(g)", criterion: Some(6), run: momentconvo_formula },
    Check { id: "momentconvo.total", anchor: "∫(f*g) = ∫f ∫g", criterion: Some(6), run: momentconvo_total },
    Check { id: "assoc.pool", anchor: "(f*g)*h = f*(g*h)", criterion: Some(7), run: assoc_pool },
    Check { id: "commut.strip", anchor: "f*g = g*f for strict types above 1/2", criterion: Some(8), run: commut_strip },
    Check { id: "commut.gm", anchor: "g_0*g_1 = 0 but g_1*g_0 != 0", criterion: Some(9), run: gm_noncommutative },
    Check { id: "alt.moments", anchor: "bilateral-sum function: all moments vanish", criterion: Some(10), run: alt_moments_vanish },
    Check { id: "alt.left-zero", anchor: "bilateral-sum function: alt*f = 0", criterion: Some(10), run: alt_left_annihilates },
    Check { id: "alt.right-positive", anchor: "bilateral-sum function: (e_{q^2}(-X^2)*alt)(q^2k) > 0", criterion: Some(10), run: alt_right_positive },
    Check { id: "fourier.forms", anchor: "integral transform = moment series", criterion: Some(11), run: fourier_forms },
    Check { id: "fourier.homomorphism", anchor: "F(f*g) = F(f) F(g)", criterion: Some(11), run: fourier_homomorphism },
    Check { id: "fourier.round-trip", anchor: "inverse transform recovers f", criterion: None, run: fourier_round_trip },
    Check { id: "fourier.alt", anchor: "transform of the bilateral-sum function vanishes", criterion: None, run: fourier_alt },
    Check { id: "classify.gauss-small", anchor: "strict type of e_{q^2}(-X^2) is 1/2", criterion: Some(12), run: classify_gauss_small },
    Check { id: "classify.gauss-big", anchor: "strict type of E_{q^2}(-X^2) on L(1) is 1", criterion: Some(12), run: classify_gauss_big },
    Check { id: "classify.gauss-cal", anchor: "strict type of the interpolating Gaussian on L(1) is 3/4", criterion: Some(12), run: classify_gauss_cal },
    Check { id: "classify.square", anchor: "type of a convolution is αβ/(α+β)", criterion: Some(12), run: classify_square },
    Check { id: "decay.strip", anchor: "pointwise decay β ↔ strict type 1 - 1/β", criterion: Some(13), run: decay_duality },
    Check { id: "analytic.eq-series", anchor: "lattice E_q reconstructs its power series", criterion: Some(14), run: analytic_eq },
    Check { id: "analytic.alt-bounds", anchor: "bilateral-sum function fails every derivative bound", criterion: Some(14), run: analytic_alt },
    Check { id: "analytic.taylor", anchor: "finite q-Taylor identity", criterion: Some(14), run: analytic_taylor },
    Check { id: "analytic.tail-integral", anchor: "lattice-constant tail integral", criterion: None, run: analytic_tail },
    Check { id: "probe.strip", anchor: "λ-probe nonzero for strict type above 1/2", criterion: Some(15), run: probe_strip },
];

/// Ids of every check, in report order.
pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.id).collect()
}

fn selected(check: &Check, only: &Option<glob::Pattern>) -> bool {
    match only {
        None => true,
        Some(p) => {
            let family = check.id.split('.').next().unwrap_or(check.id);
            p.matches(check.id) || p.matches(family)
        }
    }
}

/// Runs the suite. Individual check failures never abort it.
pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut ctx = QContext::new(cfg.q)?;
    if let Some(t) = cfg.tail_rel_tol {
        ctx = ctx.with_tol(t)?;
    }
    if let Some(m) = cfg.max_terms {
        ctx = ctx.with_max_terms(m)?;
    }
    crate::lattice::Lattice::new(cfg.gamma)?;
    let only = match &cfg.only {
        Some(s) => Some(glob::Pattern::new(s).map_err(|e| QError::Parse(format!("bad --only pattern: {e}")))?),
        None => None,
    };
    let env = Env { ctx, gamma: cfg.gamma };
    let checks = par::map_slice(CHECKS, |check| {
        let start = Instant::now();
        let (status, measured, tolerance, detail) = if !selected(check, &only) {
            (CheckStatus::Skip, 0.0, 0.0, "not selected".to_string())
        } else {
            match (check.run)(&env) {
                Ok(o) => (if o.pass { CheckStatus::Pass } else { CheckStatus::Fail }, o.measured, o.tolerance, o.detail),
                Err(e) => (CheckStatus::Fail, f64::NAN, f64::NAN, format!("{}: {e}", e.name())),
            }
        };
        CheckResult {
            id: check.id.to_string(),
            anchor: check.anchor.to_string(),
            criterion: check.criterion,
            status,
            measured,
            tolerance,
            detail,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        }
    });
    let status = if checks.iter().any(|c| c.status == CheckStatus::Fail) { CheckStatus::Fail } else { CheckStatus::Pass };
    Ok(VerifyReport {
        suite_version: SUITE_VERSION.to_string(),
        q: cfg.q,
        gamma: cfg.gamma,
        tolerances: Tolerances { tail_rel_tol: ctx.tail_rel_tol, max_terms: ctx.max_terms },
        status,
        checks,
    })
}
