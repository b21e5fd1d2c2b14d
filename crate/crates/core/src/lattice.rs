//! The lattice L(gamma) = {±q^k gamma}, lattice functions (rules or sampled
//! tables), the q-shift, and Jackson-type q-integrals with adaptive truncation.

use crate::error::{QError, Result};
use crate::qcore::{pow_q, QContext};
use crate::scaled::Scaled;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub gamma: f64,
}

impl Lattice {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(QError::Domain(format!("lattice parameter must be positive, got {gamma}")));
        }
        Ok(Lattice { gamma })
    }

    pub fn point(&self, epsilon: i8, k: i64, ctx: &QContext) -> LatticePoint {
        LatticePoint::new(epsilon, k, self.gamma, ctx)
    }

    /// The lattice point equal to x to 1e-12 relative, if any.
    pub fn locate(&self, x: Complex64, ctx: &QContext) -> Option<LatticePoint> {
        if x.im != 0.0 || x.re == 0.0 || !x.re.is_finite() {
            return None;
        }
        let k = ((x.re.abs() / self.gamma).ln() / ctx.ln_q()).round() as i64;
        let p = self.point(if x.re < 0.0 { -1 } else { 1 }, k, ctx);
        ((p.value - x.re).abs() <= 1e-12 * x.re.abs()).then_some(p)
    }
}

/// A point eps * q^k * gamma. The integer data is kept so evaluators can work
/// with exact exponents far outside double range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub epsilon: i8,
    pub k: i64,
    pub gamma: f64,
    pub value: f64,
}

impl LatticePoint {
    pub fn new(epsilon: i8, k: i64, gamma: f64, ctx: &QContext) -> Self {
        let epsilon = if epsilon < 0 { -1 } else { 1 };
        LatticePoint { epsilon, k, gamma, value: epsilon as f64 * pow_q(ctx.q, k) * gamma }
    }

    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.value, 0.0)
    }

    /// ln |x|.
    pub fn ln_abs(&self, ctx: &QContext) -> f64 {
        self.k as f64 * ctx.ln_q() + self.gamma.ln()
    }

    /// The point q^n x.
    pub fn shifted(&self, n: i64, ctx: &QContext) -> Self {
        LatticePoint::new(self.epsilon, self.k + n, self.gamma, ctx)
    }
}

/// Where a rule is known to be holomorphic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Analyticity {
    Entire,
    /// Holomorphic on |z| < a.
    Disk(f64),
    /// Holomorphic on |Im z| < a.
    Strip(f64),
    LatticeOnly,
}

impl Analyticity {
    /// Distance from `c` to the nearest possible singularity.
    pub fn singularity_distance(&self, c: Complex64) -> f64 {
        match *self {
            Analyticity::Entire => f64::INFINITY,
            Analyticity::Disk(a) => a - c.norm(),
            Analyticity::Strip(a) => a - c.im.abs(),
            Analyticity::LatticeOnly => 0.0,
        }
    }

    fn parameter(&self) -> Option<f64> {
        match *self {
            Analyticity::Disk(a) | Analyticity::Strip(a) => Some(a),
            _ => None,
        }
    }

    fn dilate(&self, factor: f64) -> Analyticity {
        match *self {
            Analyticity::Disk(a) => Analyticity::Disk(a * factor),
            Analyticity::Strip(a) => Analyticity::Strip(a * factor),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    /// Parity of f * X^e.
    pub fn times_power(self, e: usize) -> Parity {
        match (self, e % 2) {
            (Parity::None, _) => Parity::None,
            (p, 0) => p,
            (Parity::Even, _) => Parity::Odd,
            (Parity::Odd, _) => Parity::Even,
        }
    }
}

/// A pointwise evaluator. `eval_lattice` may be overridden for exact lattice
/// arithmetic; `exact_derivative` for closed-form q-derivatives.
pub trait Evaluate: Send + Sync {
    fn eval(&self, z: Complex64) -> Result<Complex64>;

    fn eval_lattice(&self, p: &LatticePoint) -> Result<Scaled> {
        self.eval(p.complex()).map(Scaled::from)
    }

    /// (∂^order f)(z) in closed form, when one is known.
    fn exact_derivative(&self, _order: usize, _z: Complex64) -> Option<Result<Scaled>> {
        None
    }

    fn exact_lattice_derivative(&self, order: usize, p: &LatticePoint) -> Option<Result<Scaled>> {
        self.exact_derivative(order, p.complex())
    }

    /// All orders 0..=max_order at once; override when a batch is cheaper.
    fn exact_derivatives(&self, max_order: usize, z: Complex64) -> Option<Result<Vec<Scaled>>> {
        (0..=max_order).map(|e| self.exact_derivative(e, z)).collect()
    }

    fn exact_lattice_derivatives(&self, max_order: usize, p: &LatticePoint) -> Option<Result<Vec<Scaled>>> {
        (0..=max_order).map(|e| self.exact_lattice_derivative(e, p)).collect()
    }
}

impl<F> Evaluate for F
where
    F: Fn(Complex64) -> Complex64 + Send + Sync,
{
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self(z))
    }
}

/// Values on both half-lattices for k in [k_lo, k_hi].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub gamma: f64,
    pub k_lo: i64,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl Table {
    pub fn new(gamma: f64, k_lo: i64, plus: Vec<Complex64>, minus: Vec<Complex64>) -> Result<Self> {
        Lattice::new(gamma)?;
        if plus.is_empty() || plus.len() != minus.len() {
            return Err(QError::Domain("table halves must be nonempty and of equal length".into()));
        }
        if plus.iter().chain(minus.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(QError::Domain("table values must be finite".into()));
        }
        Ok(Table { gamma, k_lo, plus, minus })
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.plus.len() as i64 - 1
    }

    pub fn get(&self, epsilon: i8, k: i64) -> Result<Complex64> {
        if k < self.k_lo || k > self.k_hi() {
            return Err(QError::WindowExceeded { k, lo: self.k_lo, hi: self.k_hi() });
        }
        let i = (k - self.k_lo) as usize;
        Ok(if epsilon < 0 { self.minus[i] } else { self.plus[i] })
    }

    /// Sample `f` at ±q^k gamma for k in [k_lo, k_hi].
    pub fn sample(f: &LatticeFunction, gamma: f64, k_lo: i64, k_hi: i64, ctx: &QContext) -> Result<Table> {
        if k_hi < k_lo {
            return Err(QError::Domain("empty table window".into()));
        }
        let n = (k_hi - k_lo + 1) as usize;
        let vals = crate::par::map_indexed(2 * n, |i| {
            let eps = if i < n { 1 } else { -1 };
            let k = k_lo + (i % n) as i64;
            f.eval_at(&LatticePoint::new(eps, k, gamma, ctx)).map(|s| s.to_c64())
        });
        let vals: Vec<Complex64> = vals.into_iter().collect::<Result<_>>()?;
        Table::new(gamma, k_lo, vals[..n].to_vec(), vals[n..].to_vec())
    }

    /// CSV with header `epsilon,k,re,im`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epsilon", "k", "re", "im"])?;
        for (eps, half) in [(1i8, &self.plus), (-1i8, &self.minus)] {
            for (i, z) in half.iter().enumerate() {
                let k = self.k_lo + i as i64;
                wr.write_record([
                    eps.to_string(),
                    k.to_string(),
                    format!("{:.16e}", z.re),
                    format!("{:.16e}", z.im),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Table::write_csv`]; rows may come in any order
    /// but must cover one contiguous window for both signs.
    pub fn read_csv<R: Read>(r: R, gamma: f64) -> Result<Table> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        let want = ["epsilon", "k", "re", "im"];
        if headers.len() != 4 || headers.iter().zip(want).any(|(h, w)| h != w) {
            return Err(QError::Parse(format!("expected header epsilon,k,re,im, got {:?}", headers)));
        }
        let mut map: HashMap<(i8, i64), Complex64> = HashMap::new();
        for rec in rd.records() {
            let rec = rec?;
            let p = |i: usize| rec.get(i).ok_or_else(|| QError::Parse("short row".into()));
            let eps: i8 = p(0)?.parse().map_err(|_| QError::Parse(format!("bad epsilon {:?}", &rec[0])))?;
            if eps != 1 && eps != -1 {
                return Err(QError::Parse(format!("epsilon must be ±1, got {eps}")));
            }
            let k: i64 = p(1)?.parse().map_err(|_| QError::Parse(format!("bad k {:?}", &rec[1])))?;
            let re: f64 = p(2)?.parse().map_err(|_| QError::Parse(format!("bad re {:?}", &rec[2])))?;
            let im: f64 = p(3)?.parse().map_err(|_| QError::Parse(format!("bad im {:?}", &rec[3])))?;
            if map.insert((eps, k), Complex64::new(re, im)).is_some() {
                return Err(QError::Parse(format!("duplicate row for epsilon={eps}, k={k}")));
            }
        }
        if map.is_empty() {
            return Err(QError::Parse("table has no rows".into()));
        }
        let k_lo = map.keys().map(|&(_, k)| k).min().unwrap();
        let k_hi = map.keys().map(|&(_, k)| k).max().unwrap();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for k in k_lo..=k_hi {
            let get = |e: i8| map.get(&(e, k)).copied().ok_or_else(|| QError::Parse(format!("missing row epsilon={e}, k={k}")));
            plus.push(get(1)?);
            minus.push(get(-1)?);
        }
        Table::new(gamma, k_lo, plus, minus)
    }
}

#[derive(Clone)]
pub enum Repr {
    Rule(Arc<dyn Evaluate>),
    Table(Table),
}

/// A complex-valued function known on L(gamma).
#[derive(Clone)]
pub struct LatticeFunction {
    repr: Repr,
    gamma: f64,
    analyticity: Analyticity,
    parity: Parity,
    label: String,
}

impl fmt::Debug for LatticeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeFunction")
            .field("label", &self.label)
            .field("gamma", &self.gamma)
            .field("analyticity", &self.analyticity)
            .field("parity", &self.parity)
            .field("table", &matches!(self.repr, Repr::Table(_)))
            .finish()
    }
}

impl LatticeFunction {
    /// Wraps an evaluator. A DISK(a)/STRIP(a) rule with gamma >= a is moved to
    /// q^n gamma < a, which names the same lattice.
    pub fn rule(
        label: impl Into<String>,
        eval: Arc<dyn Evaluate>,
        gamma: f64,
        analyticity: Analyticity,
        parity: Parity,
        ctx: &QContext,
    ) -> Result<Self> {
        Lattice::new(gamma)?;
        let mut g = gamma;
        if let Some(a) = analyticity.parameter() {
            if !(a > 0.0) {
                return Err(QError::Domain(format!("analyticity parameter must be positive, got {a}")));
            }
            while g >= a {
                g *= ctx.q;
            }
        }
        Ok(LatticeFunction { repr: Repr::Rule(eval), gamma: g, analyticity, parity, label: label.into() })
    }

    pub fn table(label: impl Into<String>, t: Table, parity: Parity) -> Self {
        LatticeFunction { gamma: t.gamma, repr: Repr::Table(t), analyticity: Analyticity::LatticeOnly, parity, label: label.into() }
    }

    pub fn from_fn<F>(label: &str, f: F, gamma: f64, analyticity: Analyticity, parity: Parity, ctx: &QContext) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        Self::rule(label, Arc::new(f), gamma, analyticity, parity, ctx)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn analyticity(&self) -> Analyticity {
        self.analyticity
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn repr(&self) -> &Repr {
        &self.repr
    }
    pub fn as_table(&self) -> Option<&Table> {
        match &self.repr {
            Repr::Table(t) => Some(t),
            Repr::Rule(_) => None,
        }
    }
    pub fn evaluator(&self) -> Option<&Arc<dyn Evaluate>> {
        match &self.repr {
            Repr::Rule(r) => Some(r),
            Repr::Table(_) => None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Value at a lattice point (of any lattice for rules; of the table's
    /// lattice, possibly re-indexed by a power of q, for tables).
    pub fn eval_at(&self, p: &LatticePoint) -> Result<Scaled> {
        match &self.repr {
            Repr::Rule(r) => r.eval_lattice(p),
            Repr::Table(t) => {
                let k = reindex(p, t.gamma)?;
                t.get(p.epsilon, k).map(Scaled::from)
            }
        }
    }

    /// Value at an arbitrary complex point (rules only).
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        match &self.repr {
            Repr::Rule(r) => {
                if self.analyticity == Analyticity::LatticeOnly {
                    return Err(QError::Domain(format!("{} is only defined on its lattice", self.label)));
                }
                r.eval(z)
            }
            Repr::Table(_) => Err(QError::Domain("tables can only be evaluated at lattice points".into())),
        }
    }
}

/// Index of `p` on the lattice with parameter `gamma`: p.gamma must be q^n gamma.
fn reindex(p: &LatticePoint, gamma: f64) -> Result<i64> {
    if (p.gamma - gamma).abs() <= 1e-13 * gamma {
        return Ok(p.k);
    }
    let ratio = (p.gamma / gamma).ln();
    // We do not know q here, but a table point always carries its own gamma,
    // so a mismatch means the caller mixed lattices.
    Err(QError::Domain(format!("point on L({}) does not belong to table lattice L({gamma}) (log ratio {ratio})", p.gamma)))
}

struct Shifted {
    inner: Arc<dyn Evaluate>,
    n: i64,
    q: f64,
    ctx: QContext,
}

impl Evaluate for Shifted {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.inner.eval(z * pow_q(self.q, self.n))
    }
    fn eval_lattice(&self, p: &LatticePoint) -> Result<Scaled> {
        self.inner.eval_lattice(&p.shifted(self.n, &self.ctx))
    }
    fn exact_derivative(&self, order: usize, z: Complex64) -> Option<Result<Scaled>> {
        let f = pow_q(self.q, self.n);
        self.inner
            .exact_derivative(order, z * f)
            .map(|r| r.map(|d| d.scale_exp(order as f64 * self.n as f64 * self.q.ln())))
    }
    fn exact_lattice_derivative(&self, order: usize, p: &LatticePoint) -> Option<Result<Scaled>> {
        self.inner
            .exact_lattice_derivative(order, &p.shifted(self.n, &self.ctx))
            .map(|r| r.map(|d| d.scale_exp(order as f64 * self.n as f64 * self.q.ln())))
    }
}

/// (Q^n f)(x) = f(q^n x).
pub fn q_shift(f: &LatticeFunction, n: i64, ctx: &QContext) -> Result<LatticeFunction> {
    let label = format!("Q^{n}({})", f.label);
    match &f.repr {
        Repr::Table(t) => {
            let shifted = Table { gamma: t.gamma, k_lo: t.k_lo - n, plus: t.plus.clone(), minus: t.minus.clone() };
            Ok(LatticeFunction::table(label, shifted, f.parity))
        }
        Repr::Rule(r) => {
            let ev = Shifted { inner: r.clone(), n, q: ctx.q, ctx: *ctx };
            let an = f.analyticity.dilate(pow_q(ctx.q, -n));
            LatticeFunction::rule(label, Arc::new(ev), f.gamma, an, f.parity, ctx)
        }
    }
}

/// Caches lattice values of an expensive rule.
pub struct Memo {
    inner: Arc<dyn Evaluate>,
    cache: Mutex<HashMap<(i8, i64, u64), Scaled>>,
}

impl Memo {
    pub fn wrap(f: &LatticeFunction, ctx: &QContext) -> Result<LatticeFunction> {
        match &f.repr {
            Repr::Table(_) => Ok(f.clone()),
            Repr::Rule(r) => {
                let m = Memo { inner: r.clone(), cache: Mutex::new(HashMap::new()) };
                let mut out = LatticeFunction::rule(f.label.clone(), Arc::new(m), f.gamma, f.analyticity, f.parity, ctx)?;
                out.gamma = f.gamma;
                Ok(out)
            }
        }
    }
}

impl Evaluate for Memo {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.inner.eval(z)
    }
    fn eval_lattice(&self, p: &LatticePoint) -> Result<Scaled> {
        let key = (p.epsilon, p.k, p.gamma.to_bits());
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = self.inner.eval_lattice(p)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }
    fn exact_derivative(&self, order: usize, z: Complex64) -> Option<Result<Scaled>> {
        self.inner.exact_derivative(order, z)
    }
    fn exact_lattice_derivative(&self, order: usize, p: &LatticePoint) -> Option<Result<Scaled>> {
        self.inner.exact_lattice_derivative(order, p)
    }
    fn exact_derivatives(&self, max_order: usize, z: Complex64) -> Option<Result<Vec<Scaled>>> {
        self.inner.exact_derivatives(max_order, z)
    }
    fn exact_lattice_derivatives(&self, max_order: usize, p: &LatticePoint) -> Option<Result<Vec<Scaled>>> {
        self.inner.exact_lattice_derivatives(max_order, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Converged,
    Divergent,
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QIntegralResult {
    pub value: Complex64,
    /// The value in log-magnitude form; `value` may have under/overflowed.
    pub scaled: Scaled,
    pub k_neg_used: i64,
    pub k_pos_used: i64,
    pub tail_bound: f64,
    pub status: Status,
    /// Sum of the moduli of all terms; bounds the rounding error of `value`.
    pub abs_sum: Scaled,
}

impl QIntegralResult {
    fn zero() -> Self {
        QIntegralResult {
            value: Complex64::new(0.0, 0.0),
            scaled: Scaled::ZERO,
            k_neg_used: 0,
            k_pos_used: 0,
            tail_bound: 0.0,
            status: Status::Converged,
            abs_sum: Scaled::ZERO,
        }
    }

    pub fn into_result(self) -> Result<Self> {
        match self.status {
            Status::Converged => Ok(self),
            Status::Divergent => Err(QError::Divergent(format!("q-integral terms grow past k = {}", self.k_neg_used))),
            Status::Capped => Err(QError::CapExceeded { what: "q-integral lattice window", cap: self.k_pos_used.max(-self.k_neg_used) as usize }),
        }
    }
}

struct Sweep {
    sum: Scaled,
    abs_sum: Scaled,
    last_k: i64,
    tail: f64,
    status: Status,
}

/// Sums term(k) outward from k = start in direction `dir` (+1 or -1).
///
/// Stops after `decay_window` consecutive terms each below
/// tail_rel_tol * (running sum of moduli). Growth is flagged divergent only
/// when the log-ratio of consecutive terms is positive and non-decreasing for
/// `decay_window` steps; a concave bump (as for high-order moments) is not.
fn sweep(term: &dyn Fn(i64) -> Result<Scaled>, start: i64, dir: i64, prior_abs: Scaled, ctx: &QContext) -> Result<Sweep> {
    let tol = ctx.tail_rel_tol;
    let mut sum = Scaled::ZERO;
    let mut abs_sum = Scaled::ZERO;
    let mut small = 0usize;
    let mut grow = 0usize;
    let mut prev_ln = f64::NAN;
    let mut prev_d = f64::NAN;
    let mut last_two = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut k = start;
    loop {
        if k.abs() > ctx.max_lattice_index {
            return Ok(Sweep { sum, abs_sum, last_k: k - dir, tail: f64::INFINITY, status: Status::Capped });
        }
        let t = term(k)?;
        if !t.is_finite() {
            return Err(QError::EvaluationFailure(format!("non-finite q-integral term at k = {k}")));
        }
        let ta = t.abs();
        sum = sum + t;
        abs_sum = abs_sum + ta;
        let ln = t.ln_abs();
        last_two = (last_two.1, ln);
        if ta.small_rel(&(abs_sum + prior_abs), tol) {
            small += 1;
        } else {
            small = 0;
        }
        if ln.is_finite() && prev_ln.is_finite() {
            let d = ln - prev_ln;
            if d > 0.0 && (prev_d.is_nan() || d >= prev_d - 1e-9 * (1.0 + d.abs())) {
                grow += 1;
            } else {
                grow = 0;
            }
            prev_d = d;
        } else {
            grow = 0;
            prev_d = f64::NAN;
        }
        prev_ln = ln;
        if grow >= ctx.decay_window && !ta.small_rel(&(abs_sum + prior_abs), tol) {
            return Ok(Sweep { sum, abs_sum, last_k: k, tail: f64::INFINITY, status: Status::Divergent });
        }
        if small >= ctx.decay_window {
            let (a, b) = last_two;
            let tail = if b == f64::NEG_INFINITY {
                0.0
            } else if a.is_finite() && b < a {
                let r = (b - a).exp();
                b.exp() * r / (1.0 - r)
            } else {
                b.exp()
            };
            return Ok(Sweep { sum, abs_sum, last_k: k, tail, status: Status::Converged });
        }
        k += dir;
    }
}

/// Bilateral (or, if `bounded`, one-sided k >= 0) lattice sum of `term`.
pub(crate) fn lattice_sum(term: &dyn Fn(i64) -> Result<Scaled>, bounded: bool, ctx: &QContext) -> Result<QIntegralResult> {
    let pos = sweep(term, 0, 1, Scaled::ZERO, ctx)?;
    let (neg_sum, neg_abs, neg_k, neg_tail, neg_status) = if bounded {
        (Scaled::ZERO, Scaled::ZERO, 0, 0.0, Status::Converged)
    } else {
        let neg = sweep(term, -1, -1, pos.abs_sum, ctx)?;
        (neg.sum, neg.abs_sum, neg.last_k, neg.tail, neg.status)
    };
    let status = match (pos.status, neg_status) {
        (Status::Divergent, _) | (_, Status::Divergent) => Status::Divergent,
        (Status::Capped, _) | (_, Status::Capped) => Status::Capped,
        _ => Status::Converged,
    };
    let scaled = pos.sum + neg_sum;
    Ok(QIntegralResult {
        value: scaled.to_c64(),
        scaled,
        k_neg_used: neg_k,
        k_pos_used: pos.last_k,
        tail_bound: pos.tail + neg_tail,
        status,
        abs_sum: pos.abs_sum + neg_abs,
    })
}

/// General weighted lattice integral: (1-q) Σ q^k gamma Σ_eps w(p) f(p), with
/// the parity of the full integrand supplied so odd integrands vanish exactly
/// and even ones are folded before summation.
pub(crate) fn integrate_weighted(
    f: &LatticeFunction,
    gamma: f64,
    parity: Parity,
    bounded: bool,
    weight: &(dyn Fn(&LatticePoint, Scaled) -> Scaled + Sync),
    ctx: &QContext,
) -> Result<QIntegralResult> {
    Lattice::new(gamma)?;
    if parity == Parity::Odd {
        return Ok(QIntegralResult::zero());
    }
    let lq = ctx.ln_q();
    let base = (1.0 - ctx.q).ln() + gamma.ln();
    let term = |k: i64| -> Result<Scaled> {
        let pp = LatticePoint::new(1, k, gamma, ctx);
        let s = match parity {
            Parity::Even => {
                let v = weight(&pp, f.eval_at(&pp)?);
                v + v
            }
            _ => {
                let pm = LatticePoint::new(-1, k, gamma, ctx);
                weight(&pp, f.eval_at(&pp)?) + weight(&pm, f.eval_at(&pm)?)
            }
        };
        Ok(s.scale_exp(base + k as f64 * lq))
    };
    lattice_sum(&term, bounded, ctx)
}

/// (1-q) Σ_{k∈Z} Σ_eps q^k gamma f(eps q^k gamma).
pub fn q_integral_unbounded(f: &LatticeFunction, gamma: f64, ctx: &QContext) -> Result<QIntegralResult> {
    integrate_weighted(f, gamma, f.parity, false, &|_, v| v, ctx)
}

/// (1-q) Σ_{k>=0} Σ_eps q^k gamma f(eps q^k gamma).
pub fn q_integral_bounded(f: &LatticeFunction, gamma: f64, ctx: &QContext) -> Result<QIntegralResult> {
    integrate_weighted(f, gamma, f.parity, true, &|_, v| v, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> QContext {
        QContext::new(0.5).unwrap()
    }

    #[test]
    fn locate_points() {
        let c = ctx();
        let l = Lattice::new(1.0).unwrap();
        let p = l.locate(Complex64::new(-0.25, 0.0), &c).unwrap();
        assert_eq!((p.epsilon, p.k), (-1, 2));
        assert_eq!(l.locate(Complex64::new(8.0, 0.0), &c).unwrap().k, -3);
        assert!(l.locate(Complex64::new(0.3, 0.0), &c).is_none());
        assert!(l.locate(Complex64::new(0.25, 1.0), &c).is_none());
        assert!(l.locate(Complex64::new(0.0, 0.0), &c).is_none());
    }

    #[test]
    fn constant_on_bounded_lattice_integrates_to_two() {
        let c = ctx();
        let one = LatticeFunction::from_fn("1", |_| Complex64::new(1.0, 0.0), 1.0, Analyticity::Entire, Parity::Even, &c).unwrap();
        let r = q_integral_bounded(&one, 1.0, &c).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!((r.value.re - 2.0).abs() < 1e-13);
    }

    #[test]
    fn odd_integrands_vanish_exactly() {
        let c = ctx();
        let f = LatticeFunction::from_fn("x/(1+x^4)", |z| z / (1.0 + z.powi(4)), 1.0, Analyticity::Entire, Parity::Odd, &c).unwrap();
        assert_eq!(q_integral_unbounded(&f, 1.0, &c).unwrap().value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn polynomial_growth_is_divergent() {
        let c = ctx();
        let f = LatticeFunction::from_fn("x^2", |z| z * z, 1.0, Analyticity::Entire, Parity::Even, &c).unwrap();
        assert_eq!(q_integral_unbounded(&f, 1.0, &c).unwrap().status, Status::Divergent);
    }

    #[test]
    fn shift_round_trip_on_tables() {
        let c = ctx();
        let f = LatticeFunction::from_fn("x", |z| z, 1.0, Analyticity::Entire, Parity::Odd, &c).unwrap();
        let t = Table::sample(&f, 1.0, -3, 5, &c).unwrap();
        let tf = LatticeFunction::table("t", t.clone(), Parity::Odd);
        let s = q_shift(&tf, 2, &c).unwrap();
        assert_eq!(s.as_table().unwrap().get(1, 0).unwrap(), t.get(1, 2).unwrap());
        let back = q_shift(&s, -2, &c).unwrap();
        assert_eq!(back.as_table().unwrap(), &t);
        let sr = q_shift(&f, 1, &c).unwrap();
        assert!((sr.eval(Complex64::new(3.0, 0.0)).unwrap().re - 1.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = ctx();
        let f = LatticeFunction::from_fn("e", |z: Complex64| (z * 0.3).exp() + Complex64::new(0.0, 1.0) / 3.0, 1.0, Analyticity::Entire, Parity::None, &c).unwrap();
        let t = Table::sample(&f, 1.0, -2, 6, &c).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epsilon,k,re,im\n"));
        let back = Table::read_csv(&buf[..], 1.0).unwrap();
        assert_eq!(back, t);
        assert!(Table::read_csv("k,epsilon,re,im\n1,0,1,0\n".as_bytes(), 1.0).is_err());
    }

    #[test]
    fn rules_tagged_with_small_parameter_are_renormalised() {
        let c = ctx();
        let f = LatticeFunction::from_fn("s", |z| z, 3.0, Analyticity::Strip(1.0), Parity::None, &c).unwrap();
        assert!(f.gamma() < 1.0);
        assert!((f.gamma() - 0.75).abs() < 1e-15);
    }
}
