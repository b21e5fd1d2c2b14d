//! q-derivatives ∂^e f(x) = [e]_q! f[x, qx, ..., q^e x].
//!
//! Three routes: closed forms supplied by the evaluator; the exact lattice
//! difference quotient (tables, lattice-only rules, or on request); and, for
//! holomorphic rules, a contour-integral divided difference that avoids the
//! catastrophic cancellation of high-order difference quotients.

use crate::error::{QError, Result};
use crate::lattice::{Analyticity, LatticeFunction, LatticePoint, Repr};
use crate::qcore::{pow_q, q_factorial_scaled, QContext};
use crate::scaled::Scaled;
use num_complex::Complex64;
use std::f64::consts::PI;

/// A point at which to differentiate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    Lattice(LatticePoint),
    Complex(Complex64),
}

impl Point {
    pub fn complex(&self) -> Complex64 {
        match self {
            Point::Lattice(p) => p.complex(),
            Point::Complex(z) => *z,
        }
    }
}

impl From<LatticePoint> for Point {
    fn from(p: LatticePoint) -> Self {
        Point::Lattice(p)
    }
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Point::Complex(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivMethod {
    /// Closed form if available, else contour for holomorphic rules, else
    /// the lattice difference quotient.
    Auto,
    /// Always the recursive difference quotient on q^j x.
    Lattice,
}

const CONTOUR_NODES: usize = 1024;

/// (∂^order f)(x).
pub fn q_derivative(f: &LatticeFunction, x: impl Into<Point>, order: usize, ctx: &QContext) -> Result<Complex64> {
    let d = q_derivatives(f, x.into(), order, DerivMethod::Auto, ctx)?;
    Ok(d[order].to_c64())
}

/// (∂^e f)(x) for e = 0..=max_order.
pub fn q_derivatives(f: &LatticeFunction, x: Point, max_order: usize, method: DerivMethod, ctx: &QContext) -> Result<Vec<Scaled>> {
    if let Repr::Table(t) = f.repr() {
        let Point::Lattice(p) = x else {
            return Err(QError::Domain("tables can only be differentiated at lattice points".into()));
        };
        let hi = p.k + max_order as i64;
        if p.k < t.k_lo || hi > t.k_hi() {
            return Err(QError::WindowExceeded { k: if p.k < t.k_lo { p.k } else { hi }, lo: t.k_lo, hi: t.k_hi() });
        }
        return difference_quotients(f, x, max_order, ctx);
    }
    let z = x.complex();
    if method == DerivMethod::Lattice {
        if z == Complex64::new(0.0, 0.0) {
            return Err(QError::ZeroPoint);
        }
        return difference_quotients(f, x, max_order, ctx);
    }
    let ev = f.evaluator().expect("rule");
    let exact = match x {
        Point::Lattice(p) => ev.exact_lattice_derivatives(max_order, &p),
        Point::Complex(z) => ev.exact_derivatives(max_order, z),
    };
    if let Some(r) = exact {
        return r;
    }
    let an = f.analyticity();
    if an != Analyticity::LatticeOnly {
        let c = z * 0.5;
        let rn = c.norm();
        let rs = an.singularity_distance(c);
        if rs > 1.05 * rn {
            return contour_derivatives(f, z, max_order, rs, ctx);
        }
    }
    if z == Complex64::new(0.0, 0.0) {
        return Err(QError::ZeroPoint);
    }
    difference_quotients(f, x, max_order, ctx)
}

fn value(f: &LatticeFunction, x: Point, j: usize, ctx: &QContext) -> Result<Scaled> {
    match x {
        Point::Lattice(p) => f.eval_at(&p.shifted(j as i64, ctx)),
        Point::Complex(z) => f.eval(z * pow_q(ctx.q, j as i64)).map(Scaled::from),
    }
}

/// ∂^e via D_{m+1}[j] = (D_m[j] - D_m[j+1]) / ((1-q) q^j x).
fn difference_quotients(f: &LatticeFunction, x: Point, max_order: usize, ctx: &QContext) -> Result<Vec<Scaled>> {
    let q = ctx.q;
    let mut d: Vec<Scaled> = (0..=max_order).map(|j| value(f, x, j, ctx)).collect::<Result<_>>()?;
    let (xm, xl) = match x {
        Point::Lattice(p) => (Complex64::new(p.epsilon as f64, 0.0), p.ln_abs(ctx)),
        Point::Complex(z) => (z / z.norm(), z.norm().ln()),
    };
    let mut out = Vec::with_capacity(max_order + 1);
    out.push(d[0]);
    for m in 0..max_order {
        for j in 0..d.len() - 1 {
            let den = Scaled::from_parts(xm * (1.0 - q), xl + j as f64 * q.ln());
            d[j] = (d[j] - d[j + 1]) / den;
        }
        d.pop();
        out.push(d[0]);
        let _ = m;
    }
    Ok(out)
}

/// Trapezoid rule on circles around the nodes x, qx, ..., q^E x:
/// f[x_0..x_e] = (1/2πi)∮ f(z) / Π_{j<=e}(z - x_j) dz.
///
/// Several radii are tried; for each order the circle with the smallest sum
/// of term moduli (i.e. the least rounding error) wins. Larger circles suit
/// high orders of entire functions, smaller ones low orders.
fn contour_derivatives(f: &LatticeFunction, x: Complex64, max_order: usize, rs: f64, ctx: &QContext) -> Result<Vec<Scaled>> {
    let c = x * 0.5;
    let rn = c.norm();
    let span = 2.0 * rn.max(0.5);
    let radii: Vec<f64> = if rs.is_finite() {
        let gap = rs - rn;
        [0.3, 0.45, 0.6, 0.75, 0.88].iter().map(|t| rn + t * gap.min(4.0 * span)).collect()
    } else {
        (0..14).map(|i| rn + 0.6 * span * 2f64.powf(i as f64 / 2.0)).collect()
    };
    let nodes: Vec<Complex64> = (0..=max_order).map(|j| x * pow_q(ctx.q, j as i64)).collect();
    let per_radius = crate::par::map_slice(&radii, |&rho| circle(f, c, rho, &nodes));
    let mut best: Vec<(Scaled, f64)> = vec![(Scaled::ZERO, f64::INFINITY); max_order + 1];
    for r in per_radius {
        let Ok(r) = r else { continue };
        for (e, (v, a)) in r.into_iter().enumerate() {
            if a < best[e].1 {
                best[e] = (v, a);
            }
        }
    }
    if best.iter().any(|b| !b.1.is_finite()) {
        return Err(QError::EvaluationFailure(format!("contour derivative failed at {x}")));
    }
    Ok(best.into_iter().enumerate().map(|(e, (v, _))| v * q_factorial_scaled(e, ctx)).collect())
}

/// Divided differences on one circle, with ln Σ|terms| as the error proxy.
fn circle(f: &LatticeFunction, c: Complex64, rho: f64, nodes: &[Complex64]) -> Result<Vec<(Scaled, f64)>> {
    let n = CONTOUR_NODES;
    let mut w: Vec<Scaled> = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for m in 0..n {
        let z = c + Complex64::from_polar(rho, 2.0 * PI * (m as f64 + 0.5) / n as f64);
        let v = f.eval(z)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(QError::EvaluationFailure(format!("non-finite value at {z}")));
        }
        w.push(Scaled::from(v * (z - c) / n as f64));
        zs.push(z);
    }
    let mut out = Vec::with_capacity(nodes.len());
    for xe in nodes {
        let mut acc = Scaled::ZERO;
        let mut abs = Scaled::ZERO;
        for (wm, z) in w.iter_mut().zip(&zs) {
            *wm = wm.mul_c((z - xe).inv());
            acc = acc + *wm;
            abs = abs + wm.abs();
        }
        out.push((acc, abs.ln_abs()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Parity;

    #[test]
    fn constant_and_square() {
        let c = QContext::new(0.5).unwrap();
        let k = LatticeFunction::from_fn("1", |_| Complex64::new(2.0, 0.0), 1.0, Analyticity::Entire, Parity::Even, &c).unwrap();
        let x = Complex64::new(0.7, 0.0);
        assert_eq!(q_derivative(&k, x, 1, &c).unwrap().norm() < 1e-14, true);
        let sq = LatticeFunction::from_fn("x^2", |z| z * z, 1.0, Analyticity::Entire, Parity::Even, &c).unwrap();
        let d = q_derivatives(&sq, x.into(), 1, DerivMethod::Lattice, &c).unwrap();
        assert!((d[1].to_c64().re - 1.5 * 0.7).abs() < 1e-15);
        let d = q_derivatives(&sq, x.into(), 3, DerivMethod::Auto, &c).unwrap();
        assert!((d[1].to_c64().re - 1.5 * 0.7).abs() < 1e-13);
        assert!((d[2].to_c64().re - 1.5).abs() < 1e-13);
        assert!(d[3].to_c64().norm() < 1e-12);
    }

    #[test]
    fn contour_matches_exp_taylor_data_at_zero() {
        // ∂^e f(0) = [e]_q! f^{(e)}(0)/e!
        let c = QContext::new(0.7).unwrap();
        let f = LatticeFunction::from_fn("exp", |z: Complex64| z.exp(), 1.0, Analyticity::Entire, Parity::None, &c).unwrap();
        let d = q_derivatives(&f, Complex64::new(0.0, 0.0).into(), 20, DerivMethod::Auto, &c).unwrap();
        let mut fact = 1.0;
        for (e, de) in d.iter().enumerate() {
            if e > 0 {
                fact *= e as f64;
            }
            let want = crate::qcore::q_factorial(e, &c) / fact;
            assert!((de.to_c64().re - want).abs() < 1e-10 * want, "e={e} got {} want {want}", de.to_c64());
        }
    }
}
