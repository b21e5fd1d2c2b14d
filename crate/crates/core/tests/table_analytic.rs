//! The analyticity test on sampled tables rather than closed-form rules.

use qconv::analytic::{derivative_limits, derivative_limits_with, reconstruct_series};
use qconv::lattice::{LatticeFunction, Parity, Table};
use qconv::qcore::{q_factorial, qq_finite, QContext};
use qconv::special::{SpecialFunction, SpecialKind};
use qconv::QError;

fn eq_table(q: f64, k_hi: i64) -> (QContext, LatticeFunction) {
    let ctx = QContext::new(q).unwrap();
    let f = SpecialFunction::new(SpecialKind::EqBig, &ctx).on_lattice(1.0).unwrap();
    let t = Table::sample(&f, 1.0, 0, k_hi, &ctx).unwrap();
    (ctx, LatticeFunction::table("E_q table", t, Parity::None))
}

fn coefficient(k: usize, q: f64) -> f64 {
    q.powi((k * k.saturating_sub(1) / 2) as i32) / qq_finite(k, q)
}

#[test]
fn low_orders_reconstruct_from_table() {
    for q in [0.5, 0.7] {
        let (ctx, g) = eq_table(q, 60);
        let dl = derivative_limits(&g, 2, &ctx).unwrap();
        let s = reconstruct_series(&dl, 1e-6, &ctx).unwrap();
        for k in 0..=2 {
            let want = coefficient(k, q);
            let got = s.coefficients[k].re;
            assert!((got - want).abs() <= 1e-8 * want, "q={q} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn high_orders_are_flagged_not_guessed() {
    // one-sided q-differences at order 10 need more digits than a double
    // holds; the limit must be reported as unsettled, and the reported
    // evidence must bound the actual error at every order
    for q in [0.5, 0.7] {
        let (ctx, g) = eq_table(q, 60);
        match derivative_limits(&g, 10, &ctx) {
            Err(QError::NonConvergent { p, .. }) => assert!(p > 2, "q={q}: order {p} flagged"),
            other => panic!("q={q}: expected NonConvergent, got {other:?}"),
        }
        let dl = derivative_limits_with(&g, 10, f64::INFINITY, &ctx).unwrap();
        for k in 0..=10 {
            let want = coefficient(k, q) * q_factorial(k, &ctx);
            let err = (dl.l[k].re - want).abs();
            assert!(err <= (2.0 * dl.convergence_evidence[k]).max(1e-12 * want), "q={q} k={k}: error {err:e}, evidence {:e}", dl.convergence_evidence[k]);
        }
    }
}

#[test]
fn short_table_is_insufficient() {
    let (ctx, g) = eq_table(0.5, 3);
    assert!(derivative_limits(&g, 4, &ctx).is_err());
}
