use num_complex::Complex64;
use proptest::prelude::*;
use qconv::qcore::{pow_q, q_binomial, q_factorial, q_number, q_pochhammer, Len, QContext};
use qconv::special::{hermite_ii_recurrence, hermite_ii_scaled};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn q_binomial_symmetry(q in 0.05f64..0.95, n in 0usize..40, k in 0usize..40) {
        prop_assume!(k <= n);
        let ctx = QContext::new(q).unwrap();
        prop_assert!(close(q_binomial(n, k, &ctx).unwrap(), q_binomial(n, n - k, &ctx).unwrap(), 1e-12));
    }

    #[test]
    fn q_binomial_pascal(q in 0.05f64..0.95, n in 1usize..40, k in 1usize..40) {
        prop_assume!(k < n);
        let ctx = QContext::new(q).unwrap();
        let lhs = q_binomial(n, k, &ctx).unwrap();
        let rhs = q_binomial(n - 1, k - 1, &ctx).unwrap() + pow_q(q, k as i64) * q_binomial(n - 1, k, &ctx).unwrap();
        prop_assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn pochhammer_step(q in 0.05f64..0.95, re in -3.0f64..3.0, im in -3.0f64..3.0, n in 0usize..60) {
        let ctx = QContext::new(q).unwrap();
        let a = Complex64::new(re, im);
        let p0 = q_pochhammer(a, Len::Finite(n), &ctx).unwrap();
        let p1 = q_pochhammer(a, Len::Finite(n + 1), &ctx).unwrap();
        let step = p0 * (1.0 - a * pow_q(q, n as i64));
        prop_assert!((p1 - step).norm() <= 1e-11 * p1.norm().max(step.norm()).max(1e-300));
    }

    #[test]
    fn infinite_pochhammer_splits(q in 0.1f64..0.9, re in -2.0f64..2.0, n in 0usize..20) {
        // (a;q)_inf = (a;q)_n (aq^n;q)_inf
        let ctx = QContext::new(q).unwrap();
        let a = Complex64::new(re, 0.3);
        let whole = q_pochhammer(a, Len::Infinite, &ctx).unwrap();
        let head = q_pochhammer(a, Len::Finite(n), &ctx).unwrap();
        let tail = q_pochhammer(a * pow_q(q, n as i64), Len::Infinite, &ctx).unwrap();
        prop_assert!((whole - head * tail).norm() <= 1e-11 * whole.norm().max(1e-300));
    }

    #[test]
    fn q_factorial_is_product_of_q_numbers(q in 0.05f64..0.95, n in 0usize..50) {
        let ctx = QContext::new(q).unwrap();
        let prod: f64 = (1..=n).map(|j| q_number(j, &ctx)).product();
        prop_assert!(close(q_factorial(n, &ctx), prod, 1e-12));
    }

    #[test]
    fn hermite_sum_matches_recurrence(q in 0.2f64..0.9, re in -4.0f64..4.0, im in -2.0f64..2.0) {
        let ctx = QContext::new(q).unwrap();
        let x = Complex64::new(re, im);
        for (k, r) in hermite_ii_recurrence(25, x, &ctx).into_iter().enumerate() {
            let s = hermite_ii_scaled(k, x, &ctx);
            // cancellation in the explicit sum is bounded by its absolute sum,
            // which is |h̃_k(i|x|)|
            let scale = hermite_ii_scaled(k, Complex64::new(0.0, x.norm()), &ctx).norm_f64().max(r.norm_f64());
            prop_assert!((r - s).norm_f64() <= 1e-9 * scale, "k={} {:?} {:?}", k, r.to_c64(), s.to_c64());
        }
    }
}
