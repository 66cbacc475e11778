//! Property tests: convolution and composition coefficients against
//! independent brute-force routes, and the scaling round trip.

use implosion_core::params::{derive_alpha, forward_n};
use implosion_core::series::{power_series_coeff, round_product, square_product, square_product3};
use proptest::prelude::*;

/// Naive full polynomial product, independent of the Kahan convolution path.
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// J.C.P. Miller recurrence for the coefficients of (sum c_k x^k)^e,
/// an independent route to the Faa di Bruno sum.
fn miller_power(base: &[f64], e: f64, order: usize) -> Vec<f64> {
    let mut p = vec![0.0; order + 1];
    p[0] = base[0].powf(e);
    for m in 1..=order {
        let mut acc = 0.0;
        for k in 1..=m.min(base.len() - 1) {
            acc += ((e + 1.0) * k as f64 - m as f64) * base[k] * p[m - k];
        }
        p[m] = acc / (m as f64 * base[0]);
    }
    p
}

fn coeff_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, len..=len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn round_product_matches_poly_mul(a in coeff_vec(7), b in coeff_vec(7)) {
        let got = round_product(&a, &b).unwrap();
        let full = poly_mul(&a, &b);
        for m in 0..a.len() {
            prop_assert!((got[m] - full[m]).abs() <= 1e-12 * full[m].abs().max(1.0));
        }
    }

    #[test]
    fn square_products_exclude_order_m_terms(a in coeff_vec(7), b in coeff_vec(7), c in coeff_vec(7)) {
        for m in 1..7usize {
            let full = poly_mul(&a, &b)[m];
            let expect = full - a[m] * b[0] - a[0] * b[m];
            let got = square_product(&a, &b, m).unwrap();
            prop_assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));

            let full3 = poly_mul(&poly_mul(&a, &b), &c)[m];
            let expect3 = full3 - a[m] * b[0] * c[0] - a[0] * b[m] * c[0] - a[0] * b[0] * c[m];
            let got3 = square_product3(&a, &b, &c, m).unwrap();
            prop_assert!((got3 - expect3).abs() <= 1e-11 * expect3.abs().max(1.0));
        }
    }

    #[test]
    fn faa_di_bruno_matches_miller_recurrence(
        tail in coeff_vec(6),
        c0 in 0.2..3.0f64,
        e in prop_oneof![Just(5.0/3.0f64), Just(-2.0/3.0f64), 0.1..2.5f64],
    ) {
        let mut base = vec![c0];
        base.extend_from_slice(&tail);
        let miller = miller_power(&base, e, 6);
        for m in 0..=6usize {
            let got = power_series_coeff(&base, e, m).unwrap();
            prop_assert!(
                (got - miller[m]).abs() <= 1e-10 * miller[m].abs().max(1.0),
                "order {}: {} vs {}", m, got, miller[m]
            );
        }
    }

    #[test]
    fn alpha_round_trip(gamma in 4.0/3.0 + 1e-6..2.0 - 1e-6, k in 2i64..8) {
        let n = 2 * k;
        if let Ok(alpha) = derive_alpha(gamma, n) {
            prop_assert!((forward_n(gamma, alpha) - n as f64).abs() / n as f64 <= 1e-12);
            prop_assert!(alpha > 3.0 * gamma - 4.0 && alpha < gamma);
        }
    }
}
