use lculab::costmodel::{choose_r, eps_tilde_ceiling, lemma11_error_bound};
use lculab::exactcoeff::{
    coefficients_general, cq_upper_bound, kappa_lower_bound, ratio_to_f64, solve_order_system,
};
use lculab::numerics::{random_term_list, spectral_norm};
use lculab::suzuki::evaluate;
use lculab::*;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn factorial(n: u64) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// Closed form for the low coefficients of a first-family formula with
/// levels `1, …, k, L`.
fn factored_low_coeff(k: u64, q: u64, big_l: u64) -> BigRational {
    let sign = if (k - q).is_multiple_of(2) { 1 } else { -1 };
    let num = BigInt::from(2 * sign) * BigInt::from(q).pow(2 * k as u32);
    let den = factorial(k - q) * factorial(k + q);
    let q2 = BigInt::from(q * q);
    let l2 = BigInt::from(big_l) * BigInt::from(big_l);
    BigRational::new(num, den) * BigRational::new(q2.clone(), q2 - l2)
}

fn gamma_range(k: usize) -> std::ops::Range<f64> {
    // Keep ℓ_{k+1} above k + 1, below 2^40, and with 2k² ≤ ℓ_{k+1}².
    let kf = k as f64;
    let lo = (kf + 2.0).ln().max(0.5 * (2.0 * kf * kf).ln()) / (kf + 1.0);
    let hi = 27.0 / (k + 1) as f64;
    lo..hi
}

fn spec_strategy(max_k: usize) -> impl Strategy<Value = (usize, f64)> {
    (1..=max_k).prop_flat_map(|k| (Just(k), gamma_range(k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn built_specs_satisfy_their_order_conditions((k, gamma) in spec_strategy(6), chi_pick in 0usize..6) {
        let chi = 1 + chi_pick % k;
        let spec = build_mpf_spec(k, chi, gamma).unwrap();
        prop_assert!(verify_order_conditions(&spec));
        let total: BigRational = spec.coeffs().iter().cloned().sum();
        prop_assert!(total.is_one());
        prop_assert_eq!(spec.n_terms(), k + 1);
        prop_assert_eq!(&spec.ells()[..k], &(1..=k as u64).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn low_coefficients_match_closed_form((k, gamma) in spec_strategy(6)) {
        let spec = build_mpf_spec(k, 1, gamma).unwrap();
        let big_l = spec.ells()[k];
        for q in 1..=k {
            prop_assert_eq!(&spec.coeffs()[q - 1], &factored_low_coeff(k as u64, q as u64, big_l));
        }
    }

    #[test]
    fn lagrange_form_agrees_with_elimination(ells in prop::collection::btree_set(1u64..60, 2..6)) {
        let ells: Vec<u64> = ells.into_iter().collect();
        prop_assert_eq!(coefficients_general(&ells).unwrap(), solve_order_system(&ells, 1).unwrap());
    }

    #[test]
    fn top_coefficient_is_at_least_one((k, gamma) in spec_strategy(8)) {
        let spec = build_mpf_spec(k, 1, gamma).unwrap();
        prop_assert!(spec.coeffs()[k] >= BigRational::one());
        let sign_ok = spec.coeffs()[..k]
            .iter()
            .enumerate()
            .all(|(i, c)| c.is_negative() == ((k - i - 1) % 2 == 0));
        prop_assert!(sign_ok);
    }

    #[test]
    fn kappa_and_coefficient_bounds_hold((k, gamma) in spec_strategy(8)) {
        let spec = build_mpf_spec(k, 1, gamma).unwrap();
        let g = spec.gamma();
        let kappa_value = spec.kappa().to_f64();
        let low_bound = kappa_lower_bound(k, g).unwrap();
        prop_assert!(kappa_value >= low_bound * (1.0 - 1e-12), "κ = {} < {}", kappa_value, low_bound);
        let max_low = spec.coeffs()[..k].iter().map(|c| ratio_to_f64(&c.abs())).fold(0.0, f64::max);
        let cq_bound = cq_upper_bound(k, g).unwrap();
        prop_assert!(max_low <= cq_bound * (1.0 + 1e-12), "max |C_q| = {} > {}", max_low, cq_bound);
    }

    #[test]
    fn spec_json_roundtrip((k, gamma) in spec_strategy(5)) {
        let spec = build_mpf_spec(k, 1, gamma).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        let back: MpfSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn formula_shape(m in 1usize..5, chi in 1usize..4, t in -2.0f64..2.0) {
        let f = build_schi(m, chi, t).unwrap();
        prop_assert_eq!(f.len(), 2 * m * 5usize.pow(chi as u32 - 1));
        prop_assert!(f.is_palindromic());
        for s in f.duration_sums() {
            prop_assert!((s - t).abs() <= 1e-12 * (1.0 + t.abs()));
        }
    }

    #[test]
    fn formula_inverse_is_negated_time(seed in 0u64..1000, m in 1usize..4, chi in 1usize..3, t in 0.01f64..1.5) {
        let terms = random_term_list(2, m, 1.0, seed).unwrap();
        let fwd = evaluate(&build_schi(m, chi, t).unwrap(), &terms).unwrap();
        let back = evaluate(&build_schi(m, chi, -t).unwrap(), &terms).unwrap();
        let id = DMatrix::<Complex64>::identity(terms.dim(), terms.dim());
        prop_assert!(spectral_norm(&(&back * &fwd - id)) < 1e-12);
    }

    #[test]
    fn chosen_r_meets_total_error_target(
        k in 1usize..5,
        m in 1usize..6,
        h in 0.1f64..5.0,
        t in 0.1f64..20.0,
        frac in 0.0f64..1.0,
        beta in 1e-4f64..0.5,
    ) {
        let ceiling = eps_tilde_ceiling(k, m, h, t);
        let eps_tilde = ceiling * 10f64.powf(-6.0 * frac);
        let r = choose_r(k, m, h, t, eps_tilde, beta).unwrap();
        prop_assert!(lemma11_error_bound(k, m, h, t, r) <= eps_tilde);
        prop_assert!(r as f64 >= 13.0 * (2.0 / beta).ln());
    }

    #[test]
    fn kappa_of_custom_coefficients(pos in 1i64..50, neg in 1i64..50) {
        let coeffs = vec![
            BigRational::from_integer(BigInt::from(-neg)),
            BigRational::from_integer(BigInt::from(pos + neg + 1)),
            BigRational::from_integer(BigInt::from(-pos)),
        ];
        let expected = BigRational::new(BigInt::from(pos + neg + 1), BigInt::from(pos + neg));
        prop_assert_eq!(kappa(&coeffs).unwrap(), Kappa::Finite(expected));
        prop_assert!(!coeffs.iter().all(Zero::is_zero));
    }
}
