use lculab::costmodel::{
    inversion_bound_max_h_lambda, inversion_error_bound, mpf_bound_max_h_lambda, mpf_error_bound,
};
use lculab::lcu::{MpfStep, OutcomeKind};
use lculab::numerics::*;
use lculab::*;

fn terms() -> TermList {
    random_term_list(2, 2, 1.0, 2024).unwrap()
}

/// Spec with levels `1, …, k+1`.
fn consecutive_spec(k: usize, chi: usize) -> MpfSpec {
    let gamma = ((k + 1) as f64).ln() / (k + 1) as f64;
    let spec = build_mpf_spec(k, chi, gamma).unwrap();
    assert_eq!(spec.ells(), (1..=k as u64 + 1).collect::<Vec<_>>());
    spec
}

fn order_slope(k: usize, chi: usize) -> f64 {
    let terms = terms();
    let spec = consecutive_spec(k, chi);
    let points: Vec<(f64, f64)> = log_grid(1e-3, 1.0, 120)
        .into_iter()
        .map(|l| {
            let err = assemble_mpf_matrix(&spec, &terms, l).unwrap() - exact_evolution(&terms, l);
            (l, spectral_norm(&err))
        })
        .collect();
    windowed_slope(&points, FIT_WINDOW).unwrap()
}

#[test]
fn error_order_grows_with_k_and_chi() {
    for (k, chi) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
        let expected = (2 * k + 2 * chi + 1) as f64;
        let slope = order_slope(k, chi);
        assert!(
            (slope - expected).abs() <= 0.3,
            "k={k} χ={chi}: slope {slope}, expected {expected}"
        );
    }
}

#[test]
fn mpf_error_stays_below_bound() {
    let terms = terms();
    for k in 1..=2 {
        let spec = build_mpf_spec(k, k, choose_gamma(k, 0.5).unwrap()).unwrap();
        let hi = mpf_bound_max_h_lambda(k, 2) * (1.0 - 1e-12);
        for l in log_grid(1e-2, hi, 12) {
            let err = spectral_norm(
                &(assemble_mpf_matrix(&spec, &terms, l).unwrap() - exact_evolution(&terms, l)),
            );
            let bound = mpf_error_bound(k, 2, 1.0, l).unwrap();
            assert!(err <= bound, "k={k} λ={l}: {err} > {bound}");
        }
    }
}

#[test]
fn failed_subtraction_is_nearly_inverted() {
    let terms = terms();
    for k in 1..=2 {
        let spec = build_mpf_spec(k, k, choose_gamma(k, 0.5).unwrap()).unwrap();
        let hi = inversion_bound_max_h_lambda(k, 2) * (1.0 - 1e-12);
        for l in log_grid(1e-2, hi, 12) {
            let step = MpfStep::new(&spec, &terms, l).unwrap();
            let dev = max_inversion_deviation(&step.failure_operator());
            let bound = inversion_error_bound(k, 2, 1.0, l).unwrap();
            assert!(dev <= bound, "k={k} λ={l}: {dev} > {bound}");
        }
    }
}

#[test]
fn inversion_deviation_order() {
    let terms = terms();
    let spec = build_mpf_spec(1, 1, choose_gamma(1, 0.5).unwrap()).unwrap();
    let points: Vec<(f64, f64)> = log_grid(1e-2, 2.0, 40)
        .into_iter()
        .map(|l| {
            let step = MpfStep::new(&spec, &terms, l).unwrap();
            (l, max_inversion_deviation(&step.failure_operator()))
        })
        .collect();
    let slope = windowed_slope(&points, FIT_WINDOW).unwrap();
    assert!((slope - 6.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn correction_restores_state_to_high_order() {
    let terms = terms();
    let spec = build_mpf_spec(1, 1, choose_gamma(1, 0.5).unwrap()).unwrap();
    let psi = normalized(&StateVector::from_fn(4, |i, _| {
        num_complex::Complex64::new(1.0 + i as f64, 0.5 - i as f64)
    }))
    .unwrap();
    let points: Vec<(f64, f64)> = log_grid(1e-2, 2.0, 40)
        .into_iter()
        .map(|l| {
            let step = MpfStep::new(&spec, &terms, l).unwrap();
            let failed = step
                .branch_states(&psi)
                .into_iter()
                .find(|(key, _)| step.circuit().classify(*key) == OutcomeKind::SubtractionFailure)
                .map(|(_, v)| normalized(&v).unwrap())
                .unwrap();
            let restored = normalized(&step.correction_branch_states(&failed)[&0]).unwrap();
            (l, phase_aligned_distance(&restored, &psi))
        })
        .collect();
    let slope = windowed_slope(&points, FIT_WINDOW).unwrap();
    assert!((slope - 6.0).abs() <= 0.3, "slope {slope}");
}
