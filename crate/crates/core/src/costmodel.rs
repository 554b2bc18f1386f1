//! Error bounds and parameter rules for simulating `U(t)` as `M_{k,k}(t/r)^r`.
//!
//! Everything here is closed-form. The helpers take the usual problem
//! parameters: `m` terms with `‖H_j‖ ≤ h`, total time `t`, target error `ε`
//! and failure probability `β`.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result};
use crate::exactcoeff::{
    build_mpf_spec, choose_gamma, format_rational, gamma_critical, BigRational, MpfSpec,
};

/// `(5/3)^{k−1}`.
fn growth(k: usize) -> f64 {
    (5.0f64 / 3.0).powi(k as i32 - 1)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(invalid("k must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {x}")))
    }
}

fn check_non_negative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be non-negative, got {x}")))
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// Lagrange bound `s^{ℓ+1} e^s/(ℓ+1)!` on the remainder of the order-`ℓ`
/// Taylor series of `e^s`.
pub fn taylor_remainder_bound(abs_coeff_sum: f64, order: usize) -> Result<f64> {
    check_non_negative("abs_coeff_sum", abs_coeff_sum)?;
    if abs_coeff_sum == 0.0 {
        return Ok(0.0);
    }
    let s = abs_coeff_sum;
    Ok(((order + 1) as f64 * s.ln() + s - ln_factorial(order + 1)).exp())
}

/// Largest `hλ` for which [`mpf_error_bound`] holds: `3 log 2/(4mk(5/3)^{k−1})`.
pub fn mpf_bound_max_h_lambda(k: usize, m: usize) -> f64 {
    3.0 * std::f64::consts::LN_2 / (4.0 * m as f64 * k as f64 * growth(k))
}

/// `‖U(λ) − M_{k,k}(λ)‖ ≤ (2m(5/3)^{k−1}hλ)^{4k+1}`, for coefficients bounded by 2.
pub fn mpf_error_bound(k: usize, m: usize, h: f64, lambda: f64) -> Result<f64> {
    check_k(k)?;
    check_positive("h", h)?;
    check_non_negative("lambda", lambda)?;
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let limit = mpf_bound_max_h_lambda(k, m);
    if h * lambda > limit {
        return Err(domain(format!("hλ = {} exceeds {limit}", h * lambda)));
    }
    Ok((2.0 * m as f64 * growth(k) * h * lambda).powi(4 * k as i32 + 1))
}

/// Largest `hλ` for which [`inversion_error_bound`] holds: `1/(4mk(5/3)^{k−1})`.
pub fn inversion_bound_max_h_lambda(k: usize, m: usize) -> f64 {
    1.0 / (4.0 * m as f64 * k as f64 * growth(k))
}

/// `max_ψ ‖(1 − E_k(−λ)E_k(λ))ψ‖ ≤ (2mk(5/3)^{k−1}hλ)^{4k+2}`.
pub fn inversion_error_bound(k: usize, m: usize, h: f64, lambda: f64) -> Result<f64> {
    check_k(k)?;
    check_positive("h", h)?;
    check_non_negative("lambda", lambda)?;
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let x = 2.0 * m as f64 * k as f64 * growth(k) * h * lambda;
    if x > 0.5 {
        return Err(domain(format!("2mk(5/3)^(k-1)hλ = {x} exceeds 1/2")));
    }
    Ok(x.powi(4 * k as i32 + 2))
}

/// `m h t k^{−4k}`, the largest accuracy target [`choose_r`] accepts.
pub fn eps_tilde_ceiling(k: usize, m: usize, h: f64, t: f64) -> f64 {
    let k = k as f64;
    m as f64 * h * t * (-4.0 * k * k.ln()).exp()
}

/// `r = ⌈max{(4m(5/3)^{k−1}ht)^{1+1/4k}/(ε̃/5)^{1/4k}, 13 log(2/β)}⌉`.
pub fn choose_r(k: usize, m: usize, h: f64, t: f64, eps_tilde: f64, beta: f64) -> Result<u64> {
    check_k(k)?;
    check_positive("h", h)?;
    check_positive("t", t)?;
    check_positive("eps_tilde", eps_tilde)?;
    check_positive("beta", beta)?;
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let ceiling = eps_tilde_ceiling(k, m, h, t);
    if eps_tilde > ceiling {
        return Err(domain(format!(
            "eps_tilde = {eps_tilde} exceeds m·h·t·k^(-4k) = {ceiling}"
        )));
    }
    let kf = k as f64;
    let accuracy = (4.0 * m as f64 * growth(k) * h * t).powf(1.0 + 1.0 / (4.0 * kf))
        / (eps_tilde / 5.0).powf(1.0 / (4.0 * kf));
    let confidence = 13.0 * (2.0 / beta).ln();
    let r = accuracy.max(confidence).ceil().max(1.0);
    if r > u64::MAX as f64 {
        return Err(domain("r does not fit in 64 bits"));
    }
    Ok(r as u64)
}

/// Total error `5r(2m(5/3)^{k−1}ht/r)^{4k+1}` of `r` steps when the whole `5r`
/// attempt budget is spent.
pub fn lemma11_error_bound(k: usize, m: usize, h: f64, t: f64, r: u64) -> f64 {
    let rf = r as f64;
    5.0 * rf * (2.0 * m as f64 * growth(k) * h * t / rf).powi(4 * k as i32 + 1)
}

/// `γ_c + log(25/3)`: per-unit-k exponent of the exponential count.
pub fn per_k_exponent() -> f64 {
    gamma_critical() + (25.0f64 / 3.0).ln()
}

/// `(1/2)/√(γ_c + log(25/3))` ≈ 0.3142.
pub fn k_opt_coefficient() -> f64 {
    0.5 / per_k_exponent().sqrt()
}

/// `k_opt = ⌈k_opt_coefficient · √log(mht/ε̃)⌉`, at least 1.
pub fn choose_k_opt(m: usize, h: f64, t: f64, eps_tilde: f64) -> Result<usize> {
    check_positive("h", h)?;
    check_positive("t", t)?;
    check_positive("eps_tilde", eps_tilde)?;
    Ok(k_opt_from_log(((m as f64) * h * t / eps_tilde).ln()))
}

/// [`choose_k_opt`] from `log(mht/ε̃)` directly.
pub fn k_opt_from_log(log_ratio: f64) -> usize {
    if log_ratio.is_nan() || log_ratio <= 0.0 {
        return 1;
    }
    ((k_opt_coefficient() * log_ratio.sqrt()).ceil() as usize).max(1)
}

/// Log of the dominant factor `e^{(γ_c+log(25/3))k} (mht/ε̃)^{1/4k}`.
pub fn dominant_log_factor(k: usize, log_ratio: f64) -> f64 {
    per_k_exponent() * k as f64 + log_ratio / (4.0 * k as f64)
}

/// `⌈1000 m 5^{k−1} k^{9/4} e^{γ_c k} r⌉`, saturating at `u64::MAX`.
pub fn nexp_bound(k: usize, m: usize, r: u64) -> u64 {
    let kf = k as f64;
    let x = 1000.0
        * m as f64
        * 5f64.powi(k as i32 - 1)
        * kf.powf(2.25)
        * (gamma_critical() * kf).exp()
        * r as f64;
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

/// Bound `4(4/3·mk(5/3)^{k−1}ht/r)^{2k+1}/(2k+1)!` on the distance between
/// integrators of one step.
pub fn delta_remainder_bound(k: usize, m: usize, h: f64, t: f64, r: u64) -> Result<f64> {
    check_k(k)?;
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    let x = 4.0 / 3.0 * m as f64 * k as f64 * growth(k) * h * t / r as f64;
    if x > std::f64::consts::LN_2 {
        return Err(domain(format!("4/3·mk(5/3)^(k-1)ht/r = {x} exceeds log 2")));
    }
    let p = 2 * k + 1;
    Ok(4.0 * (p as f64 * x.ln() - ln_factorial(p)).exp())
}

/// Parameters for one full simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPlan {
    pub m: usize,
    pub h: f64,
    pub t: f64,
    pub eps: f64,
    pub beta: f64,
    pub eps_tilde: f64,
    pub k: usize,
    pub gamma_target: f64,
    /// Realized `log(ℓ_{k+1})/(k+1)`.
    pub gamma: f64,
    pub spec: MpfSpec,
    pub r: u64,
    pub lambda: f64,
    pub nexp_bound: u64,
    pub lemma11_error: f64,
    pub kappa: String,
    pub max_abs_coeff: String,
    pub low_abs_coeff_sum: String,
}

/// Plans `M_{k,k}(t/r)^r` for error `ε` and failure probability `β`.
///
/// `ε̃ = min(1, ε, β, mht k^{−4k})` depends on `k` and `k` on `ε̃`, so `k` is
/// first chosen from `min(1, ε, β)` and the pair is iterated to a fixed point.
pub fn build_plan(m: usize, h: f64, t: f64, eps: f64, beta: f64) -> Result<CostPlan> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    check_positive("h", h)?;
    check_positive("t", t)?;
    for (name, x) in [("eps", eps), ("beta", beta)] {
        if !(x > 0.0 && x <= 1.0) {
            return Err(invalid(format!("{name} must lie in (0, 1], got {x}")));
        }
    }
    let base = 1f64.min(eps).min(beta);
    let mut k = choose_k_opt(m, h, t, base)?;
    let mut eps_tilde = base.min(eps_tilde_ceiling(k, m, h, t));
    for _ in 0..16 {
        let next = choose_k_opt(m, h, t, eps_tilde)?;
        if next == k {
            break;
        }
        k = next;
        eps_tilde = base.min(eps_tilde_ceiling(k, m, h, t));
    }
    let gamma_target = choose_gamma(k, 0.5)?;
    let spec = build_mpf_spec(k, k, gamma_target)?;

    let two = BigRational::from_integer(2.into());
    let max_abs = spec
        .coeffs()
        .iter()
        .map(|c| c.abs())
        .max()
        .unwrap_or_else(BigRational::zero);
    if max_abs > two {
        return Err(domain(format!(
            "max |C_q| = {} exceeds 2",
            format_rational(&max_abs)
        )));
    }
    let low_sum: BigRational = spec.coeffs()[..k].iter().map(|c| c.abs()).sum();
    if low_sum > BigRational::from_integer(1.into()) {
        return Err(domain(format!(
            "Σ_(q≤k) |C_q| = {} exceeds 1",
            format_rational(&low_sum)
        )));
    }

    let r = choose_r(k, m, h, t, eps_tilde, beta)?;
    let lambda = t / r as f64;
    mpf_error_bound(k, m, h, lambda)?;
    inversion_error_bound(k, m, h, lambda)?;
    Ok(CostPlan {
        m,
        h,
        t,
        eps,
        beta,
        eps_tilde,
        k,
        gamma_target,
        gamma: spec.gamma(),
        kappa: spec.kappa().to_string(),
        max_abs_coeff: format_rational(&max_abs),
        low_abs_coeff_sum: format_rational(&low_sum),
        spec,
        r,
        lambda,
        nexp_bound: nexp_bound(k, m, r),
        lemma11_error: lemma11_error_bound(k, m, h, t, r),
    })
}

/// Log of the dominant exponential-count factor at one `k` for this scheme
/// and for two earlier product-formula schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub k: usize,
    /// `(γ_c + log(25/3))k + (9/4)log k + L/(4k)`.
    pub this_scheme: f64,
    /// `3.22k + L/(2k)`.
    pub exponent_3_22: f64,
    /// `2.13k + log k + L/(2k)`.
    pub exponent_2_13: f64,
}

/// Scaling comparison at `L = log(mht/ε)`.
pub fn scaling_row(k: usize, log_ratio: f64) -> ScalingRow {
    let kf = k as f64;
    ScalingRow {
        k,
        this_scheme: per_k_exponent() * kf + 2.25 * kf.ln() + log_ratio / (4.0 * kf),
        exponent_3_22: 3.22 * kf + log_ratio / (2.0 * kf),
        exponent_2_13: 2.13 * kf + kf.ln() + log_ratio / (2.0 * kf),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactcoeff::ratio_to_f64;

    fn close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * b.abs().max(1e-300)
    }

    #[test]
    fn taylor_remainder() {
        assert_eq!(taylor_remainder_bound(0.0, 3).unwrap(), 0.0);
        assert!(close(
            taylor_remainder_bound(1.0, 0).unwrap(),
            std::f64::consts::E,
            1e-14
        ));
        for s in [0.1, 0.5, 1.0] {
            for order in 1..=5usize {
                let mut partial = 0.0;
                let mut term = 1.0;
                for j in 0..=order {
                    if j > 0 {
                        term *= s / j as f64;
                    }
                    partial += term;
                }
                let actual = (f64::exp(s) - partial).abs();
                assert!(taylor_remainder_bound(s, order).unwrap() >= actual);
            }
        }
        assert!(taylor_remainder_bound(-1.0, 1).is_err());
    }

    #[test]
    fn mpf_bound_values() {
        assert_eq!(mpf_error_bound(1, 1, 1.0, 0.0).unwrap(), 0.0);
        assert!(close(
            mpf_error_bound(1, 1, 1.0, 0.1).unwrap(),
            3.2e-4,
            1e-12
        ));
        assert!(mpf_error_bound(1, 1, 1.0, 1.0).is_err());
        assert!(mpf_error_bound(0, 1, 1.0, 0.1).is_err());
    }

    #[test]
    fn inversion_bound_values() {
        assert_eq!(inversion_error_bound(1, 1, 1.0, 0.0).unwrap(), 0.0);
        assert!(close(
            inversion_error_bound(1, 1, 1.0, 0.1).unwrap(),
            6.4e-5,
            1e-12
        ));
        assert!(inversion_error_bound(1, 1, 1.0, 0.3).is_err());
    }

    #[test]
    fn choose_r_values() {
        // First branch (4)^{5/4}/(2e-7)^{1/4} = 267.496…, second 13·log 20 = 38.94….
        let r = choose_r(1, 1, 1.0, 1.0, 1e-6, 0.1).unwrap();
        let first = 4f64.powf(1.25) / 2e-7f64.powf(0.25);
        assert!((first - 267.496).abs() < 1e-3);
        assert_eq!(r, 268);

        let r_deg = choose_r(1, 1, 1.0, 1.0, 1e-6, 2.0).unwrap();
        assert_eq!(r_deg, first.ceil() as u64);

        let a = 4.0f64.powf(1.25) / (1e-6f64 / 5.0).powf(0.25);
        let b = 8.0f64.powf(1.25) / (1e-6f64 / 5.0).powf(0.25);
        assert!(close(b / a, 2f64.powf(1.25), 1e-12));
        assert_eq!(
            choose_r(1, 1, 1.0, 2.0, 1e-6, 2.0).unwrap(),
            b.ceil() as u64
        );

        assert!(choose_r(2, 1, 1.0, 1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn choose_r_meets_the_error_target() {
        for (k, m, h, t, eps) in [
            (1, 1, 1.0, 1.0, 1e-6),
            (2, 2, 1.0, 1.0, 1e-6),
            (2, 3, 0.5, 10.0, 1e-4),
            (3, 2, 1.0, 5.0, 1e-9),
        ] {
            let eps = eps_tilde_ceiling(k, m, h, t).min(eps);
            let r = choose_r(k, m, h, t, eps, 0.1).unwrap();
            assert!(lemma11_error_bound(k, m, h, t, r) <= eps);
            assert!(r as f64 >= 13.0 * 20f64.ln());
        }
    }

    #[test]
    fn k_opt_values() {
        assert_eq!(k_opt_from_log(100.0), 4);
        assert!((k_opt_coefficient() - 0.3142).abs() < 5e-4);
        assert!((k_opt_coefficient() - 0.314_246_037_738_959_3).abs() < 1e-12);
        assert_eq!(choose_k_opt(1, 1.0, 1.0, 0.999_999).unwrap(), 1);
        assert_eq!(choose_k_opt(1, 1.0, 1.0, 2.0).unwrap(), 1);
        let eps = (-100f64).exp();
        assert_eq!(choose_k_opt(1, 1.0, 1.0, eps).unwrap(), 4);
    }

    #[test]
    fn k_opt_is_a_near_minimizer() {
        // The ceiling of the continuous minimizer is the integer minimizer or its successor.
        for log_ratio in [10.0, 37.5, 100.0, 400.0] {
            let k_opt = k_opt_from_log(log_ratio);
            let best = (1..=2 * k_opt)
                .min_by(|&a, &b| {
                    dominant_log_factor(a, log_ratio)
                        .partial_cmp(&dominant_log_factor(b, log_ratio))
                        .unwrap()
                })
                .unwrap();
            assert!(
                k_opt == best || k_opt == best + 1,
                "L={log_ratio}: {k_opt} vs {best}"
            );
            assert!(
                dominant_log_factor(k_opt, log_ratio) - dominant_log_factor(best, log_ratio)
                    < per_k_exponent()
            );
        }
    }

    #[test]
    fn envelope() {
        for log_ratio in [25.0f64, 50.0, 100.0] {
            let k = k_opt_from_log(log_ratio);
            let gap = dominant_log_factor(k, log_ratio) - 1.6 * log_ratio.sqrt();
            assert!(gap.abs() < 2f64.ln(), "L={log_ratio}: gap {gap}");
        }
    }

    #[test]
    fn nexp_values() {
        assert_eq!(nexp_bound(1, 1, 1), 1509);
        assert!((nexp_bound(1, 1, 1) as i64 - 1510).abs() <= 2);
        let base = 1000.0 * gamma_critical().exp();
        assert_eq!(nexp_bound(1, 3, 7), (base * 21.0).ceil() as u64);
        assert_eq!(nexp_bound(40, 1000, u64::MAX), u64::MAX);
    }

    #[test]
    fn delta_bound() {
        let b = delta_remainder_bound(1, 1, 1.0, 1.0, 100).unwrap();
        let x: f64 = 4.0 / 300.0;
        assert!(close(b, 4.0 * x.powi(3) / 6.0, 1e-12));
        assert!(delta_remainder_bound(1, 1, 1.0, 100.0, 1).is_err());
    }

    #[test]
    fn plan_examples() {
        let p = build_plan(1, 1.0, 1.0, 0.5, 0.5).unwrap();
        assert_eq!(p.k, 1);
        assert_eq!(p.eps_tilde, 0.5);
        assert!(p.lemma11_error <= p.eps_tilde);
        assert!(p.r as f64 >= 13.0 * (2.0f64 / 0.5).ln());

        let p = build_plan(2, 1.0, 1.0, 1e-6, 0.1).unwrap();
        assert_eq!(p.k, 2);
        assert_eq!(p.spec.ells(), &[1, 2, 78]);
        assert_eq!(p.eps_tilde, 1e-6);
        assert!(p.lemma11_error <= p.eps_tilde);
        assert!(ratio_to_f64(&p.spec.coeffs()[2]) <= 2.0);
        let json = serde_json::to_string(&p).unwrap();
        let back: CostPlan = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);

        assert!(build_plan(1, 1.0, 1.0, 0.0, 0.5).is_err());
        assert!(build_plan(1, 1.0, 1.0, 0.5, 1.5).is_err());
    }

    #[test]
    fn plan_coefficient_conditions() {
        for log_eps in [2, 6, 12, 30] {
            let p = build_plan(2, 1.0, 3.0, 10f64.powi(-log_eps), 0.05).unwrap();
            let sum: f64 = p.spec.coeffs()[..p.k]
                .iter()
                .map(|c| ratio_to_f64(c).abs())
                .sum();
            assert!(sum <= 1.0);
            assert!(p.spec.coeffs().iter().all(|c| ratio_to_f64(c).abs() <= 2.0));
        }
    }

    #[test]
    fn scaling_comparison() {
        for k in 1..=10 {
            let row = scaling_row(k, 0.0);
            assert!(per_k_exponent() < 3.22);
            assert!(row.this_scheme - 2.25 * (k as f64).ln() < row.exponent_3_22);
        }
        assert!((per_k_exponent() - 2.5317).abs() < 1e-3);
    }
}
