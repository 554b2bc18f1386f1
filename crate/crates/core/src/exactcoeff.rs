//! Exact-rational multi-product formula coefficients.
//!
//! A multi-product formula combines `k + 1` powers of a symmetric product
//! formula, `M(t) = Σ_q C_q S_χ(t/ℓ_q)^{ℓ_q}`, with repetition numbers
//! `ℓ_q = q` for `q ≤ k` and one large level `ℓ_{k+1} = e^{γ(k+1)}`. The
//! coefficients solve a generalized Vandermonde system that loses all
//! precision in doubles beyond a handful of terms, so everything here is
//! computed with arbitrary-precision rationals. Floating point only enters
//! through [`MpfSpec::coeffs_f64`] at the circuit boundary.
//!
//! The κ/γ machinery (growth threshold `γ_c`, the coefficient and κ bounds)
//! lives here as well since it is stated in terms of the same coefficients.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, LabError, Result};

/// Relative distance below which `e^{γ(k+1)}` snaps to the nearest integer
/// instead of being rounded up. Absorbs γ values quoted to four or five digits
/// (e.g. `0.3466` for `log(2)/2`).
pub const LEVEL_SNAP_RTOL: f64 = 1e-4;

/// Largest repetition number accepted; keeps `ℓ` exactly representable as `f64`.
pub const MAX_LEVEL: u64 = 1 << 53;

/// Ratio of positive to negative coefficient mass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kappa {
    Finite(BigRational),
    /// No negative coefficients.
    Infinite,
}

impl Kappa {
    pub fn to_f64(&self) -> f64 {
        match self {
            Kappa::Finite(r) => ratio_to_f64(r),
            Kappa::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Kappa::Infinite)
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Finite(r) => write!(f, "{}", format_rational(r)),
            Kappa::Infinite => write!(f, "inf"),
        }
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `num/den`, always with an explicit denominator.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim()).map_err(|e| invalid(format!("bad rational {s:?}: {e}")))
}

/// A multi-product formula: repetition numbers and exact coefficients.
///
/// Every value of this type has distinct positive `ells`, one coefficient per
/// level, and coefficients summing to exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct MpfSpec {
    k: usize,
    chi: usize,
    gamma: f64,
    ells: Vec<u64>,
    coeffs: Vec<BigRational>,
}

impl MpfSpec {
    /// Builds a spec from explicit levels and coefficients.
    pub fn custom(chi: usize, ells: Vec<u64>, coeffs: Vec<BigRational>) -> Result<Self> {
        if chi == 0 {
            return Err(invalid("chi must be at least 1"));
        }
        validate_levels(&ells)?;
        if coeffs.len() != ells.len() {
            return Err(LabError::DimensionMismatch {
                expected: ells.len(),
                found: coeffs.len(),
            });
        }
        let total: BigRational = coeffs.iter().sum();
        if !total.is_one() {
            return Err(invalid(format!(
                "coefficients must sum to 1, got {}",
                format_rational(&total)
            )));
        }
        let k = ells.len() - 1;
        let top = *ells.last().expect("non-empty");
        Ok(Self {
            k,
            chi,
            gamma: (top as f64).ln() / (k + 1) as f64,
            ells,
            coeffs,
        })
    }

    /// The single-term formula `M = S_χ` (k = 0).
    pub fn trivial(chi: usize) -> Result<Self> {
        Self::custom(chi, vec![1], vec![BigRational::one()])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    /// Realized γ, `log(ℓ_{k+1})/(k+1)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ells(&self) -> &[u64] {
        &self.ells
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(ratio_to_f64).collect()
    }

    pub fn n_terms(&self) -> usize {
        self.ells.len()
    }

    pub fn kappa(&self) -> Kappa {
        kappa(&self.coeffs).expect("coefficients sum to one")
    }

    pub fn is_all_positive(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_positive())
    }

    /// `Σ_q |C_q|`.
    pub fn abs_sum(&self) -> BigRational {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRecord {
    k: usize,
    chi: usize,
    gamma: f64,
    ells: Vec<u64>,
    coeffs: Vec<String>,
}

impl From<MpfSpec> for SpecRecord {
    fn from(s: MpfSpec) -> Self {
        SpecRecord {
            k: s.k,
            chi: s.chi,
            gamma: s.gamma,
            coeffs: s.coeffs.iter().map(format_rational).collect(),
            ells: s.ells,
        }
    }
}

impl TryFrom<SpecRecord> for MpfSpec {
    type Error = LabError;

    fn try_from(r: SpecRecord) -> Result<Self> {
        let coeffs = r
            .coeffs
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let spec = MpfSpec::custom(r.chi, r.ells, coeffs)?;
        if spec.k != r.k {
            return Err(invalid(format!(
                "k = {} but {} levels given",
                r.k,
                spec.n_terms()
            )));
        }
        Ok(spec)
    }
}

fn validate_levels(ells: &[u64]) -> Result<()> {
    if ells.is_empty() {
        return Err(invalid("repetition numbers must be non-empty"));
    }
    for (i, &l) in ells.iter().enumerate() {
        if l == 0 {
            return Err(invalid("repetition numbers must be at least 1"));
        }
        if l > MAX_LEVEL {
            return Err(invalid(format!(
                "repetition number {l} exceeds {MAX_LEVEL}"
            )));
        }
        if ells[..i].contains(&l) {
            return Err(invalid(format!("duplicate repetition number {l}")));
        }
    }
    Ok(())
}

fn big(n: u64) -> BigInt {
    BigInt::from(n)
}

/// `C_q = Π_{j≠q} ℓ_q²/(ℓ_q² − ℓ_j²)`, the χ = 1 closed form.
pub fn coefficients_general(ells: &[u64]) -> Result<Vec<BigRational>> {
    validate_levels(ells)?;
    let squares: Vec<BigInt> = ells.iter().map(|&l| big(l) * big(l)).collect();
    Ok(squares
        .iter()
        .enumerate()
        .map(|(q, lq2)| {
            squares
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != q)
                .fold(BigRational::one(), |acc, (_, lj2)| {
                    acc * BigRational::new(lq2.clone(), lq2 - lj2)
                })
        })
        .collect())
}

/// Coefficients cancelling the error terms of an order-`2χ` symmetric formula.
///
/// The solution of the order conditions for base order `2χ` is the χ = 1
/// closed form reweighted by `ℓ_q^{2(χ−1)}` and renormalized to unit sum. For
/// χ = 1 this is exactly [`coefficients_general`].
pub fn coefficients_for_order(ells: &[u64], chi: usize) -> Result<Vec<BigRational>> {
    if chi == 0 {
        return Err(invalid("chi must be at least 1"));
    }
    let base = coefficients_general(ells)?;
    if chi == 1 {
        return Ok(base);
    }
    let exp = 2 * (chi as u32 - 1);
    let weighted: Vec<BigRational> = base
        .into_iter()
        .zip(ells)
        .map(|(c, &l)| c * BigRational::from_integer(num_traits::pow(big(l), exp as usize)))
        .collect();
    let total: BigRational = weighted.iter().sum();
    if total.is_zero() {
        return Err(domain("order conditions are singular for these levels"));
    }
    Ok(weighted.into_iter().map(|c| c / &total).collect())
}

/// Rows of the generalized Vandermonde system: all ones, then
/// `ℓ_q^{−2χ−2(i−2)}` for `i = 2..=k+1`.
fn order_matrix(ells: &[u64], chi: usize) -> Vec<Vec<BigRational>> {
    let n = ells.len();
    let mut rows = vec![vec![BigRational::one(); n]];
    for i in 0..n.saturating_sub(1) {
        let power = 2 * chi + 2 * i;
        rows.push(
            ells.iter()
                .map(|&l| BigRational::new(BigInt::one(), num_traits::pow(big(l), power)))
                .collect(),
        );
    }
    rows
}

/// Solves the order-condition system `V·C = e₁` by exact Gaussian elimination.
pub fn solve_order_system(ells: &[u64], chi: usize) -> Result<Vec<BigRational>> {
    if chi == 0 {
        return Err(invalid("chi must be at least 1"));
    }
    validate_levels(ells)?;
    let n = ells.len();
    let mut a = order_matrix(ells, chi);
    let mut rhs = vec![BigRational::zero(); n];
    rhs[0] = BigRational::one();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| domain("singular order-condition matrix"))?;
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let pivot_row = a[col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &pivot_row[col];
            for (x, y) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &f * y;
            }
            let delta = &f * &rhs[col];
            rhs[r] -= delta;
        }
    }
    Ok((0..n).map(|i| &rhs[i] / &a[i][i]).collect())
}

/// `V·C − e₁` for the order conditions of `spec`; all zero iff they hold.
pub fn order_condition_residuals(spec: &MpfSpec) -> Vec<BigRational> {
    order_matrix(&spec.ells, spec.chi)
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let dot: BigRational = row.iter().zip(&spec.coeffs).map(|(v, c)| v * c).sum();
            if i == 0 {
                dot - BigRational::one()
            } else {
                dot
            }
        })
        .collect()
}

pub fn verify_order_conditions(spec: &MpfSpec) -> bool {
    order_condition_residuals(spec).iter().all(Zero::is_zero)
}

/// Realizes `ℓ_{k+1}` from `e^{exponent}`: rounds up, snapping to a nearby
/// integer within [`LEVEL_SNAP_RTOL`].
pub fn realize_level(exponent: f64) -> Result<u64> {
    let x = exponent.exp();
    if !x.is_finite() || x > MAX_LEVEL as f64 {
        return Err(domain(format!(
            "e^{exponent} is too large for a repetition number"
        )));
    }
    let nearest = x.round();
    let level = if nearest >= 1.0 && (x - nearest).abs() <= LEVEL_SNAP_RTOL * x {
        nearest
    } else {
        x.ceil()
    };
    Ok(level.max(1.0) as u64)
}

/// Builds the formula with `ℓ_q = q` for `q ≤ k` and `ℓ_{k+1} = ⌈e^{γ(k+1)}⌉`.
///
/// The stored γ is the realized `log(ℓ_{k+1})/(k+1)`, which makes
/// `e^{γ(k+1)}` an integer. Coefficients are the exact solution of the order
/// conditions for base order `2χ`.
pub fn build_mpf_spec(k: usize, chi: usize, gamma_target: f64) -> Result<MpfSpec> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if chi == 0 {
        return Err(invalid("chi must be at least 1"));
    }
    if !(gamma_target.is_finite() && gamma_target > 0.0) {
        return Err(invalid(format!(
            "gamma must be positive, got {gamma_target}"
        )));
    }
    let level = realize_level(gamma_target * (k + 1) as f64)?;
    if level <= k as u64 {
        return Err(LabError::DegenerateFormula { k, level });
    }
    let ells: Vec<u64> = (1..=k as u64).chain(std::iter::once(level)).collect();
    let coeffs = coefficients_for_order(&ells, chi)?;
    Ok(MpfSpec {
        k,
        chi,
        gamma: (level as f64).ln() / (k + 1) as f64,
        ells,
        coeffs,
    })
}

/// `Σ₊/Σ₋` over the coefficients.
pub fn kappa(coeffs: &[BigRational]) -> Result<Kappa> {
    if coeffs.is_empty() {
        return Err(invalid("kappa of an empty coefficient list"));
    }
    if coeffs.iter().all(Zero::is_zero) {
        return Err(invalid("kappa of all-zero coefficients"));
    }
    let pos: BigRational = coeffs.iter().filter(|c| c.is_positive()).sum();
    let neg: BigRational = coeffs
        .iter()
        .filter(|c| c.is_negative())
        .map(|c| c.abs())
        .sum();
    if neg.is_zero() {
        Ok(Kappa::Infinite)
    } else {
        Ok(Kappa::Finite(pos / neg))
    }
}

/// `λ² / ((1+λ)^{1+λ} (1−λ)^{1−λ})`.
pub fn eta_objective(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    lambda * lambda / ((1.0 + lambda).powf(1.0 + lambda) * (1.0 - lambda).powf(1.0 - lambda))
}

/// Derivative of `log eta_objective`; strictly decreasing on (0, 1).
fn eta_log_derivative(lambda: f64) -> f64 {
    2.0 / lambda - ((1.0 + lambda) / (1.0 - lambda)).ln()
}

/// Location and value of the maximum of [`eta_objective`] on `[0, 1)`.
///
/// Golden-section search brackets the maximizer; the bracket is then refined
/// to `1e-12` by bisection on the log-derivative, which unlike the flat
/// objective stays well conditioned near the peak.
pub fn eta_maximizer() -> (f64, f64) {
    static CELL: OnceLock<(f64, f64)> = OnceLock::new();
    *CELL.get_or_init(|| {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        while b - a > 1e-6 {
            let c = b - inv_phi * (b - a);
            let d = a + inv_phi * (b - a);
            if eta_objective(c) > eta_objective(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let (mut lo, mut hi) = ((a - 1e-6).max(1e-9), (b + 1e-6).min(1.0 - 1e-9));
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if eta_log_derivative(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        (x, eta_objective(x))
    })
}

/// η ≈ 0.3081.
pub fn eta_constant() -> f64 {
    eta_maximizer().1
}

/// `γ_c = 1 + log(η)/2`, the threshold between exponential growth and decay of κ.
pub fn gamma_critical() -> f64 {
    1.0 + eta_constant().ln() / 2.0
}

/// Smallest γ guaranteeing a subtraction failure probability of at most `delta`.
pub fn choose_gamma(k: usize, delta: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    let k = k as f64;
    Ok(gamma_critical() + ((2.0 * k).powf(2.5) / delta).ln() / (2.0 * k))
}

fn check_growth_precondition(k: usize, gamma: f64) -> Result<()> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let k_f = k as f64;
    // 2k² ≤ e^{2γ(k+1)}, compared in log space.
    if (2.0 * k_f * k_f).ln() > 2.0 * gamma * (k_f + 1.0) {
        return Err(domain(format!(
            "requires 2k² ≤ e^(2γ(k+1)); k = {k}, γ = {gamma}"
        )));
    }
    Ok(())
}

/// Upper bound on `max_{q≤k} |C_q|`: `√2 k^{3/2} e^{2k(γ_c − γ)}`.
pub fn cq_upper_bound(k: usize, gamma: f64) -> Result<f64> {
    check_growth_precondition(k, gamma)?;
    let k = k as f64;
    Ok(2f64.sqrt() * k.powf(1.5) * (2.0 * k * (gamma_critical() - gamma)).exp())
}

/// Lower bound on κ: `2^{−1/2} k^{−5/2} e^{−2k(γ_c − γ)}`.
pub fn kappa_lower_bound(k: usize, gamma: f64) -> Result<f64> {
    check_growth_precondition(k, gamma)?;
    let k = k as f64;
    Ok((-2.0 * k * (gamma_critical() - gamma)).exp() / (2f64.sqrt() * k.powf(2.5)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn richardson_coefficients() {
        assert_eq!(
            coefficients_general(&[1, 2]).unwrap(),
            vec![r(-1, 3), r(4, 3)]
        );
        assert_eq!(coefficients_general(&[1]).unwrap(), vec![r(1, 1)]);
        assert_eq!(
            coefficients_general(&[1, 4]).unwrap(),
            vec![r(-1, 15), r(16, 15)]
        );
    }

    #[test]
    fn duplicate_levels_rejected() {
        assert!(matches!(
            coefficients_general(&[1, 2, 2]),
            Err(LabError::InvalidInput(_))
        ));
        assert!(coefficients_general(&[]).is_err());
        assert!(coefficients_general(&[0, 1]).is_err());
    }

    #[test]
    fn build_from_gamma() {
        let s = build_mpf_spec(1, 1, 4f64.ln() / 2.0).unwrap();
        assert_eq!(s.ells(), &[1, 4]);
        assert_eq!(s.coeffs(), &[r(-1, 15), r(16, 15)]);
        let s = build_mpf_spec(1, 1, 2f64.ln() / 2.0).unwrap();
        assert_eq!(s.ells(), &[1, 2]);
        assert_eq!(s.coeffs(), &[r(-1, 3), r(4, 3)]);
        assert!((s.gamma() - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn quoted_gamma_snaps_to_integer_level() {
        let s = build_mpf_spec(1, 1, 0.3466).unwrap();
        assert_eq!(s.ells(), &[1, 2]);
    }

    #[test]
    fn degenerate_level_is_an_error() {
        // e^{0.1·3} ≈ 1.35 → ℓ₃ = 2, collides with ℓ₂.
        assert_eq!(
            build_mpf_spec(2, 1, 0.1),
            Err(LabError::DegenerateFormula { k: 2, level: 2 })
        );
        assert!(build_mpf_spec(0, 1, 1.0).is_err());
        assert!(build_mpf_spec(1, 0, 1.0).is_err());
        assert!(build_mpf_spec(1, 1, -1.0).is_err());
    }

    #[test]
    fn k2_sums_to_one() {
        // ℓ₃ = 9 at γ = log(9)/3.
        let s = build_mpf_spec(2, 1, 9f64.ln() / 3.0).unwrap();
        assert_eq!(s.ells(), &[1, 2, 9]);
        let total: BigRational = s.coeffs().iter().sum();
        assert!(total.is_one());
    }

    #[test]
    fn order_conditions() {
        let s = build_mpf_spec(1, 1, 4f64.ln() / 2.0).unwrap();
        assert!(verify_order_conditions(&s));
        let bad = MpfSpec::custom(1, vec![1, 2], vec![r(1, 2), r(1, 2)]).unwrap();
        assert!(!verify_order_conditions(&bad));
        let g = choose_gamma(3, 0.5).unwrap();
        assert!(verify_order_conditions(&build_mpf_spec(3, 3, g).unwrap()));
    }

    #[test]
    fn chi_one_coefficients_fail_higher_order_conditions() {
        let s = MpfSpec::custom(2, vec![1, 2], coefficients_general(&[1, 2]).unwrap()).unwrap();
        assert!(!verify_order_conditions(&s));
        let fixed = build_mpf_spec(1, 2, 2f64.ln() / 2.0).unwrap();
        // ℓ^{2}-reweighted Richardson: (−1·1, 4·4)/3 normalized → (−1/15, 16/15).
        assert_eq!(fixed.coeffs(), &[r(-1, 15), r(16, 15)]);
        assert!(verify_order_conditions(&fixed));
    }

    #[test]
    fn gaussian_elimination_matches_closed_form() {
        for chi in 1..=4 {
            let ells = [1, 2, 3, 17];
            assert_eq!(
                solve_order_system(&ells, chi).unwrap(),
                coefficients_for_order(&ells, chi).unwrap()
            );
        }
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(&[r(-1, 3), r(4, 3)]).unwrap(), Kappa::Finite(r(4, 1)));
        assert_eq!(kappa(&[r(1, 2), r(1, 2)]).unwrap(), Kappa::Infinite);
        assert_eq!(
            kappa(&[r(-1, 15), r(16, 15)]).unwrap(),
            Kappa::Finite(r(16, 1))
        );
        assert!(kappa(&[r(0, 1), r(0, 1)]).is_err());
        assert!(kappa(&[]).is_err());
        assert_eq!(Kappa::Infinite.to_f64(), f64::INFINITY);
    }

    #[test]
    fn eta_value_and_maximizer() {
        let (x, eta) = eta_maximizer();
        assert!((eta - 0.3081).abs() < 1e-3);
        // Independent high-precision root of λ·artanh(λ) = 1.
        assert!((x - 0.833_556_559_600_964_7).abs() < 1e-11);
        assert!((eta - 0.308_120_211_938_512_8).abs() < 1e-15);
        assert_eq!(eta_objective(0.0), 0.0);
        assert!(eta_log_derivative(x).abs() < 1e-10);
    }

    #[test]
    fn eta_grid_scan_agrees() {
        let (x, eta) = eta_maximizer();
        let (mut best_x, mut best) = (0.0, 0.0);
        for i in 0..1_000_000u32 {
            let l = i as f64 * 1e-6;
            let v = eta_objective(l);
            if v > best {
                best = v;
                best_x = l;
            }
        }
        assert!((best_x - x).abs() <= 1e-6);
        assert!(best <= eta + 1e-15 && eta - best < 1e-12);
    }

    #[test]
    fn choose_gamma_values() {
        assert!((choose_gamma(1, 0.5).unwrap() - 1.624_374_929_153_131_7).abs() < 1e-12);
        assert!((choose_gamma(1, 0.5).unwrap() - 1.6243).abs() < 1e-3);
        assert!((gamma_critical() - 0.411_367_363_173_227_4).abs() < 1e-13);
        assert!(choose_gamma(1, 0.0).is_err());
        assert!(choose_gamma(1, 1.5).is_err());
        assert!(choose_gamma(0, 0.5).is_err());
        // Large k approaches γ_c.
        let g = choose_gamma(1_000_000, 1.0).unwrap();
        assert!((g - 0.4114).abs() < 1e-3);
        for k in 1..=50 {
            let g = choose_gamma(k, 1.0).unwrap();
            let kf = k as f64;
            assert!(kf * kf * (-2.0 * g * (kf + 1.0)).exp() <= 0.5);
        }
    }

    #[test]
    fn cq_bound_dominates_exact() {
        let g = choose_gamma(1, 0.5).unwrap();
        let s = build_mpf_spec(1, 1, g).unwrap();
        let c1 = ratio_to_f64(&s.coeffs()[0].abs());
        assert!(cq_upper_bound(1, s.gamma()).unwrap() >= c1);

        let s = build_mpf_spec(3, 1, gamma_critical() + 0.1).unwrap();
        let max_c = s.coeffs()[..3]
            .iter()
            .map(|c| ratio_to_f64(&c.abs()))
            .fold(0.0, f64::max);
        assert!(cq_upper_bound(3, s.gamma()).unwrap() >= max_c);

        let b1 = cq_upper_bound(4, 1.0).unwrap();
        let b2 = cq_upper_bound(4, 1.2).unwrap();
        assert!(b2 < b1);
        assert!(matches!(cq_upper_bound(4, 0.1), Err(LabError::Domain(_))));
    }

    #[test]
    fn kappa_bound_examples() {
        let s = build_mpf_spec(1, 1, 1.6243).unwrap();
        assert!(kappa_lower_bound(1, s.gamma()).unwrap() <= s.kappa().to_f64());

        let gc = gamma_critical();
        for k in [1usize, 3, 8] {
            if let Ok(b) = kappa_lower_bound(k, gc) {
                let expect = 1.0 / (2f64.sqrt() * (k as f64).powf(2.5));
                assert!((b - expect).abs() < 1e-15 * expect.max(1.0));
            }
        }
        let b8 = kappa_lower_bound(8, gc + 0.05).unwrap();
        let b4 = kappa_lower_bound(4, gc + 0.05).unwrap();
        let ratio = b8 / b4;
        let expect = (0.1f64 * 4.0).exp() * (0.5f64).powf(2.5);
        assert!((ratio - expect).abs() < 1e-12);
        assert!(kappa_lower_bound(8, 0.1).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = build_mpf_spec(2, 2, 1.3).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: MpfSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = json.replace("\"k\":2", "\"k\":5");
        assert!(serde_json::from_str::<MpfSpec>(&bad).is_err());
    }
}
