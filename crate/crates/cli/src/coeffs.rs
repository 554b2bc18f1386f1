use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use lculab::exactcoeff::{
    coefficients_for_order, cq_upper_bound, format_rational, kappa_lower_bound, ratio_to_f64,
};
use lculab::{build_mpf_spec, choose_gamma, verify_order_conditions, MpfSpec};
use num_traits::Signed;

use crate::report::{emit, num, positive, OutputArgs, Report, Table};

#[derive(Args, Debug, Clone)]
pub struct CoeffsArgs {
    #[arg(long, value_parser = positive)]
    pub k: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub chi: usize,
    /// Growth parameter; ℓ_{k+1} = ⌈e^{γ(k+1)}⌉.
    #[arg(long, conflicts_with_all = ["delta", "ells"])]
    pub gamma: Option<f64>,
    /// Target subtraction failure probability; sets γ. Default 0.5.
    #[arg(long, conflicts_with = "ells")]
    pub delta: Option<f64>,
    /// Explicit repetition numbers, k+1 of them.
    #[arg(long, value_delimiter = ',')]
    pub ells: Option<Vec<u64>>,
    /// Also write the spec as JSON, for use in a `trials` config.
    #[arg(long)]
    pub spec_json: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// The spec selected by the flags, shared with `optimal`.
pub fn resolve_spec(
    k: usize,
    chi: usize,
    gamma: Option<f64>,
    delta: Option<f64>,
    ells: Option<&[u64]>,
) -> Result<MpfSpec> {
    if let Some(ells) = ells {
        if ells.len() != k + 1 {
            bail!("--ells needs k + 1 = {} values, got {}", k + 1, ells.len());
        }
        let coeffs = coefficients_for_order(ells, chi)?;
        return Ok(MpfSpec::custom(chi, ells.to_vec(), coeffs)?);
    }
    let gamma = match gamma {
        Some(g) => g,
        None => choose_gamma(k, delta.unwrap_or(0.5))?,
    };
    Ok(build_mpf_spec(k, chi, gamma)?)
}

pub fn run(args: &CoeffsArgs) -> Result<Report> {
    let spec = resolve_spec(
        args.k,
        args.chi,
        args.gamma,
        args.delta,
        args.ells.as_deref(),
    )?;
    let mut report = Report::default();
    report.line(format!(
        "k = {}, chi = {}, gamma = {:.6}",
        spec.k(),
        spec.chi(),
        spec.gamma()
    ));
    let mut table = Table::new(&["q", "ell", "coeff", "coeff_decimal"]);
    report.line(format!(
        "{:>3}  {:>12}  {:>28}  {:>24}",
        "q", "ell_q", "C_q", "decimal"
    ));
    for (q, (ell, c)) in spec.ells().iter().zip(spec.coeffs()).enumerate() {
        let (exact, dec) = (format_rational(c), ratio_to_f64(c));
        report.line(format!(
            "{:>3}  {:>12}  {:>28}  {:>24.16e}",
            q + 1,
            ell,
            exact,
            dec
        ));
        table.push(vec![(q + 1).to_string(), ell.to_string(), exact, num(dec)]);
    }
    let kappa = spec.kappa();
    report.line(format!("kappa = {kappa} ≈ {:.6}", kappa.to_f64()));

    let verified = verify_order_conditions(&spec);
    report.check(
        "order conditions",
        verified,
        if verified {
            "all residuals exactly zero"
        } else {
            "non-zero residual"
        },
    );

    // The bounds are stated for the χ = 1 coefficients on levels 1, …, k, ℓ_{k+1}.
    let standard_levels = spec.ells()[..spec.k()]
        .iter()
        .enumerate()
        .all(|(i, &l)| l == i as u64 + 1);
    if spec.chi() == 1 && standard_levels {
        let k = spec.k();
        if let (Ok(kappa_lb), Ok(cq_ub)) = (
            kappa_lower_bound(k, spec.gamma()),
            cq_upper_bound(k, spec.gamma()),
        ) {
            let kf = kappa.to_f64();
            report.check(
                "kappa lower bound",
                kf >= kappa_lb,
                format!("kappa = {kf:.6e}, bound {kappa_lb:.6e}"),
            );
            let max_low = spec.coeffs()[..k]
                .iter()
                .map(|c| ratio_to_f64(&c.abs()))
                .fold(0.0, f64::max);
            report.check(
                "coefficient upper bound",
                max_low <= cq_ub,
                format!("max_(q<=k) |C_q| = {max_low:.6e}, bound {cq_ub:.6e}"),
            );
            if let Some(delta) = args.delta {
                let p = 4.0 / kf;
                report.check(
                    "subtraction failure target",
                    p <= delta,
                    format!("4/kappa = {p:.6e}, delta = {delta}"),
                );
            }
        } else {
            report.line("bounds: 2k² ≤ e^(2γ(k+1)) fails, not evaluated");
        }
    }

    emit(&table, &args.output, &mut report)?;
    if let Some(path) = &args.spec_json {
        let text = serde_json::to_string_pretty(&spec)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        report.line(format!("wrote spec to {}", path.display()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(k: usize) -> CoeffsArgs {
        CoeffsArgs {
            k,
            chi: 1,
            gamma: None,
            delta: None,
            ells: None,
            spec_json: None,
            output: OutputArgs::default(),
        }
    }

    #[test]
    fn richardson_from_gamma() {
        let mut a = args(1);
        a.gamma = Some(0.3466);
        let r = run(&a).unwrap();
        let text = r.render();
        assert!(text.contains("-1/3"), "{text}");
        assert!(text.contains("4/3"));
        assert!(text.contains("kappa = 4/1 "));
        assert!(r.passed());
    }

    #[test]
    fn explicit_levels_must_match_k() {
        let mut a = args(2);
        a.ells = Some(vec![1, 2]);
        assert!(run(&a).is_err());
    }

    #[test]
    fn delta_target_is_met() {
        let mut a = args(2);
        a.delta = Some(0.5);
        let r = run(&a).unwrap();
        assert!(r
            .checks
            .iter()
            .any(|c| c.name == "kappa lower bound" && c.passed));
        assert!(r.passed(), "{}", r.render());
    }
}
