use anyhow::{Context, Result};
use clap::Args;
use lculab::costmodel::{
    build_plan, k_opt_coefficient, k_opt_from_log, per_k_exponent, scaling_row,
};

use crate::report::{positive, OutputArgs, Report};

/// Per-k exponent of the earlier scheme the comparison table is held against.
pub const COMPARISON_EXPONENT: f64 = 3.22;

#[derive(Args, Debug, Clone)]
pub struct CostArgs {
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Largest k in the comparison table.
    #[arg(long, default_value_t = 8, value_parser = positive)]
    pub k_max: usize,
    /// Evaluate the table (and k_opt) at this log(mht/ε̃) instead of the plan's.
    #[arg(long)]
    pub log_ratio: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn run(args: &CostArgs) -> Result<Report> {
    let plan = build_plan(args.m, args.h, args.t, args.eps, args.beta)?;
    let mut report = Report::default();
    report.line(format!("k_opt coefficient = {:.4}", k_opt_coefficient()));
    report.line(format!(
        "plan: k = {}, ells = {:?}, kappa = {}, eps_tilde = {:.4e}, r = {}, lambda = {:.6e}",
        plan.k,
        plan.spec.ells(),
        plan.kappa,
        plan.eps_tilde,
        plan.r,
        plan.lambda
    ));
    report.line(format!(
        "N_exp bound = {}, error bound with full budget = {:.4e}",
        plan.nexp_bound, plan.lemma11_error
    ));
    let log_ratio = args
        .log_ratio
        .unwrap_or_else(|| (args.m as f64 * args.h * args.t / plan.eps_tilde).ln());
    report.line(format!(
        "k_opt at log(mht/eps_tilde) = {log_ratio}: {}",
        k_opt_from_log(log_ratio)
    ));
    report.line(format!(
        "{:>3}  {:>14}  {:>14}  {:>14}",
        "k", "this scheme", "3.22k + L/2k", "2.13k + ..."
    ));
    for k in 1..=args.k_max {
        let row = scaling_row(k, log_ratio);
        report.line(format!(
            "{:>3}  {:>14.4}  {:>14.4}  {:>14.4}",
            k, row.this_scheme, row.exponent_3_22, row.exponent_2_13
        ));
    }
    let e = per_k_exponent();
    report.check(
        "per-k exponent below comparison",
        e < COMPARISON_EXPONENT,
        format!("{e:.4} < {COMPARISON_EXPONENT}"),
    );

    let json = serde_json::to_string_pretty(&plan)?;
    match &args.output.out {
        Some(path) => {
            std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
            report.line(format!("wrote plan to {}", path.display()));
        }
        None => report.line(json),
    }
    Ok(report)
}
