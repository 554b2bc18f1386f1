use anyhow::{bail, Result};
use clap::Args;
use lculab::costmodel::{mpf_bound_max_h_lambda, mpf_error_bound};
use lculab::exactcoeff::ratio_to_f64;
use lculab::numerics::{
    assemble_mpf_matrix, exact_evolution, log_grid, random_term_list, spectral_norm,
    unitarity_defect, windowed_slope, FIT_WINDOW,
};
use lculab::MpfSpec;
use num_traits::Signed;

use crate::coeffs::resolve_spec;
use crate::report::{emit, num, opt_num, positive, OutputArgs, Report, Table};

/// Accepted deviation of the fitted error slope from `2(k+χ)+1`.
pub const ERROR_SLOPE_TOL: f64 = 0.3;
/// Expected unitarity-defect slope of the Richardson formula, and its tolerance.
pub const RICHARDSON_UNITARITY_SLOPE: f64 = 10.0;
pub const UNITARITY_SLOPE_TOL: f64 = 0.5;

#[derive(Args, Debug, Clone)]
pub struct OrderScanArgs {
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub k: usize,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub chi: usize,
    /// Growth parameter; by default the levels are 1, …, k+1.
    #[arg(long, conflicts_with = "delta")]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Seed of the random Hamiltonian.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub n_qubits: usize,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 120)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub lambda: f64,
    /// `‖M(λ) − U(λ)‖`.
    pub error: f64,
    /// `‖M(λ)†M(λ) − I‖`.
    pub unitarity: f64,
    /// Error bound where its preconditions hold.
    pub bound: Option<f64>,
}

/// Whether the error bound applies: `χ = k` and every `|C_q| ≤ 2`.
pub fn bound_applies(spec: &MpfSpec) -> bool {
    let two = lculab::BigRational::from_integer(2.into());
    spec.chi() == spec.k() && spec.coeffs().iter().all(|c| c.abs() <= two)
}

pub fn scan_rows(
    spec: &MpfSpec,
    terms: &lculab::TermList,
    lambdas: &[f64],
) -> Result<Vec<OrderRow>> {
    let with_bound = bound_applies(spec);
    let limit = mpf_bound_max_h_lambda(spec.k(), terms.m());
    lambdas
        .iter()
        .map(|&lambda| {
            let m = assemble_mpf_matrix(spec, terms, lambda)?;
            let error = spectral_norm(&(&m - exact_evolution(terms, lambda)));
            let bound = (with_bound && terms.h() * lambda <= limit)
                .then(|| mpf_error_bound(spec.k(), terms.m(), terms.h(), lambda))
                .transpose()?;
            Ok(OrderRow {
                lambda,
                error,
                unitarity: unitarity_defect(&m),
                bound,
            })
        })
        .collect()
}

pub fn run(args: &OrderScanArgs) -> Result<Report> {
    if !(args.lambda_min > 0.0 && args.lambda_min < args.lambda_max) {
        bail!("need 0 < lambda-min < lambda-max");
    }
    let spec = match (args.gamma, args.delta) {
        (None, None) => {
            let gamma = ((args.k + 1) as f64).ln() / (args.k + 1) as f64;
            resolve_spec(args.k, args.chi, Some(gamma), None, None)?
        }
        (g, d) => resolve_spec(args.k, args.chi, g, d, None)?,
    };
    let terms = random_term_list(args.n_qubits, args.m, args.h, args.seed)?;
    let rows = scan_rows(
        &spec,
        &terms,
        &log_grid(args.lambda_min, args.lambda_max, args.points),
    )?;

    let mut report = Report::default();
    report.line(format!(
        "k = {}, chi = {}, ells = {:?}, coeffs = [{}]",
        spec.k(),
        spec.chi(),
        spec.ells(),
        spec.coeffs()
            .iter()
            .map(|c| format!("{:.6}", ratio_to_f64(c)))
            .collect::<Vec<_>>()
            .join(", ")
    ));
    let mut table = Table::new(&["lambda", "mpf_error", "unitarity_defect", "mpf_bound"]);
    for r in &rows {
        table.push(vec![
            num(r.lambda),
            num(r.error),
            num(r.unitarity),
            opt_num(r.bound),
        ]);
    }

    let expected = (2 * (spec.k() + spec.chi()) + 1) as f64;
    let err_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.error)).collect();
    match windowed_slope(&err_pts, FIT_WINDOW) {
        Ok(s) => report.check(
            "error slope",
            (s - expected).abs() <= ERROR_SLOPE_TOL,
            format!("fitted {s:.4}, expected {expected} ± {ERROR_SLOPE_TOL}"),
        ),
        Err(e) => report.check("error slope", false, format!("no fit: {e}")),
    }
    let uni_pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.unitarity)).collect();
    let uni_slope = windowed_slope(&uni_pts, FIT_WINDOW);
    let richardson = spec.chi() == 1 && spec.ells() == [1, 2];
    match (&uni_slope, richardson) {
        (Ok(s), true) => report.check(
            "unitarity slope",
            (s - RICHARDSON_UNITARITY_SLOPE).abs() <= UNITARITY_SLOPE_TOL,
            format!("fitted {s:.4}, expected {RICHARDSON_UNITARITY_SLOPE} ± {UNITARITY_SLOPE_TOL}"),
        ),
        (Err(e), true) => report.check("unitarity slope", false, format!("no fit: {e}")),
        (Ok(s), false) => report.line(format!("unitarity-defect slope {s:.4}")),
        (Err(_), false) => {
            report.line("unitarity-defect slope: not enough points in the fit window")
        }
    }

    // Values below the fit window's floor are at double-precision resolution
    // and cannot be compared with a smaller bound.
    let resolvable: Vec<&OrderRow> = rows
        .iter()
        .filter(|r| r.bound.is_some_and(|b| b >= FIT_WINDOW.0))
        .collect();
    if resolvable.is_empty() {
        report.line("error bound: no grid point with applicable, resolvable bound");
    } else {
        let violations: Vec<&&OrderRow> = resolvable
            .iter()
            .filter(|r| r.error > r.bound.unwrap())
            .collect();
        let detail = match violations.first() {
            None => format!("{} grid points, all within the bound", resolvable.len()),
            Some(r) => format!(
                "{} of {} points violate; first at lambda = {:.4e}: {:.4e} > {:.4e}",
                violations.len(),
                resolvable.len(),
                r.lambda,
                r.error,
                r.bound.unwrap()
            ),
        };
        report.check("error bound", violations.is_empty(), detail);
    }
    emit(&table, &args.output, &mut report)?;
    Ok(report)
}
