use anyhow::{bail, Result};
use clap::Args;
use lculab::exactcoeff::{format_rational, Kappa};
use lculab::{build_mpf_spec, gamma_critical};

use crate::report::{emit, linear_slope, num, positive, OutputArgs, Report, Table};

/// Smallest k in the growth check at positive offsets.
pub const GROWTH_CHECK_K_MIN: usize = 8;
/// Largest `|d log κ/dk|` accepted as "no exponential trend" at γ_c.
pub const FLAT_RATE_TOL: f64 = 0.02;

#[derive(Args, Debug, Clone)]
pub struct KappaScanArgs {
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub k_min: usize,
    #[arg(long, default_value_t = 16, value_parser = positive)]
    pub k_max: usize,
    /// Offsets added to γ_c.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-0.05,0,0.05"
    )]
    pub offsets: Vec<f64>,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub chi: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaPoint {
    pub k: usize,
    pub offset: f64,
    pub gamma: f64,
    pub ell_top: u64,
    pub kappa: Kappa,
}

/// Exact κ of `M_{k,χ}` at `γ = γ_c + offset` for every k in range.
pub fn scan(k_min: usize, k_max: usize, chi: usize, offset: f64) -> Result<Vec<KappaPoint>> {
    if k_min > k_max {
        bail!("empty k range {k_min}..={k_max}");
    }
    (k_min..=k_max)
        .map(|k| {
            let spec = build_mpf_spec(k, chi, gamma_critical() + offset)?;
            Ok(KappaPoint {
                k,
                offset,
                gamma: spec.gamma(),
                ell_top: spec.ells()[k],
                kappa: spec.kappa(),
            })
        })
        .collect()
}

/// Least-squares slope of `log κ` against k.
pub fn exponential_rate(points: &[KappaPoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.k as f64, p.kappa.to_f64().ln()))
        .collect();
    linear_slope(&pts)
}

pub fn strictly_increasing(points: &[KappaPoint]) -> bool {
    points
        .windows(2)
        .all(|w| w[1].kappa.to_f64() > w[0].kappa.to_f64())
}

pub fn strictly_decreasing(points: &[KappaPoint]) -> bool {
    points
        .windows(2)
        .all(|w| w[1].kappa.to_f64() < w[0].kappa.to_f64())
}

pub fn run(args: &KappaScanArgs) -> Result<Report> {
    if args.offsets.is_empty() {
        bail!("no offsets given");
    }
    let mut report = Report::default();
    let mut table = Table::new(&[
        "k",
        "gamma_offset",
        "gamma",
        "ell_top",
        "kappa",
        "kappa_decimal",
        "ln_kappa",
    ]);
    report.line(format!("gamma_c = {:.10}", gamma_critical()));
    for &offset in &args.offsets {
        let points = scan(args.k_min, args.k_max, args.chi, offset)?;
        for p in &points {
            let kf = p.kappa.to_f64();
            let exact = match &p.kappa {
                Kappa::Finite(r) => format_rational(r),
                Kappa::Infinite => "inf".into(),
            };
            table.push(vec![
                p.k.to_string(),
                num(offset),
                num(p.gamma),
                p.ell_top.to_string(),
                exact,
                num(kf),
                num(kf.ln()),
            ]);
        }
        let first = points.first().expect("non-empty range");
        let last = points.last().expect("non-empty range");
        let rate = exponential_rate(&points);
        report.line(format!(
            "offset {offset:+}: kappa({}) = {:.6e}, kappa({}) = {:.6e}, d log kappa/dk = {}",
            first.k,
            first.kappa.to_f64(),
            last.k,
            last.kappa.to_f64(),
            rate.map_or("n/a".into(), |r| format!("{r:.4}"))
        ));
        let (a, b) = (first.kappa.to_f64(), last.kappa.to_f64());
        if offset > 0.0 {
            let tail: Vec<KappaPoint> = points
                .iter()
                .filter(|p| p.k >= GROWTH_CHECK_K_MIN)
                .cloned()
                .collect();
            if tail.len() >= 2 {
                let (lo, hi) = (&tail[0], &tail[tail.len() - 1]);
                report.check(
                    format!("kappa grows at offset {offset:+}"),
                    strictly_increasing(&tail),
                    format!(
                        "kappa({}) = {:.6e}, kappa({}) = {:.6e}, strictly increasing over k >= {}",
                        lo.k,
                        lo.kappa.to_f64(),
                        hi.k,
                        hi.kappa.to_f64(),
                        GROWTH_CHECK_K_MIN
                    ),
                );
            }
        } else if offset < 0.0 {
            report.check(
                format!("kappa falls toward 1 at offset {offset:+}"),
                b < a && b > 1.0,
                format!("kappa({}) = {b:.6e} < kappa({}) = {a:.6e}", last.k, first.k),
            );
        } else if let Some(rate) = rate {
            report.check(
                "no exponential trend at gamma_c",
                rate.abs() < FLAT_RATE_TOL,
                format!(
                    "|d log kappa/dk| = {:.4e}, limit {FLAT_RATE_TOL}",
                    rate.abs()
                ),
            );
        }
    }
    emit(&table, &args.output, &mut report)?;
    Ok(report)
}
