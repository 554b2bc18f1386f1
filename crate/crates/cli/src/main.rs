use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lculab_cli::{coeffs, cost, kappa_scan, optimal, order_scan, trials, Report};

#[derive(Parser)]
#[command(
    name = "lculab",
    version,
    about = "Multi-product formula and LCU experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repetition numbers, exact coefficients and κ of one formula.
    Coeffs(coeffs::CoeffsArgs),
    /// Exact κ across k at offsets from the critical γ.
    KappaScan(kappa_scan::KappaScanArgs),
    /// Error and unitarity defect of a formula against the exact evolution.
    OrderScan(order_scan::OrderScanArgs),
    /// Seeded Monte Carlo runs of the full protocol.
    Trials(trials::TrialsArgs),
    /// Parameter plan and exponential-count comparison.
    Cost(cost::CostArgs),
    /// Success probability of prepare/select/measure protocols against the bound.
    Optimal(optimal::OptimalArgs),
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    match &cli.command {
        Command::Coeffs(a) => coeffs::run(a),
        Command::KappaScan(a) => kappa_scan::run(a),
        Command::OrderScan(a) => order_scan::run(a),
        Command::Trials(a) => trials::run(a),
        Command::Cost(a) => cost::run(a),
        Command::Optimal(a) => optimal::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.render());
            for c in report.failures() {
                eprintln!("assertion failed: {}: {}", c.name, c.detail);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
