use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use lculab::lcu::{trial_seed, FailureReason, Protocol, ProtocolConfig, TrialRecord};
use lculab::numerics::{basis_state, random_term_list};
use lculab::TermList;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::campaign::thread_pool;
use crate::report::{binomial_upper, emit, opt_num, OutputArgs, Report, Table};

/// Width of the one-sided confidence band on empirical rates.
pub const SIGMAS: f64 = 3.0;

#[derive(Args, Debug, Clone)]
pub struct TrialsArgs {
    /// JSON campaign configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Base seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Where the Hamiltonian comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianSource {
    Random {
        n_qubits: usize,
        m: usize,
        h: f64,
        seed: u64,
    },
    Terms(TermList),
}

impl HamiltonianSource {
    pub fn build(&self) -> Result<TermList> {
        Ok(match self {
            HamiltonianSource::Random {
                n_qubits,
                m,
                h,
                seed,
            } => random_term_list(*n_qubits, *m, *h, *seed)?,
            HamiltonianSource::Terms(t) => t.clone(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialsConfig {
    pub protocol: ProtocolConfig,
    /// Total evolution time.
    pub t: f64,
    pub hamiltonian: HamiltonianSource,
    #[serde(default)]
    pub initial_basis_state: usize,
}

impl TrialsConfig {
    /// The config with every default written out.
    pub fn materialized(&self) -> TrialsConfig {
        let mut c = self.clone();
        c.protocol.budget = Some(c.protocol.effective_budget());
        c
    }
}

/// Aggregates over a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CampaignTotals {
    pub trials: u64,
    pub successes: u64,
    pub budget_exhausted: u64,
    pub aborted_on_addition: u64,
    pub subtraction_attempts: u64,
    pub subtraction_failures: u64,
    pub corrections: u64,
    pub addition_failures: u64,
    pub circuits: u64,
    pub max_exponentials: u64,
    pub max_fidelity_error: Option<f64>,
}

pub fn totals(records: &[TrialRecord]) -> CampaignTotals {
    let mut t = CampaignTotals {
        trials: records.len() as u64,
        ..Default::default()
    };
    for r in records {
        t.successes += r.succeeded as u64;
        match r.failure {
            Some(FailureReason::BudgetExhausted) => t.budget_exhausted += 1,
            Some(FailureReason::AdditionFailure) => t.aborted_on_addition += 1,
            None => {}
        }
        t.subtraction_attempts += r.subtraction_attempts;
        t.subtraction_failures += r.subtraction_failures;
        t.corrections += r.corrections_applied;
        t.addition_failures += r.addition_failures;
        t.circuits += r.circuits_executed;
        t.max_exponentials = t.max_exponentials.max(r.exponentials_consumed);
        if let Some(f) = r.fidelity_error {
            t.max_fidelity_error = Some(t.max_fidelity_error.map_or(f, |m: f64| m.max(f)));
        }
    }
    t
}

/// Runs `trials` seeded trials in parallel; records come back sorted by seed.
pub fn run_campaign(config: &TrialsConfig, trials: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    let terms = config.hamiltonian.build()?;
    if config.initial_basis_state >= terms.dim() {
        bail!(
            "initial_basis_state {} is outside dimension {}",
            config.initial_basis_state,
            terms.dim()
        );
    }
    let protocol = Protocol::new(&terms, config.t, config.protocol.clone())?;
    let psi0 = basis_state(terms.dim(), config.initial_basis_state);
    let mut records = thread_pool()?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| protocol.run_trial(&psi0, trial_seed(seed, i)))
            .collect::<lculab::Result<Vec<_>>>()
    })?;
    records.sort_by_key(|r| r.rng_seed);
    Ok(records)
}

fn failure_name(f: Option<FailureReason>) -> &'static str {
    match f {
        None => "",
        Some(FailureReason::BudgetExhausted) => "budget_exhausted",
        Some(FailureReason::AdditionFailure) => "addition_failure",
    }
}

pub fn records_table(records: &[TrialRecord]) -> Table {
    let mut table = Table::new(&[
        "rng_seed",
        "succeeded",
        "steps_completed",
        "subtraction_attempts",
        "subtraction_failures",
        "corrections_applied",
        "addition_failures",
        "circuits_executed",
        "exponentials_consumed",
        "failure",
        "fidelity_error",
    ]);
    for r in records {
        table.push(vec![
            r.rng_seed.to_string(),
            r.succeeded.to_string(),
            r.steps_completed.to_string(),
            r.subtraction_attempts.to_string(),
            r.subtraction_failures.to_string(),
            r.corrections_applied.to_string(),
            r.addition_failures.to_string(),
            r.circuits_executed.to_string(),
            r.exponentials_consumed.to_string(),
            failure_name(r.failure).to_string(),
            opt_num(r.fidelity_error),
        ]);
    }
    table
}

pub fn load_config(path: &PathBuf) -> Result<TrialsConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: TrialsConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.protocol.validate()?;
    Ok(config)
}

/// Checks empirical failure rates against their per-circuit bounds.
pub fn rate_checks(
    config: &TrialsConfig,
    totals: &CampaignTotals,
    report: &mut Report,
) -> Result<()> {
    let terms = config.hamiltonian.build()?;
    let protocol = Protocol::new(&terms, config.t, config.protocol.clone())?;
    let spec = &config.protocol.spec;
    let kappa = spec.kappa().to_f64();
    if protocol.step().has_subtraction() && totals.subtraction_attempts > 0 {
        let bound = (4.0 / kappa).min(1.0);
        let rate = totals.subtraction_failures as f64 / totals.subtraction_attempts as f64;
        let limit = binomial_upper(bound, totals.subtraction_attempts, SIGMAS);
        report.check(
            "subtraction failure rate",
            rate <= limit,
            format!("{rate:.4e} per attempt, bound 4/kappa = {bound:.4e}, limit with 3 sigma {limit:.4e}"),
        );
    }
    if totals.circuits > 0 {
        let delta = protocol.step().delta();
        let bound = (spec.k() as f64 * delta * delta / 4.0).min(1.0);
        let rate = totals.addition_failures as f64 / totals.circuits as f64;
        let limit = binomial_upper(bound, totals.circuits, SIGMAS);
        report.check(
            "addition failure rate",
            rate <= limit,
            format!(
                "{rate:.4e} per circuit, bound k Delta^2/4 = {bound:.4e} (Delta = {delta:.4e}), limit {limit:.4e}"
            ),
        );
    }
    // The budget argument needs failure probability at most 1/2 per attempt.
    if protocol.step().has_subtraction() && 4.0 / kappa <= 0.5 && totals.trials > 0 {
        let r = config.protocol.r as f64;
        let bound = (-r / 13.0).exp();
        let frac = totals.budget_exhausted as f64 / totals.trials as f64;
        let limit = binomial_upper(bound, totals.trials, SIGMAS);
        report.check(
            "budget exhaustion",
            frac <= limit,
            format!("{frac:.4e} of runs, bound e^(-r/13) = {bound:.4e}, limit {limit:.4e}"),
        );
    }
    Ok(())
}

pub fn run(args: &TrialsArgs) -> Result<Report> {
    let config = load_config(&args.config)?.materialized();
    let records = run_campaign(&config, args.trials, args.seed)?;
    let t = totals(&records);
    let mut report = Report::default();
    report.line(format!("config: {}", serde_json::to_string(&config)?));
    report.line(format!(
        "trials = {}, seeds {}..{}",
        t.trials,
        args.seed,
        trial_seed(args.seed, args.trials.saturating_sub(1))
    ));
    report.line(format!(
        "success rate = {:.4} ({} of {}), budget exhausted {}, aborted on addition failure {}",
        t.successes as f64 / t.trials.max(1) as f64,
        t.successes,
        t.trials,
        t.budget_exhausted,
        t.aborted_on_addition
    ));
    report.line(format!(
        "mean circuits per run = {:.4}, max exponentials = {}, max fidelity error = {}",
        t.circuits as f64 / t.trials.max(1) as f64,
        t.max_exponentials,
        t.max_fidelity_error
            .map_or("n/a".into(), |f| format!("{f:.4e}"))
    ));
    rate_checks(&config, &t, &mut report)?;
    emit(&records_table(&records), &args.output, &mut report)?;
    Ok(report)
}
