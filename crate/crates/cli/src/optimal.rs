use anyhow::{bail, Result};
use clap::Args;
use lculab::exactcoeff::{format_rational, parse_rational, ratio_to_f64};
use lculab::lcu::{MpfStep, OutcomeKind};
use lculab::numerics::{exact_evolution, random_state, random_term_list, DenseOperator};
use lculab::optimality::{
    general_circuit_success, optimal_protocol, protocol_from_prep, random_prep, success_upper_bound,
};
use lculab::StateVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coeffs::resolve_spec;
use crate::report::{emit, num, opt_num, positive, OutputArgs, Report, Table};

/// Allowed excess over the bound, and the equality tolerance with identical unitaries.
pub const BOUND_TOL: f64 = 1e-12;

#[derive(Args, Debug, Clone)]
pub struct OptimalArgs {
    /// Coefficients as rationals, e.g. `-1/3,4/3`.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "k"
    )]
    pub coeffs: Option<Vec<String>>,
    /// Take the coefficients of this multi-product formula instead.
    #[arg(long, value_parser = positive)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    pub chi: usize,
    #[arg(long, conflicts_with = "delta")]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Random states (and random preparation vectors) to test.
    #[arg(long, default_value_t = 100)]
    pub states: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// With `--k`: also test the formula's integrators at this step size.
    #[arg(long, requires = "k")]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 2024)]
    pub terms_seed: u64,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub n_qubits: usize,
    #[arg(long, default_value_t = 2, value_parser = positive)]
    pub m: usize,
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Success probabilities on one input state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRow {
    /// Optimal amplitudes, every unitary equal.
    pub optimal_identical: f64,
    /// Random preparation vector, every unitary equal.
    pub random_prep: f64,
    /// Optimal amplitudes on the formula's integrators.
    pub optimal_integrators: Option<f64>,
    /// One pass of the fold circuit on the integrators.
    pub fold: Option<f64>,
}

/// Probability that one pass of the step's combination circuit succeeds on `psi`.
pub fn fold_success(step: &MpfStep, psi: &StateVector) -> f64 {
    step.distribution(psi)
        .into_iter()
        .filter(|(path, _)| step.circuit().classify(path.bits) == OutcomeKind::Success)
        .map(|(_, p)| p)
        .sum()
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NEG_INFINITY, f64::max)
}

pub fn run(args: &OptimalArgs) -> Result<Report> {
    let (exact, step) = match (&args.coeffs, args.k) {
        (Some(list), _) => {
            let c = list
                .iter()
                .map(|s| parse_rational(s))
                .collect::<lculab::Result<Vec<_>>>()?;
            (c, None)
        }
        (None, Some(k)) => {
            let spec = resolve_spec(k, args.chi, args.gamma, args.delta, None)?;
            let step = match args.lambda {
                Some(l) => {
                    let terms = random_term_list(args.n_qubits, args.m, args.h, args.terms_seed)?;
                    Some(MpfStep::new(&spec, &terms, l)?)
                }
                None => None,
            };
            (spec.coeffs().to_vec(), step)
        }
        (None, None) => bail!("give --coeffs or --k"),
    };
    let coeffs: Vec<f64> = exact.iter().map(ratio_to_f64).collect();
    let bound = success_upper_bound(&exact)?;
    let kappa = lculab::exactcoeff::kappa(&exact)?;

    let dim = 1usize << args.n_qubits;
    let shared = exact_evolution(
        &random_term_list(args.n_qubits, 1, 1.0, args.terms_seed)?,
        1.0,
    );
    let identical: Vec<DenseOperator> = vec![shared; coeffs.len()];
    let optimal = optimal_protocol(&coeffs, &identical)?;
    let integrator_protocol = match &step {
        Some(s) => Some(optimal_protocol(&coeffs, s.integrators())?),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = Vec::with_capacity(args.states);
    for _ in 0..args.states {
        let psi = random_state(dim, &mut rng);
        let prep = random_prep(coeffs.len().next_power_of_two(), &mut rng);
        rows.push(OptimalRow {
            optimal_identical: general_circuit_success(&optimal, &psi)?,
            random_prep: general_circuit_success(
                &protocol_from_prep(&coeffs, &prep, &identical)?,
                &psi,
            )?,
            optimal_integrators: integrator_protocol
                .as_ref()
                .map(|p| general_circuit_success(p, &psi))
                .transpose()?,
            fold: step.as_ref().map(|s| fold_success(s, &psi)),
        });
    }

    let mut report = Report::default();
    report.line(format!(
        "coefficients = [{}]",
        exact
            .iter()
            .map(format_rational)
            .collect::<Vec<_>>()
            .join(", ")
    ));
    report.line(format!(
        "kappa = {kappa}, success upper bound = {bound:.16e}"
    ));
    let max_diff = max_of(rows.iter().map(|r| (r.optimal_identical - bound).abs()));
    report.check(
        "optimal protocol attains the bound",
        max_diff < BOUND_TOL,
        format!(
            "max |success - bound| = {max_diff:.3e} over {} states",
            rows.len()
        ),
    );
    let worst = max_of(rows.iter().map(|r| r.random_prep));
    report.check(
        "random preparations within the bound",
        worst <= bound + BOUND_TOL,
        format!("max success {worst:.16e}, bound {bound:.16e}"),
    );
    if step.is_some() {
        let opt = max_of(rows.iter().filter_map(|r| r.optimal_integrators));
        let fold = max_of(rows.iter().filter_map(|r| r.fold));
        report.line(format!(
            "integrators at lambda = {}: optimal protocol max success {opt:.16e}, gap {:.3e}",
            args.lambda.unwrap_or_default(),
            bound - opt
        ));
        report.check(
            "fold circuit within the bound",
            fold <= bound + BOUND_TOL,
            format!(
                "max success {fold:.16e}, bound {bound:.16e}, gap {:.3e}",
                bound - fold
            ),
        );
    }

    let mut table = Table::new(&[
        "state",
        "optimal_identical",
        "random_prep",
        "optimal_integrators",
        "fold",
        "bound",
    ]);
    for (i, r) in rows.iter().enumerate() {
        table.push(vec![
            i.to_string(),
            num(r.optimal_identical),
            num(r.random_prep),
            opt_num(r.optimal_integrators),
            opt_num(r.fold),
            num(bound),
        ]);
    }
    emit(&table, &args.output, &mut report)?;
    Ok(report)
}
