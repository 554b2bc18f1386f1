//! Non-deterministic linear combinations of unitaries.
//!
//! The basic gadget combines two unitaries with one ancilla: rotate the
//! ancilla by `V_κ`, apply `U_a` or `U_b` controlled on it, rotate back with
//! `V_κ†` and measure. Outcome 0 leaves the state proportional to
//! `(κU_a + U_b)|ψ⟩`, outcome 1 to `(U_b − U_a)|ψ⟩`. Passing `−U_b`
//! subtracts instead of adds.
//!
//! Longer combinations nest the gadget as a [`CombinationTree`]. Each subtree
//! is a controlled operation on its own ancillas, so the joint distribution of
//! all ancilla outcomes is that of measuring everything at the end. The
//! simulator therefore propagates one system vector per ancilla bitstring and
//! samples the joint outcome once per circuit execution, with no explicit
//! ancilla register.
//!
//! A multi-product formula step averages the positive-coefficient integrators
//! into `A` and the negative ones into `B`, then subtracts with `κ = Σ₊/Σ₋`.
//! When only the subtraction ancilla reads 1 the state is proportional to
//! `(A + B)|ψ⟩ = Σ_q d_q W_q(λ)|ψ⟩` with `d_q = |C_q|/Σ_{sign(C_q)}`; it is
//! corrected by applying the same all-positive combination at `−λ` and the
//! step is retried.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::exactcoeff::MpfSpec;
use crate::numerics::{
    basis_state, exact_evolution, fidelity_error, integrators, nearest_unitary, spectral_norm,
    unitarity_defect, DenseOperator, StateVector, TermList,
};

/// Tolerance on `‖U†U − I‖` for operators handed to the pair gadget.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Nested pair combinations over a list of unitaries.
#[derive(Debug, Clone, PartialEq)]
pub enum CombinationTree {
    /// Index into the unitary list.
    Leaf(usize),
    /// `(κ·left ± right)/(κ+1)` on outcome 0 of `ancilla`.
    Pair {
        ancilla: usize,
        kappa: f64,
        negate_right: bool,
        left: Box<CombinationTree>,
        right: Box<CombinationTree>,
    },
}

impl CombinationTree {
    /// Left fold `(((U_1+U_2)+U_3)+…)` in the given order. Step `i` uses
    /// `κ_i = (Σ_{j≤i} w_j)/w_{i+1}`, so each intermediate is the running
    /// weighted average. Ancillas are numbered from `first_ancilla` in step order.
    pub fn fold(indices: &[usize], weights: &[f64], first_ancilla: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("cannot combine an empty list"));
        }
        if indices.len() != weights.len() {
            return Err(LabError::DimensionMismatch {
                expected: indices.len(),
                found: weights.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid(format!(
                "combination weights must be positive, got {w}"
            )));
        }
        let mut tree = CombinationTree::Leaf(indices[0]);
        let mut cumulative = weights[0];
        for (step, (&idx, &w)) in indices.iter().zip(weights).enumerate().skip(1) {
            tree = CombinationTree::Pair {
                ancilla: first_ancilla + step - 1,
                kappa: cumulative / w,
                negate_right: false,
                left: Box::new(tree),
                right: Box::new(CombinationTree::Leaf(idx)),
            };
            cumulative += w;
        }
        Ok(tree)
    }

    pub fn n_ancillas(&self) -> usize {
        match self {
            CombinationTree::Leaf(_) => 0,
            CombinationTree::Pair { left, right, .. } => 1 + left.n_ancillas() + right.n_ancillas(),
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        match self {
            CombinationTree::Leaf(i) => vec![*i],
            CombinationTree::Pair { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }

    /// One unnormalized system vector per ancilla bitstring (bit `c` is ancilla `c`).
    pub fn branch_states(
        &self,
        unitaries: &[DenseOperator],
        psi: &StateVector,
    ) -> BTreeMap<u64, StateVector> {
        match self {
            CombinationTree::Leaf(i) => BTreeMap::from([(0, &unitaries[*i] * psi)]),
            CombinationTree::Pair {
                ancilla,
                kappa,
                negate_right,
                left,
                right,
            } => {
                let (a2, b2, ab) = pair_weights(*kappa);
                let sign = if *negate_right { -1.0 } else { 1.0 };
                let bit = 1u64 << ancilla;
                let mut out: BTreeMap<u64, StateVector> = BTreeMap::new();
                let mut add = |key: u64, w: f64, v: &StateVector| {
                    let scaled = v * Complex64::new(w, 0.0);
                    match out.get_mut(&key) {
                        Some(acc) => *acc += scaled,
                        None => {
                            out.insert(key, scaled);
                        }
                    }
                };
                for (x, v) in left.branch_states(unitaries, psi) {
                    add(x, a2, &v);
                    add(x | bit, -ab, &v);
                }
                for (y, v) in right.branch_states(unitaries, psi) {
                    add(y, sign * b2, &v);
                    add(y | bit, sign * ab, &v);
                }
                out
            }
        }
    }
}

/// `(a², b², ab)` for `V_κ = [[a, −b], [b, a]]`, `a = √(κ/(κ+1))`, `b = 1/√(κ+1)`.
pub fn pair_weights(kappa: f64) -> (f64, f64, f64) {
    let denom = kappa + 1.0;
    (kappa / denom, 1.0 / denom, kappa.sqrt() / denom)
}

/// Which kind of outcome an ancilla bitstring represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    Success,
    AdditionFailure,
    SubtractionFailure,
}

/// The combination circuit for one multi-product formula step.
#[derive(Debug, Clone, PartialEq)]
pub struct MpfCircuit {
    pub tree: CombinationTree,
    /// Ancilla performing the subtraction; absent when no coefficient is negative.
    pub subtraction_ancilla: Option<usize>,
    pub kappa: f64,
}

impl MpfCircuit {
    /// Folds the positive and the negative coefficients separately (ascending
    /// index) and subtracts the two averages. Leaves index into `coeffs`.
    pub fn for_coefficients(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("no coefficients"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..coeffs.len())
            .filter(|&q| coeffs[q] != 0.0)
            .partition(|&q| coeffs[q] > 0.0);
        if pos.is_empty() {
            return Err(invalid("at least one coefficient must be positive"));
        }
        let pos_w: Vec<f64> = pos.iter().map(|&q| coeffs[q]).collect();
        let a = CombinationTree::fold(&pos, &pos_w, 0)?;
        if neg.is_empty() {
            return Ok(MpfCircuit {
                tree: a,
                subtraction_ancilla: None,
                kappa: f64::INFINITY,
            });
        }
        let neg_w: Vec<f64> = neg.iter().map(|&q| -coeffs[q]).collect();
        let b = CombinationTree::fold(&neg, &neg_w, pos.len() - 1)?;
        let kappa = pos_w.iter().sum::<f64>() / neg_w.iter().sum::<f64>();
        let ancilla = pos.len() + neg.len() - 2;
        Ok(MpfCircuit {
            tree: CombinationTree::Pair {
                ancilla,
                kappa,
                negate_right: true,
                left: Box::new(a),
                right: Box::new(b),
            },
            subtraction_ancilla: Some(ancilla),
            kappa,
        })
    }

    pub fn n_ancillas(&self) -> usize {
        self.tree.n_ancillas()
    }

    pub fn classify(&self, key: u64) -> OutcomeKind {
        let sub = self.subtraction_ancilla.map_or(0, |c| 1u64 << c);
        if key == 0 {
            OutcomeKind::Success
        } else if key & !sub != 0 {
            OutcomeKind::AdditionFailure
        } else {
            OutcomeKind::SubtractionFailure
        }
    }
}

/// Samples one joint ancilla outcome. Returns the bitstring, its probability
/// and the renormalized post-measurement state.
pub fn sample_branch<R: Rng + ?Sized>(
    branches: &BTreeMap<u64, StateVector>,
    rng: &mut R,
) -> (u64, f64, StateVector) {
    let probs: Vec<(u64, f64)> = branches
        .iter()
        .map(|(&k, v)| (k, v.norm_squared()))
        .collect();
    let total: f64 = probs.iter().map(|p| p.1).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for &(k, p) in &probs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        chosen = Some((k, p));
        if u < acc {
            break;
        }
    }
    let (key, p) = chosen.expect("branch probabilities sum to one");
    let v = &branches[&key];
    (key, p, v.unscale(p.sqrt()))
}

/// Result of one execution of the two-unitary gadget.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub success: bool,
    pub conditional_probability: f64,
    pub post_state: StateVector,
}

fn check_unitary(u: &DenseOperator, name: &str) -> Result<()> {
    if !u.is_square() {
        return Err(invalid(format!("{name} is not square")));
    }
    let defect = unitarity_defect(u);
    if defect > UNITARITY_TOL {
        return Err(invalid(format!(
            "{name} is not unitary (defect {defect:.3e})"
        )));
    }
    Ok(())
}

fn check_state(dim: usize, psi: &StateVector) -> Result<()> {
    if psi.len() != dim {
        return Err(LabError::DimensionMismatch {
            expected: dim,
            found: psi.len(),
        });
    }
    if (psi.norm() - 1.0).abs() > 1e-10 {
        return Err(invalid("state must be normalized"));
    }
    Ok(())
}

/// Implements `(κU_a + U_b)/(κ+1)` on outcome 0.
pub fn apply_weighted_pair<R: Rng + ?Sized>(
    ua: &DenseOperator,
    ub: &DenseOperator,
    kappa: f64,
    psi: &StateVector,
    rng: &mut R,
) -> Result<PairOutcome> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(invalid(format!(
            "kappa must be finite and non-negative, got {kappa}"
        )));
    }
    check_unitary(ua, "U_a")?;
    check_unitary(ub, "U_b")?;
    if ua.shape() != ub.shape() {
        return Err(LabError::DimensionMismatch {
            expected: ua.nrows(),
            found: ub.nrows(),
        });
    }
    check_state(ua.nrows(), psi)?;
    let tree = CombinationTree::Pair {
        ancilla: 0,
        kappa,
        negate_right: false,
        left: Box::new(CombinationTree::Leaf(0)),
        right: Box::new(CombinationTree::Leaf(1)),
    };
    let unitaries = [ua.clone(), ub.clone()];
    let (key, p, post_state) = sample_branch(&tree.branch_states(&unitaries, psi), rng);
    Ok(PairOutcome {
        success: key == 0,
        conditional_probability: p,
        post_state,
    })
}

/// Outcome of a sequence of additions.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationOutcome {
    pub success: bool,
    pub state: StateVector,
    pub path_probability: f64,
    pub steps_used: usize,
    /// 1-based index of the first failed addition.
    pub failed_step: Option<usize>,
}

/// Implements `Σ_q w_q U_q` by a left fold of pair gadgets.
pub fn apply_positive_combination<R: Rng + ?Sized>(
    unitaries: &[DenseOperator],
    weights: &[f64],
    psi: &StateVector,
    rng: &mut R,
) -> Result<CombinationOutcome> {
    let first = unitaries.first().ok_or_else(|| invalid("no unitaries"))?;
    for (i, u) in unitaries.iter().enumerate() {
        check_unitary(u, &format!("U_{}", i + 1))?;
        if u.shape() != first.shape() {
            return Err(LabError::DimensionMismatch {
                expected: first.nrows(),
                found: u.nrows(),
            });
        }
    }
    check_state(first.nrows(), psi)?;
    let indices: Vec<usize> = (0..unitaries.len()).collect();
    let tree = CombinationTree::fold(&indices, weights, 0)?;
    let (key, p, state) = sample_branch(&tree.branch_states(unitaries, psi), rng);
    Ok(CombinationOutcome {
        success: key == 0,
        state,
        path_probability: p,
        steps_used: unitaries.len() - 1,
        failed_step: (key != 0).then(|| key.trailing_zeros() as usize + 1),
    })
}

/// `max_{i≠j} ‖U_i − U_j‖`.
pub fn max_pairwise_distance(unitaries: &[DenseOperator]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..unitaries.len() {
        for j in i + 1..unitaries.len() {
            worst = worst.max(spectral_norm(&(&unitaries[i] - &unitaries[j])));
        }
    }
    worst
}

/// Why a trial did not complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    BudgetExhausted,
    AdditionFailure,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureReason::BudgetExhausted => "budget_exhausted",
            FailureReason::AdditionFailure => "addition_failure",
        })
    }
}

/// Running counters of one trial.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounters {
    pub subtraction_attempts: u64,
    pub subtraction_failures: u64,
    pub corrections_applied: u64,
    pub addition_failures: u64,
    /// Executions of either the main circuit or a correction circuit.
    pub circuits_executed: u64,
    pub exponentials_consumed: u64,
}

/// One multi-product formula step `M_{k,χ}(λ)` with everything precomputed.
#[derive(Debug, Clone)]
pub struct MpfStep {
    lambda: f64,
    coeffs: Vec<f64>,
    forward: Vec<DenseOperator>,
    backward: Vec<DenseOperator>,
    circuit: MpfCircuit,
    correction: CombinationTree,
    correction_weights: Vec<f64>,
    exponentials_per_circuit: u64,
}

impl MpfStep {
    pub fn new(spec: &MpfSpec, terms: &TermList, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(invalid("lambda must be finite"));
        }
        let coeffs = spec.coeffs_f64();
        let forward: Vec<DenseOperator> = integrators(spec, terms, lambda)?
            .iter()
            .map(nearest_unitary)
            .collect();
        let backward: Vec<DenseOperator> = forward.iter().map(|w| w.adjoint()).collect();
        let circuit = MpfCircuit::for_coefficients(&coeffs)?;
        let pos: f64 = coeffs.iter().filter(|c| **c > 0.0).sum();
        let neg: f64 = -coeffs.iter().filter(|c| **c < 0.0).sum::<f64>();
        let correction_weights: Vec<f64> = coeffs
            .iter()
            .map(|&c| if c > 0.0 { c / pos } else { -c / neg })
            .collect();
        let indices: Vec<usize> = (0..coeffs.len()).collect();
        let correction = CombinationTree::fold(&indices, &correction_weights, 0)?;
        let per_formula = 2 * terms.m() as u64 * 5u64.pow(spec.chi() as u32 - 1);
        let exponentials_per_circuit = spec.ells().iter().fold(0u64, |acc, &l| {
            acc.saturating_add(l.saturating_mul(per_formula))
        });
        Ok(MpfStep {
            lambda,
            coeffs,
            forward,
            backward,
            circuit,
            correction,
            correction_weights,
            exponentials_per_circuit,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn circuit(&self) -> &MpfCircuit {
        &self.circuit
    }

    /// `W_q(λ)` in spec order.
    pub fn integrators(&self) -> &[DenseOperator] {
        &self.forward
    }

    pub fn has_subtraction(&self) -> bool {
        self.circuit.subtraction_ancilla.is_some()
    }

    /// Exponentials `e^{−iH_jτ}` used by one execution of either circuit.
    pub fn exponentials_per_circuit(&self) -> u64 {
        self.exponentials_per_circuit
    }

    /// `d_q = |C_q|/Σ_{sign(C_q)}`: the combination left behind by a failed subtraction.
    pub fn correction_weights(&self) -> &[f64] {
        &self.correction_weights
    }

    /// `Σ_q C_q W_q(λ)`.
    pub fn mpf_matrix(&self) -> DenseOperator {
        let d = self.forward[0].nrows();
        self.coeffs
            .iter()
            .zip(&self.forward)
            .fold(DenseOperator::zeros(d, d), |acc, (c, w)| {
                acc + w * Complex64::new(*c, 0.0)
            })
    }

    /// `Σ_q d_q W_q(λ)`; its adjoint is what the correction applies.
    pub fn failure_operator(&self) -> DenseOperator {
        let d = self.forward[0].nrows();
        self.correction_weights
            .iter()
            .zip(&self.forward)
            .fold(DenseOperator::zeros(d, d), |acc, (c, w)| {
                acc + w * Complex64::new(*c, 0.0)
            })
    }

    /// `max_{q≠q'} ‖W_q(λ) − W_{q'}(λ)‖`.
    pub fn delta(&self) -> f64 {
        max_pairwise_distance(&self.forward)
    }

    /// Unnormalized branch vectors of the main circuit.
    pub fn branch_states(&self, psi: &StateVector) -> BTreeMap<u64, StateVector> {
        self.circuit.tree.branch_states(&self.forward, psi)
    }

    /// Unnormalized branch vectors of the correction circuit.
    pub fn correction_branch_states(&self, psi: &StateVector) -> BTreeMap<u64, StateVector> {
        self.correction.branch_states(&self.backward, psi)
    }

    /// Runs the step until it succeeds, the budget runs out, or an addition
    /// fails with `abort_on_addition_failure` set.
    ///
    /// Each subtraction attempt and each correction costs one unit of
    /// `budget`; formulas without negative coefficients cost nothing. When
    /// additions are allowed to fail, the failed post-measurement state is
    /// kept and the protocol carries on as if the circuit had succeeded.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        state: &mut StateVector,
        rng: &mut R,
        budget: &mut u64,
        abort_on_addition_failure: bool,
        counters: &mut StepCounters,
    ) -> std::result::Result<(), FailureReason> {
        loop {
            if self.has_subtraction() {
                if *budget == 0 {
                    return Err(FailureReason::BudgetExhausted);
                }
                *budget -= 1;
                counters.subtraction_attempts += 1;
            }
            counters.circuits_executed += 1;
            counters.exponentials_consumed += self.exponentials_per_circuit;
            let (key, _, post) = sample_branch(&self.branch_states(state), rng);
            *state = post;
            match self.circuit.classify(key) {
                OutcomeKind::Success => return Ok(()),
                OutcomeKind::AdditionFailure => {
                    counters.addition_failures += 1;
                    if abort_on_addition_failure {
                        return Err(FailureReason::AdditionFailure);
                    }
                    return Ok(());
                }
                OutcomeKind::SubtractionFailure => {
                    counters.subtraction_failures += 1;
                    if *budget == 0 {
                        return Err(FailureReason::BudgetExhausted);
                    }
                    *budget -= 1;
                    counters.corrections_applied += 1;
                    counters.circuits_executed += 1;
                    counters.exponentials_consumed += self.exponentials_per_circuit;
                    let (key, _, post) = sample_branch(&self.correction_branch_states(state), rng);
                    *state = post;
                    if key != 0 {
                        counters.addition_failures += 1;
                        if abort_on_addition_failure {
                            return Err(FailureReason::AdditionFailure);
                        }
                    }
                }
            }
        }
    }
}

/// Outcome of [`apply_mpf_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct MpfStepOutcome {
    pub result: std::result::Result<(), FailureReason>,
    pub state: StateVector,
    pub counters: StepCounters,
}

/// Builds the step for `λ` and applies it once to `psi`, aborting on addition failure.
pub fn apply_mpf_step<R: Rng + ?Sized>(
    spec: &MpfSpec,
    terms: &TermList,
    lambda: f64,
    psi: &StateVector,
    rng: &mut R,
    budget: &mut u64,
) -> Result<MpfStepOutcome> {
    if *budget == 0 {
        return Err(invalid("budget must be positive"));
    }
    check_state(terms.dim(), psi)?;
    let step = MpfStep::new(spec, terms, lambda)?;
    let mut state = psi.clone();
    let mut counters = StepCounters::default();
    let result = step.apply(&mut state, rng, budget, true, &mut counters);
    Ok(MpfStepOutcome {
        result,
        state,
        counters,
    })
}

/// Parameters of a full simulation `M(t/r)^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub spec: MpfSpec,
    pub r: u64,
    /// Shared attempt budget; `5r` when absent.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default = "default_abort")]
    pub abort_on_addition_failure: bool,
}

fn default_abort() -> bool {
    true
}

impl ProtocolConfig {
    pub fn new(spec: MpfSpec, r: u64) -> Self {
        ProtocolConfig {
            spec,
            r,
            budget: None,
            abort_on_addition_failure: true,
        }
    }

    pub fn effective_budget(&self) -> u64 {
        self.budget.unwrap_or(5 * self.r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(invalid("r must be at least 1"));
        }
        if self.effective_budget() < self.r {
            return Err(invalid(format!(
                "budget {} is smaller than r = {}",
                self.effective_budget(),
                self.r
            )));
        }
        Ok(())
    }
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub rng_seed: u64,
    pub succeeded: bool,
    pub steps_completed: u64,
    pub subtraction_attempts: u64,
    pub subtraction_failures: u64,
    pub corrections_applied: u64,
    pub addition_failures: u64,
    pub circuits_executed: u64,
    pub exponentials_consumed: u64,
    pub failure: Option<FailureReason>,
    /// `1 − |⟨ψ_exact|ψ_final⟩|²`, present on success.
    pub fidelity_error: Option<f64>,
    #[serde(skip)]
    pub final_state: Option<StateVector>,
}

/// A configured simulation ready to run seeded trials.
#[derive(Debug, Clone)]
pub struct Protocol {
    config: ProtocolConfig,
    step: MpfStep,
    exact: DenseOperator,
    dim: usize,
}

impl Protocol {
    pub fn new(terms: &TermList, t: f64, config: ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let step = MpfStep::new(&config.spec, terms, t / config.r as f64)?;
        Ok(Protocol {
            config,
            step,
            exact: exact_evolution(terms, t),
            dim: terms.dim(),
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn step(&self) -> &MpfStep {
        &self.step
    }

    pub fn run_trial(&self, psi0: &StateVector, seed: u64) -> Result<TrialRecord> {
        check_state(self.dim, psi0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut budget = self.config.effective_budget();
        let mut counters = StepCounters::default();
        let mut state = psi0.clone();
        let mut failure = None;
        let mut steps_completed = 0;
        for _ in 0..self.config.r {
            match self.step.apply(
                &mut state,
                &mut rng,
                &mut budget,
                self.config.abort_on_addition_failure,
                &mut counters,
            ) {
                Ok(()) => steps_completed += 1,
                Err(reason) => {
                    failure = Some(reason);
                    break;
                }
            }
        }
        let succeeded = failure.is_none();
        let fidelity = succeeded.then(|| fidelity_error(&(&self.exact * psi0), &state));
        Ok(TrialRecord {
            rng_seed: seed,
            succeeded,
            steps_completed,
            subtraction_attempts: counters.subtraction_attempts,
            subtraction_failures: counters.subtraction_failures,
            corrections_applied: counters.corrections_applied,
            addition_failures: counters.addition_failures,
            circuits_executed: counters.circuits_executed,
            exponentials_consumed: counters.exponentials_consumed,
            failure,
            fidelity_error: fidelity,
            final_state: succeeded.then_some(state),
        })
    }
}

/// Seed of trial `i` in a campaign with base seed `base`.
pub fn trial_seed(base: u64, i: u64) -> u64 {
    base.wrapping_add(i)
}

/// One run of `M(t/r)^r` from `|0…0⟩`.
pub fn simulate_evolution(
    terms: &TermList,
    t: f64,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<TrialRecord> {
    Protocol::new(terms, t, config.clone())?.run_trial(&basis_state(terms.dim(), 0), seed)
}

/// A joint ancilla outcome; bit `c` of `bits` is ancilla `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutcomePath {
    pub bits: u64,
    pub width: usize,
}

impl fmt::Display for OutcomePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width == 0 {
            return f.write_str("-");
        }
        for c in 0..self.width {
            f.write_str(if self.bits >> c & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Exact distribution of the main circuit's joint ancilla outcomes.
pub fn branch_distribution(
    spec: &MpfSpec,
    terms: &TermList,
    lambda: f64,
    psi: &StateVector,
) -> Result<BTreeMap<OutcomePath, f64>> {
    if spec.k() > 3 {
        return Err(LabError::Unsupported(format!(
            "branch enumeration is limited to k ≤ 3, got k = {}",
            spec.k()
        )));
    }
    check_state(terms.dim(), psi)?;
    let step = MpfStep::new(spec, terms, lambda)?;
    Ok(step.distribution(psi))
}

impl MpfStep {
    /// Probability of every joint outcome of the main circuit on `psi`.
    pub fn distribution(&self, psi: &StateVector) -> BTreeMap<OutcomePath, f64> {
        let width = self.circuit.n_ancillas();
        self.branch_states(psi)
            .into_iter()
            .map(|(bits, v)| (OutcomePath { bits, width }, v.norm_squared()))
            .collect()
    }
}
