//! Prepare–select–measure protocols and the limit on their success probability.
//!
//! A general protocol prepares an ancilla register in `Σ_m A_{m,0}|m⟩`, applies
//! `U_m` controlled on `|m⟩` and projects onto a row `B_{0,·}`. It implements
//! `Σ_m C_m U_m` when `B_{0,m}A_{m,0} = K·C_m` for one real `K > 0`, and
//! succeeds with probability `‖Σ_m K C_m U_m ψ‖²`. Cauchy–Schwarz caps `K` at
//! `1/Σ|C_m|`, reached by `a_m = b_m = √C_m`; with equal unitaries the success
//! probability is then `((κ−1)/(κ+1))²`.
//!
//! Only the first column of `A` and first row of `B` are materialized. Any unit
//! vector completes to a unitary by Gram–Schmidt, so the rest of either matrix
//! does not affect the designated outcome.
//!
//! [`explicit_circuit_reference`] is an independent check on the branch
//! bookkeeping in [`crate::lcu`]: it simulates a combination tree gate by gate
//! on the full ancilla ⊗ system statevector.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, LabError, Result};
use crate::exactcoeff::{kappa, ratio_to_f64, BigRational, Kappa};
use crate::lcu::CombinationTree;
use crate::numerics::{DenseOperator, StateVector};

/// Largest number of combination steps [`explicit_circuit_reference`] accepts.
pub const MAX_REFERENCE_ANCILLAS: usize = 3;

/// A single-register prepare/select/measure circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralProtocol {
    /// `A_{m,0}`.
    pub prep: Vec<Complex64>,
    /// `B_{0,m}`.
    pub measure: Vec<Complex64>,
    pub unitaries: Vec<DenseOperator>,
}

impl GeneralProtocol {
    pub fn new(
        prep: Vec<Complex64>,
        measure: Vec<Complex64>,
        unitaries: Vec<DenseOperator>,
    ) -> Result<Self> {
        if prep.is_empty() || prep.len() != measure.len() || prep.len() != unitaries.len() {
            return Err(invalid(format!(
                "{} amplitudes, {} measurement entries and {} unitaries",
                prep.len(),
                measure.len(),
                unitaries.len()
            )));
        }
        for (name, v) in [("prep", &prep), ("measure", &measure)] {
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("{name} vector has norm {norm}")));
            }
        }
        let d = unitaries[0].nrows();
        if unitaries.iter().any(|u| u.nrows() != d || u.ncols() != d) {
            return Err(invalid("unitaries must share one square shape"));
        }
        Ok(GeneralProtocol {
            prep,
            measure,
            unitaries,
        })
    }

    /// `B_{0,m}A_{m,0}` for each slot.
    pub fn effective_coefficients(&self) -> Vec<Complex64> {
        self.prep
            .iter()
            .zip(&self.measure)
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// Optimal `a_m = b_m ∝ √C_m` and the resulting `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalAmplitudes {
    pub prep: Vec<Complex64>,
    pub measure: Vec<Complex64>,
    /// `1/Σ|C_m|`.
    pub k_factor: f64,
}

/// Pads `coeffs` with zeros to a power-of-two length.
fn padded(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    c.resize(coeffs.len().next_power_of_two(), 0.0);
    c
}

/// `a_m = b_m = √C_m/√Σ|C|` (principal root, so `i√|C_m|` for negative `C_m`),
/// zero-padded to a power-of-two register.
pub fn optimal_amplitudes(coeffs: &[f64]) -> Result<OptimalAmplitudes> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(invalid("coefficients must be finite"));
    }
    let l1: f64 = coeffs.iter().map(|c| c.abs()).sum();
    if l1 == 0.0 {
        return Err(invalid("coefficients are all zero"));
    }
    let amps: Vec<Complex64> = padded(coeffs)
        .iter()
        .map(|&c| Complex64::new(c / l1, 0.0).sqrt())
        .collect();
    Ok(OptimalAmplitudes {
        measure: amps.clone(),
        prep: amps,
        k_factor: 1.0 / l1,
    })
}

fn padded_unitaries(n: usize, unitaries: &[DenseOperator]) -> Result<Vec<DenseOperator>> {
    let first = unitaries.first().ok_or_else(|| invalid("no unitaries"))?;
    let mut us = unitaries.to_vec();
    us.resize(n, DenseOperator::identity(first.nrows(), first.ncols()));
    Ok(us)
}

/// The optimal protocol for `Σ_m C_m U_m`; padded slots get the identity.
pub fn optimal_protocol(coeffs: &[f64], unitaries: &[DenseOperator]) -> Result<GeneralProtocol> {
    if coeffs.len() != unitaries.len() {
        return Err(LabError::DimensionMismatch {
            expected: coeffs.len(),
            found: unitaries.len(),
        });
    }
    let amps = optimal_amplitudes(coeffs)?;
    let us = padded_unitaries(amps.prep.len(), unitaries)?;
    GeneralProtocol::new(amps.prep, amps.measure, us)
}

/// A protocol implementing `Σ_m C_m U_m` from an arbitrary preparation vector.
///
/// The measurement row is fixed by `B_{0,m} = K C_m/A_{m,0}` and normalized,
/// which determines `K`. Every non-zero coefficient needs a non-zero amplitude.
pub fn protocol_from_prep(
    coeffs: &[f64],
    prep: &[Complex64],
    unitaries: &[DenseOperator],
) -> Result<GeneralProtocol> {
    let c = padded(coeffs);
    if prep.len() != c.len() {
        return Err(LabError::DimensionMismatch {
            expected: c.len(),
            found: prep.len(),
        });
    }
    let norm: f64 = prep.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let raw: Vec<Complex64> = c
        .iter()
        .zip(prep)
        .map(|(&cm, a)| {
            if cm == 0.0 {
                Ok(Complex64::zero())
            } else if a.norm() == 0.0 {
                Err(invalid("a non-zero coefficient needs a non-zero amplitude"))
            } else {
                Ok(Complex64::new(cm, 0.0) / (a / norm))
            }
        })
        .collect::<Result<_>>()?;
    let b_norm: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Err(invalid("coefficients are all zero"));
    }
    GeneralProtocol::new(
        prep.iter().map(|a| a / norm).collect(),
        raw.iter().map(|b| b / b_norm).collect(),
        padded_unitaries(c.len(), unitaries)?,
    )
}

/// Random preparation vector with complex Gaussian entries.
pub fn random_prep<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..len)
        .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// `‖Σ_m B_{0,m}A_{m,0} U_m ψ‖²`.
pub fn general_circuit_success(protocol: &GeneralProtocol, psi: &StateVector) -> Result<f64> {
    let d = protocol.unitaries[0].nrows();
    if psi.len() != d {
        return Err(LabError::DimensionMismatch {
            expected: d,
            found: psi.len(),
        });
    }
    let mut out = StateVector::zeros(d);
    for (w, u) in protocol
        .effective_coefficients()
        .iter()
        .zip(&protocol.unitaries)
    {
        if *w != Complex64::zero() {
            out += (u * psi) * *w;
        }
    }
    Ok(out.norm_squared())
}

/// `((κ−1)/(κ+1))²`, and 1 when no coefficient is negative.
pub fn success_upper_bound(coeffs: &[BigRational]) -> Result<f64> {
    Ok(match kappa(coeffs)? {
        Kappa::Infinite => 1.0,
        Kappa::Finite(k) => {
            let one = BigRational::one();
            let ratio = (&k - &one) / (&k + &one);
            ratio_to_f64(&(&ratio * &ratio))
        }
    })
}

/// [`success_upper_bound`] from a floating-point κ.
pub fn success_bound_from_kappa(kappa: f64) -> f64 {
    if kappa.is_infinite() {
        return 1.0;
    }
    let r = (kappa - 1.0) / (kappa + 1.0);
    r * r
}

enum Gate<'a> {
    /// `V_κ` (or its adjoint) on one ancilla.
    Rotate {
        ancilla: usize,
        kappa: f64,
        adjoint: bool,
    },
    /// Apply `op` to the system when every listed ancilla has the listed value.
    Controlled {
        controls: Vec<(usize, bool)>,
        op: Controlled<'a>,
    },
}

enum Controlled<'a> {
    Unitary(&'a DenseOperator),
    Negate,
}

fn compile<'a>(
    tree: &CombinationTree,
    unitaries: &'a [DenseOperator],
    controls: &[(usize, bool)],
    out: &mut Vec<Gate<'a>>,
) {
    match tree {
        CombinationTree::Leaf(i) => out.push(Gate::Controlled {
            controls: controls.to_vec(),
            op: Controlled::Unitary(&unitaries[*i]),
        }),
        CombinationTree::Pair {
            ancilla,
            kappa,
            negate_right,
            left,
            right,
        } => {
            out.push(Gate::Rotate {
                ancilla: *ancilla,
                kappa: *kappa,
                adjoint: false,
            });
            let mut on0 = controls.to_vec();
            on0.push((*ancilla, false));
            compile(left, unitaries, &on0, out);
            let mut on1 = controls.to_vec();
            on1.push((*ancilla, true));
            compile(right, unitaries, &on1, out);
            if *negate_right {
                out.push(Gate::Controlled {
                    controls: on1,
                    op: Controlled::Negate,
                });
            }
            out.push(Gate::Rotate {
                ancilla: *ancilla,
                kappa: *kappa,
                adjoint: true,
            });
        }
    }
}

/// Joint distribution of all ancilla outcomes of `tree`, simulated gate by gate.
///
/// The register holds `2^a · d` amplitudes, amplitude `mask·d + s` for ancilla
/// bitstring `mask` (bit `c` is ancilla `c`) and system index `s`. Each pair
/// node contributes `V_κ`, its two subtrees controlled on the ancilla, a
/// controlled `−1` when the right branch is subtracted, and `V_κ†`. Ancilla
/// rotations inside a subtree are left uncontrolled: on the branch where the
/// subtree is idle they cancel.
pub fn explicit_circuit_reference(
    tree: &CombinationTree,
    unitaries: &[DenseOperator],
    psi: &StateVector,
) -> Result<BTreeMap<u64, f64>> {
    let n_anc = tree.n_ancillas();
    if n_anc > MAX_REFERENCE_ANCILLAS {
        return Err(LabError::Unsupported(format!(
            "explicit reference is limited to {MAX_REFERENCE_ANCILLAS} combination steps, got {n_anc}"
        )));
    }
    let leaves = tree.leaves();
    if leaves.iter().any(|&i| i >= unitaries.len()) {
        return Err(invalid("tree refers to a missing unitary"));
    }
    let d = psi.len();
    if unitaries.iter().any(|u| u.nrows() != d || u.ncols() != d) {
        return Err(LabError::DimensionMismatch {
            expected: d,
            found: unitaries[0].nrows(),
        });
    }
    let masks = 1usize << n_anc;
    let mut reg = vec![Complex64::zero(); masks * d];
    reg[..d].copy_from_slice(psi.as_slice());

    let mut gates = Vec::new();
    compile(tree, unitaries, &[], &mut gates);
    for gate in &gates {
        match gate {
            Gate::Rotate {
                ancilla,
                kappa,
                adjoint,
            } => {
                let a = (kappa / (kappa + 1.0)).sqrt();
                let b = (1.0 / (kappa + 1.0)).sqrt();
                // V = [[a, −b], [b, a]]; V† = [[a, b], [−b, a]].
                let (m01, m10) = if *adjoint { (b, -b) } else { (-b, b) };
                let bit = 1usize << ancilla;
                for mask in (0..masks).filter(|m| m & bit == 0) {
                    for s in 0..d {
                        let (i0, i1) = (mask * d + s, (mask | bit) * d + s);
                        let (x0, x1) = (reg[i0], reg[i1]);
                        reg[i0] = x0 * a + x1 * m01;
                        reg[i1] = x0 * m10 + x1 * a;
                    }
                }
            }
            Gate::Controlled { controls, op } => {
                for mask in 0..masks {
                    if !controls.iter().all(|&(c, v)| (mask >> c & 1 == 1) == v) {
                        continue;
                    }
                    let block = StateVector::from_column_slice(&reg[mask * d..(mask + 1) * d]);
                    let next = match op {
                        Controlled::Unitary(u) => *u * block,
                        Controlled::Negate => -block,
                    };
                    reg[mask * d..(mask + 1) * d].copy_from_slice(next.as_slice());
                }
            }
        }
    }
    Ok((0..masks)
        .map(|mask| {
            let p = reg[mask * d..(mask + 1) * d]
                .iter()
                .map(|z| z.norm_sqr())
                .sum();
            (mask as u64, p)
        })
        .collect())
}
