//! Hamiltonian simulation by linear combinations of unitaries, at desk scale.
//!
//! The crate builds multi-product formulas with exact rational coefficients,
//! evaluates them on small dense Hamiltonians, simulates the probabilistic
//! circuits that implement them, and evaluates the accompanying cost model.
//!
//! * [`exactcoeff`]: coefficients, κ, and the γ threshold.
//! * [`suzuki`]: symmetric product formula schedules.
//! * [`numerics`]: dense matrices, exponentials and error measurements.
//! * [`lcu`]: the combination circuit and its repeat-until-success protocol.
//! * [`costmodel`]: error bounds and parameter rules.
//! * [`optimality`]: the optimal single-ancilla-register protocol and its success bound.

pub mod costmodel;
pub mod error;
pub mod exactcoeff;
pub mod lcu;
pub mod numerics;
pub mod optimality;
pub mod suzuki;

pub use error::{LabError, Result};
pub use exactcoeff::{
    build_mpf_spec, choose_gamma, coefficients_general, eta_constant, gamma_critical, kappa,
    verify_order_conditions, BigRational, Kappa, MpfSpec,
};
pub use numerics::{DenseOperator, StateVector, TermList};
pub use suzuki::{build_s1, build_schi, ProductFormula};
