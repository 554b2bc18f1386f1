//! Dense complex linear algebra for desk-scale instances (at most 5 qubits).
//!
//! Every operator is a full `2^n × 2^n` matrix. Exponentials of Hermitian
//! matrices go through an eigendecomposition and norms through a full SVD;
//! at these dimensions exactness matters more than speed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::exactcoeff::MpfSpec;
use crate::suzuki;

pub type DenseOperator = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

/// Tolerance for accepting a matrix as Hermitian in [`herm_exp`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance for the terms stored in a [`TermList`].
pub const TERM_HERMITIAN_TOL: f64 = 1e-13;
pub const MAX_QUBITS: usize = 5;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Eigendecomposition `H = V diag(w) V†`, kept so repeated exponentials are cheap.
#[derive(Debug, Clone)]
struct Eigen {
    values: DVector<f64>,
    vectors: DenseOperator,
}

impl Eigen {
    fn new(h: &DenseOperator) -> Self {
        let eig = SymmetricEigen::new(h.clone());
        Eigen {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    /// `e^{−iHt}`.
    fn exp(&self, t: f64) -> DenseOperator {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from_polar(1.0, -self.values[j] * t);
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Largest entrywise modulus of `H − H†`.
pub fn hermitian_defect(h: &DenseOperator) -> f64 {
    if !h.is_square() {
        return f64::INFINITY;
    }
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `e^{−iHt}` by eigendecomposition.
pub fn herm_exp(h: &DenseOperator, t: f64) -> Result<DenseOperator> {
    let defect = hermitian_defect(h);
    if defect > HERMITIAN_TOL {
        return Err(invalid(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    Ok(Eigen::new(h).exp(t))
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseOperator) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `‖X†X − I‖`.
pub fn unitarity_defect(m: &DenseOperator) -> f64 {
    let n = m.ncols();
    spectral_norm(&(m.adjoint() * m - DenseOperator::identity(n, n)))
}

/// Unitary polar factor `UV†` of `X = UΣV†`; removes rounding drift from long products.
pub fn nearest_unitary(x: &DenseOperator) -> DenseOperator {
    let svd = x.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * v_t
}

/// Hamiltonian `H = Σ_j H_j` given as its terms, with a uniform norm bound `h`.
#[derive(Debug, Clone)]
pub struct TermList {
    matrices: Vec<DenseOperator>,
    h: f64,
    n_qubits: usize,
    term_eigs: Vec<Eigen>,
    total_eig: Eigen,
}

impl TermList {
    /// Validates the terms: square, equal dimension `2^n` with `1 ≤ n ≤ 5`,
    /// Hermitian, and `‖H_j‖ ≤ h`.
    pub fn new(matrices: Vec<DenseOperator>, h: f64) -> Result<Self> {
        if matrices.is_empty() {
            return Err(invalid("a term list needs at least one term"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("h must be positive, got {h}")));
        }
        let dim = matrices[0].nrows();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(invalid(format!("dimension {dim} is not 2^n with n ≥ 1")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(invalid(format!(
                "{n_qubits} qubits exceeds the limit of {MAX_QUBITS}"
            )));
        }
        for (j, m) in matrices.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(LabError::DimensionMismatch {
                    expected: dim,
                    found: if m.nrows() != dim {
                        m.nrows()
                    } else {
                        m.ncols()
                    },
                });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(invalid(format!("term {} has non-finite entries", j + 1)));
            }
            let defect = hermitian_defect(m);
            if defect > TERM_HERMITIAN_TOL {
                return Err(invalid(format!(
                    "term {} is not Hermitian (defect {defect:.3e})",
                    j + 1
                )));
            }
            let norm = spectral_norm(m);
            if norm > h * (1.0 + 1e-12) {
                return Err(invalid(format!("term {} has norm {norm} > h = {h}", j + 1)));
            }
        }
        let term_eigs = matrices.iter().map(Eigen::new).collect();
        let total: DenseOperator = matrices
            .iter()
            .fold(DenseOperator::zeros(dim, dim), |acc, m| acc + m);
        Ok(TermList {
            term_eigs,
            total_eig: Eigen::new(&total),
            matrices,
            h,
            n_qubits,
        })
    }

    pub fn matrices(&self) -> &[DenseOperator] {
        &self.matrices
    }

    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn hamiltonian(&self) -> DenseOperator {
        let d = self.dim();
        self.matrices
            .iter()
            .fold(DenseOperator::zeros(d, d), |acc, m| acc + m)
    }

    /// `e^{−iH_j t}` for the 1-based term index `j`.
    pub fn term_exp(&self, j: usize, t: f64) -> Result<DenseOperator> {
        if j == 0 || j > self.m() {
            return Err(invalid(format!("term index {j} outside 1..={}", self.m())));
        }
        Ok(self.term_eigs[j - 1].exp(t))
    }
}

#[derive(Serialize, Deserialize)]
struct TermListRecord {
    n_qubits: usize,
    h: f64,
    /// Per term, rows of `[re, im]` pairs.
    terms: Vec<Vec<Vec<[f64; 2]>>>,
}

impl Serialize for TermList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms = self
            .matrices
            .iter()
            .map(|m| {
                (0..m.nrows())
                    .map(|i| {
                        (0..m.ncols())
                            .map(|j| [m[(i, j)].re, m[(i, j)].im])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        TermListRecord {
            n_qubits: self.n_qubits,
            h: self.h,
            terms,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TermList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let rec = TermListRecord::deserialize(d)?;
        let dim = 1usize << rec.n_qubits.min(MAX_QUBITS + 1);
        let mut matrices = Vec::with_capacity(rec.terms.len());
        for rows in &rec.terms {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(D::Error::custom(format!(
                    "each term must be {dim}×{dim} for {} qubits",
                    rec.n_qubits
                )));
            }
            matrices.push(DenseOperator::from_fn(dim, dim, |i, j| {
                Complex64::new(rows[i][j][0], rows[i][j][1])
            }));
        }
        TermList::new(matrices, rec.h).map_err(D::Error::custom)
    }
}

/// Random Hermitian terms with complex Gaussian entries, each rescaled to norm exactly `h`.
pub fn random_term_list(n_qubits: usize, m: usize, h: f64, seed: u64) -> Result<TermList> {
    if !(1..=MAX_QUBITS).contains(&n_qubits) {
        return Err(invalid(format!("n_qubits must lie in 1..={MAX_QUBITS}")));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid(format!("h must be positive, got {h}")));
    }
    let dim = 1usize << n_qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = Vec::with_capacity(m);
    while matrices.len() < m {
        let x = DenseOperator::from_fn(dim, dim, |_, _| {
            Complex64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        });
        let herm = (&x + x.adjoint()).map(|z| z * 0.5);
        let norm = spectral_norm(&herm);
        if norm > 0.0 {
            matrices.push(herm.map(|z| z * (h / norm)));
        }
    }
    TermList::new(matrices, h)
}

/// `U(t) = e^{−iHt}` for the full Hamiltonian.
pub fn exact_evolution(terms: &TermList, t: f64) -> DenseOperator {
    terms.total_eig.exp(t)
}

/// `X^n` by repeated squaring.
pub fn matrix_power(x: &DenseOperator, mut n: u64) -> DenseOperator {
    let d = x.nrows();
    let mut result = DenseOperator::identity(d, d);
    let mut base = x.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// The integrators `W_q(t) = S_χ(t/ℓ_q)^{ℓ_q}` of a spec, in spec order.
pub fn integrators(spec: &MpfSpec, terms: &TermList, t: f64) -> Result<Vec<DenseOperator>> {
    spec.ells()
        .iter()
        .map(|&l| {
            let formula = suzuki::build_schi(terms.m(), spec.chi(), t / l as f64)?;
            Ok(matrix_power(&suzuki::evaluate(&formula, terms)?, l))
        })
        .collect()
}

/// `Σ_q w_q X_q`.
pub fn weighted_sum(weights: &[f64], ops: &[DenseOperator]) -> Result<DenseOperator> {
    if weights.len() != ops.len() {
        return Err(LabError::DimensionMismatch {
            expected: ops.len(),
            found: weights.len(),
        });
    }
    let first = ops.first().ok_or_else(|| invalid("empty operator list"))?;
    let mut acc = DenseOperator::zeros(first.nrows(), first.ncols());
    for (w, x) in weights.iter().zip(ops) {
        acc += x.map(|z| z * *w);
    }
    Ok(acc)
}

/// `M_{k,χ}(t) = Σ_q C_q S_χ(t/ℓ_q)^{ℓ_q}` with coefficients rounded to doubles.
pub fn assemble_mpf_matrix(spec: &MpfSpec, terms: &TermList, t: f64) -> Result<DenseOperator> {
    weighted_sum(&spec.coeffs_f64(), &integrators(spec, terms, t)?)
}

/// Worst-case state error of the normalized map `ψ ↦ N†Nψ/‖N†Nψ‖`.
///
/// With `σ₁ ≥ σ₂` the extreme singular values of `N` the maximum of
/// `‖ψ − N†Nψ/‖N†Nψ‖‖` over unit `ψ` is `√2 (σ₁ − σ₂)/√(σ₁² + σ₂²)`, attained
/// on an equal-weight superposition of the two extreme right singular vectors.
pub fn max_inversion_deviation(n: &DenseOperator) -> f64 {
    let sv = n.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if hi == 0.0 {
        return f64::NAN;
    }
    2f64.sqrt() * (hi - lo) / (hi * hi + lo * lo).sqrt()
}

pub fn basis_state(dim: usize, index: usize) -> StateVector {
    let mut v = StateVector::from_element(dim, C0);
    v[index] = Complex64::new(1.0, 0.0);
    v
}

/// Haar-random pure state.
pub fn random_state<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let v = StateVector::from_fn(dim, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    normalized(&v).expect("Gaussian vector is non-zero")
}

pub fn normalized(v: &StateVector) -> Option<StateVector> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v.unscale(n))
}

/// `1 − |⟨a|b⟩|²/(‖a‖²‖b‖²)`, insensitive to global phase.
pub fn fidelity_error(a: &StateVector, b: &StateVector) -> f64 {
    let overlap = a.dotc(b).norm_sqr();
    (1.0 - overlap / (a.norm_squared() * b.norm_squared())).max(0.0)
}

/// `min_φ ‖a − e^{iφ} b‖` for unit vectors.
///
/// Computed from the aligned difference rather than `√(2 − 2|⟨a|b⟩|)`, which
/// cannot resolve distances below about `1e-8`.
pub fn phase_aligned_distance(a: &StateVector, b: &StateVector) -> f64 {
    let overlap = b.dotc(a);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    (a - b * phase).norm()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 6 {
        return Err(invalid(format!(
            "slope fit needs at least 6 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid("slope fit needs positive data"));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs distinct abscissae"));
    }
    Ok(sxy / sxx)
}

/// Default window of measured errors used for slope fits: above the
/// double-precision floor, below the pre-asymptotic regime.
pub const FIT_WINDOW: (f64, f64) = (1e-10, 1e-3);

/// Slope over the points whose error lies inside `window`.
pub fn windowed_slope(points: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let kept: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, y)| y >= window.0 && y <= window.1)
        .collect();
    loglog_slope(&kept)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
