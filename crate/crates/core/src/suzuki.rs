//! Lie–Trotter–Suzuki product formulas as explicit exponential schedules.
//!
//! `S_1(t)` applies every term for `t/2` in forward order and then again in
//! reverse order. Higher orders follow the fractal recursion
//! `S_χ(t) = S_{χ−1}(s t)² S_{χ−1}((1−4s) t) S_{χ−1}(s t)²` with
//! `s = s_{χ−1} = (4 − 4^{1/(2χ−1)})^{−1}`.
//!
//! Adjacent exponentials of the same term are kept separate so a formula of
//! order `2χ` over `m` terms always has exactly `2m·5^{χ−1}` steps; see
//! [`ProductFormula::merged`] for the compacted form.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::numerics::{DenseOperator, TermList};

/// One factor `e^{−iH_j τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpStep {
    /// 1-based index `j` of the term.
    pub term_index: usize,
    pub duration: f64,
}

/// An ordered product of term exponentials approximating `e^{−iHt}`.
///
/// Steps are listed in application order: the first step acts on the state first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FormulaRecord")]
pub struct ProductFormula {
    steps: Vec<ExpStep>,
    chi: usize,
    base_time: f64,
    n_terms: usize,
}

#[derive(Deserialize)]
struct FormulaRecord {
    steps: Vec<ExpStep>,
    chi: usize,
    base_time: f64,
    n_terms: usize,
}

impl TryFrom<FormulaRecord> for ProductFormula {
    type Error = LabError;

    fn try_from(r: FormulaRecord) -> Result<Self> {
        ProductFormula::from_steps(r.steps, r.chi, r.base_time, r.n_terms)
    }
}

impl ProductFormula {
    /// Wraps an explicit schedule. Term indices must lie in `1..=n_terms`.
    pub fn from_steps(
        steps: Vec<ExpStep>,
        chi: usize,
        base_time: f64,
        n_terms: usize,
    ) -> Result<Self> {
        if let Some(bad) = steps
            .iter()
            .find(|s| s.term_index == 0 || s.term_index > n_terms)
        {
            return Err(invalid(format!(
                "term index {} outside 1..={n_terms}",
                bad.term_index
            )));
        }
        if steps.iter().any(|s| !s.duration.is_finite()) || !base_time.is_finite() {
            return Err(invalid("durations must be finite"));
        }
        Ok(ProductFormula {
            steps,
            chi,
            base_time,
            n_terms,
        })
    }

    pub fn steps(&self) -> &[ExpStep] {
        &self.steps
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn base_time(&self) -> f64 {
        self.base_time
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// True when the step sequence reads the same backwards.
    pub fn is_palindromic(&self) -> bool {
        let n = self.steps.len();
        (0..n / 2).all(|i| self.steps[i] == self.steps[n - 1 - i])
    }

    /// Total signed duration applied to each term, indexed from term 1.
    pub fn duration_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_terms];
        for s in &self.steps {
            sums[s.term_index - 1] += s.duration;
        }
        sums
    }

    /// The same formula with adjacent same-term exponentials fused.
    pub fn merged(&self) -> ProductFormula {
        let mut steps: Vec<ExpStep> = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            match steps.last_mut() {
                Some(last) if last.term_index == s.term_index => last.duration += s.duration,
                _ => steps.push(*s),
            }
        }
        ProductFormula {
            steps,
            ..self.clone()
        }
    }

    /// The formula with every duration negated, i.e. `S(−t)`.
    pub fn reversed_time(&self) -> ProductFormula {
        ProductFormula {
            steps: self
                .steps
                .iter()
                .map(|s| ExpStep {
                    term_index: s.term_index,
                    duration: -s.duration,
                })
                .collect(),
            base_time: -self.base_time,
            ..self.clone()
        }
    }
}

/// `S_1(t)`: `2m` half-steps, forward then reverse.
pub fn build_s1(m: usize, t: f64) -> Result<ProductFormula> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let half = t / 2.0;
    let steps = (1..=m)
        .chain((1..=m).rev())
        .map(|j| ExpStep {
            term_index: j,
            duration: half,
        })
        .collect();
    ProductFormula::from_steps(steps, 1, t, m)
}

/// `s_p = (4 − 4^{1/(2p+1)})^{−1}`.
pub fn suzuki_fraction(p: usize) -> f64 {
    1.0 / (4.0 - 4f64.powf(1.0 / (2 * p + 1) as f64))
}

/// `S_χ(t)`, with exactly `2m·5^{χ−1}` steps.
pub fn build_schi(m: usize, chi: usize, t: f64) -> Result<ProductFormula> {
    if chi == 0 {
        return Err(invalid("chi must be at least 1"));
    }
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let mut steps = Vec::with_capacity(2 * m * 5usize.pow(chi as u32 - 1));
    push_schi(&mut steps, m, chi, t);
    ProductFormula::from_steps(steps, chi, t, m)
}

fn push_schi(out: &mut Vec<ExpStep>, m: usize, chi: usize, t: f64) {
    if chi == 1 {
        let half = t / 2.0;
        out.extend((1..=m).chain((1..=m).rev()).map(|j| ExpStep {
            term_index: j,
            duration: half,
        }));
        return;
    }
    let s = suzuki_fraction(chi - 1);
    let outer = s * t;
    let inner = (1.0 - 4.0 * s) * t;
    for tau in [outer, outer, inner, outer, outer] {
        push_schi(out, m, chi - 1, tau);
    }
}

/// Largest step relative to the slice length when the formula is one of `p`
/// equal slices of an evolution of length `p · base_time`.
///
/// Equals `max_j |τ_j| / base_time`, hence independent of `p`.
pub fn max_rescale_ratio(formula: &ProductFormula, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(invalid("p must be at least 1"));
    }
    if formula.base_time == 0.0 {
        return Ok(0.0);
    }
    let slice = (formula.base_time * p as f64) / p as f64;
    Ok(formula
        .steps
        .iter()
        .map(|s| s.duration.abs() / slice.abs())
        .fold(0.0, f64::max))
}

/// Ordered product of the schedule's exponentials.
pub fn evaluate(formula: &ProductFormula, terms: &TermList) -> Result<DenseOperator> {
    if formula.n_terms != terms.m() {
        return Err(LabError::DimensionMismatch {
            expected: terms.m(),
            found: formula.n_terms,
        });
    }
    let d = terms.dim();
    let mut u = DenseOperator::identity(d, d);
    for s in &formula.steps {
        u = terms.term_exp(s.term_index, s.duration)? * u;
    }
    Ok(u)
}
