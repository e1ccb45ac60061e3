//! Canonical-ensemble probability matrices estimated by logistic regression.
//!
//! Each cell's probability of holding a 1 is modelled as
//! `logistic(β₀ + β₁·r_i + β₂·c_k)` with `r_i`, `c_k` the observed margins of
//! `B`. The maximum-likelihood coefficients are found by damped Newton
//! iteration (IRLS) over the free cells only; prohibited cells are fixed at 0
//! and required cells at 1.
//!
//! Cells sharing a `(r_i, c_k)` pair have identical predictors, so the fit runs
//! on binomial groups instead of individual cells.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;

use crate::bipartite::{validate, CellState, ConstraintMask, DegreeSequence, IncidenceMatrix};
use crate::error::{Error, Result};

/// Null model used to build a probability matrix or backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    /// Stochastic degree sequence model: edge constraints ignored.
    Sdsm,
    /// Stochastic degree sequence model with edge constraints.
    SdsmEc,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Sdsm => "sdsm",
            Model::SdsmEc => "sdsm-ec",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sdsm" => Ok(Model::Sdsm),
            "sdsm-ec" => Ok(Model::SdsmEc),
            other => Err(format!("unknown model {other:?} (expected sdsm or sdsm-ec)")),
        }
    }
}

/// Per-cell Bernoulli parameters of the null ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    values: Array2<f64>,
    provenance: Model,
}

impl ProbabilityMatrix {
    /// Wraps raw probabilities; every entry must lie in [0, 1].
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if let Some(&p) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self {
            values,
            provenance: Model::Sdsm,
        })
    }

    pub fn with_provenance(mut self, provenance: Model) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[[row, col]]
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn provenance(&self) -> Model {
        self.provenance
    }
}

/// Stopping rules for [`fit_logistic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once every coefficient moves less than this in one step.
    pub coef_tolerance: f64,
    /// Converged once every score component is below this in magnitude.
    pub score_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            coef_tolerance: 1e-10,
            score_tolerance: 1e-12,
        }
    }
}

/// Fitted probabilities are kept this far away from 0 and 1.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Logistic-regression coefficients on `(1, r_i, c_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Every free response is identical; coefficients are not identified and
    /// predictions equal `mean_response` (0 or 1).
    pub degenerate: bool,
    /// Mean of the free responses.
    pub mean_response: f64,
    /// Number of cells the regression was fitted over.
    pub n_fit: usize,
}

impl FitResult {
    /// Errors if the iteration limit was hit before convergence.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
            })
        }
    }

    /// Fitted probability for a free cell with margins `r`, `c`.
    pub fn probability(&self, r: u32, c: u32) -> f64 {
        if self.degenerate {
            return self.mean_response;
        }
        let eta = self.beta0 + self.beta1 * f64::from(r) + self.beta2 * f64::from(c);
        logistic(eta).clamp(PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Free cells grouped by predictor values.
struct Group {
    x: [f64; 3],
    trials: f64,
    successes: f64,
}

fn free_groups(b: &IncidenceMatrix, mask: &ConstraintMask) -> Vec<Group> {
    let rows = b.row_sums();
    let cols = b.col_sums();
    let mut counts: BTreeMap<(u32, u32), (u64, u64)> = BTreeMap::new();
    for ((i, k), &v) in b.cells().indexed_iter() {
        if mask.is_free(i, k) {
            let entry = counts.entry((rows[i], cols[k])).or_default();
            entry.0 += 1;
            entry.1 += u64::from(v);
        }
    }
    counts
        .into_iter()
        .map(|((r, c), (n, s))| Group {
            x: [1.0, f64::from(r), f64::from(c)],
            trials: n as f64,
            successes: s as f64,
        })
        .collect()
}

fn log_likelihood(groups: &[Group], beta: &[f64; 3]) -> f64 {
    groups
        .iter()
        .map(|g| {
            let eta = dot(&g.x, beta);
            g.successes * eta - g.trials * softplus(eta)
        })
        .sum()
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Score vector and observed information at `beta`.
fn score_and_information(groups: &[Group], beta: &[f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut score = [0.0; 3];
    let mut info = [[0.0; 3]; 3];
    for g in groups {
        let p = logistic(dot(&g.x, beta));
        let resid = g.successes - g.trials * p;
        let w = g.trials * p * (1.0 - p);
        for a in 0..3 {
            score[a] += g.x[a] * resid;
            for c in 0..=a {
                info[a][c] += w * g.x[a] * g.x[c];
            }
        }
    }
    for a in 0..3 {
        for c in (a + 1)..3 {
            info[a][c] = info[c][a];
        }
    }
    (score, info)
}

/// Solves `h x = g` for symmetric positive semi-definite `h` via LDLᵀ.
///
/// Pivots that vanish relative to their diagonal are dropped, which gives a
/// minimal solution when predictors are collinear over the fit set (for
/// instance a margin that is constant over the free cells).
fn solve_psd(h: &[[f64; 3]; 3], g: &[f64; 3]) -> [f64; 3] {
    let mut l = [[0.0; 3]; 3];
    let mut d = [0.0; 3];
    let mut keep = [false; 3];
    for j in 0..3 {
        let mut dj = h[j][j];
        for m in 0..j {
            dj -= l[j][m] * l[j][m] * d[m];
        }
        keep[j] = h[j][j] > 0.0 && dj > 1e-10 * h[j][j];
        d[j] = if keep[j] { dj } else { 0.0 };
        l[j][j] = 1.0;
        for i in (j + 1)..3 {
            if keep[j] {
                let mut v = h[i][j];
                for m in 0..j {
                    v -= l[i][m] * l[j][m] * d[m];
                }
                l[i][j] = v / dj;
            }
        }
    }
    let mut z = [0.0; 3];
    for i in 0..3 {
        z[i] = g[i];
        for m in 0..i {
            z[i] -= l[i][m] * z[m];
        }
    }
    for i in 0..3 {
        z[i] = if keep[i] { z[i] / d[i] } else { 0.0 };
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        x[i] = z[i];
        for m in (i + 1)..3 {
            x[i] -= l[m][i] * x[m];
        }
        if !keep[i] {
            x[i] = 0.0;
        }
    }
    x
}

/// Maximum-likelihood fit over the free cells of `mask` with default options.
pub fn fit_logistic(b: &IncidenceMatrix, mask: &ConstraintMask) -> Result<FitResult> {
    fit_logistic_with(b, mask, &FitOptions::default())
}

pub fn fit_logistic_with(
    b: &IncidenceMatrix,
    mask: &ConstraintMask,
    options: &FitOptions,
) -> Result<FitResult> {
    if b.dim() != mask.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: mask.dim(),
        });
    }
    let groups = free_groups(b, mask);
    let trials: f64 = groups.iter().map(|g| g.trials).sum();
    let successes: f64 = groups.iter().map(|g| g.successes).sum();
    if trials == 0.0 {
        return Err(Error::NoFreeCells);
    }
    let n_fit = trials as usize;
    let mean = successes / trials;
    if successes == 0.0 || successes == trials {
        return Ok(FitResult {
            beta0: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            converged: true,
            iterations: 0,
            degenerate: true,
            mean_response: mean,
            n_fit,
        });
    }

    let mut beta = [(mean / (1.0 - mean)).ln(), 0.0, 0.0];
    let mut ll = log_likelihood(&groups, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        let (score, info) = score_and_information(&groups, &beta);
        if score.iter().all(|s| s.abs() < options.score_tolerance) {
            converged = true;
            break;
        }
        iterations += 1;
        let step = solve_psd(&info, &score);

        // Step halving keeps the likelihood from decreasing.
        let mut scale = 1.0;
        let mut candidate;
        let mut candidate_ll;
        loop {
            candidate = [
                beta[0] + scale * step[0],
                beta[1] + scale * step[1],
                beta[2] + scale * step[2],
            ];
            candidate_ll = log_likelihood(&groups, &candidate);
            if candidate_ll >= ll - 1e-12 * (1.0 + ll.abs()) || scale < 1e-10 {
                break;
            }
            scale *= 0.5;
        }
        let change = (0..3)
            .map(|a| (candidate[a] - beta[a]).abs())
            .fold(0.0, f64::max);
        beta = candidate;
        ll = candidate_ll;
        if change < options.coef_tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "logistic fit did not converge after {iterations} iterations \
             (possible separation); fitted probabilities are clamped"
        );
    }
    Ok(FitResult {
        beta0: beta[0],
        beta1: beta[1],
        beta2: beta[2],
        converged,
        iterations,
        degenerate: false,
        mean_response: mean,
        n_fit,
    })
}

/// Probability matrix from a fit: fitted values on free cells, 0 on prohibited
/// cells and 1 on required cells.
pub fn predict_q(
    fit: &FitResult,
    rows: &DegreeSequence,
    cols: &DegreeSequence,
    mask: &ConstraintMask,
) -> Result<ProbabilityMatrix> {
    let dim = (rows.len(), cols.len());
    if mask.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: mask.dim(),
        });
    }
    let values = Array2::from_shape_fn(dim, |(i, k)| match mask.get(i, k) {
        CellState::Free => fit.probability(rows[i], cols[k]),
        CellState::Prohibited => 0.0,
        CellState::Required => 1.0,
    });
    let provenance = if mask.is_all_free() {
        Model::Sdsm
    } else {
        Model::SdsmEc
    };
    Ok(ProbabilityMatrix { values, provenance })
}

/// Fits and predicts in one step. `b` must satisfy `mask`.
pub fn estimate_q(b: &IncidenceMatrix, mask: &ConstraintMask) -> Result<ProbabilityMatrix> {
    validate(b, mask)?.into_result()?;
    let fit = fit_logistic(b, mask)?;
    predict_q(&fit, &b.row_sums(), &b.col_sums(), mask)
}

/// Score-equation residuals over free cells:
/// `Σ (Q − B)`, `Σ r_i (Q − B)` and `Σ c_k (Q − B)`.
///
/// All three vanish at the maximum-likelihood estimate.
pub fn score_residuals(b: &IncidenceMatrix, mask: &ConstraintMask, q: &ProbabilityMatrix) -> [f64; 3] {
    let rows = b.row_sums();
    let cols = b.col_sums();
    let mut out = [0.0; 3];
    for ((i, k), &v) in b.cells().indexed_iter() {
        if mask.is_free(i, k) {
            let d = q.get(i, k) - f64::from(v);
            out[0] += d;
            out[1] += f64::from(rows[i]) * d;
            out[2] += f64::from(cols[k]) * d;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_bipartite;
    use proptest::prelude::*;

    #[test]
    fn constant_predictors_give_response_mean() {
        let b = IncidenceMatrix::from_rows(&[[1, 0], [0, 1]]).unwrap();
        let q = estimate_q(&b, &ConstraintMask::free(2, 2)).unwrap();
        for &v in q.values() {
            assert!((v - 0.5).abs() < 1e-12, "{v}");
        }
        assert_eq!(q.provenance(), Model::Sdsm);
    }

    #[test]
    fn all_zero_free_cells_are_degenerate() {
        let b = IncidenceMatrix::from_rows(&[[0, 0], [0, 1]]).unwrap();
        let mask = ConstraintMask::free(2, 2).with(1, 1, CellState::Required);
        let fit = fit_logistic(&b, &mask).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.n_fit, 3);
        let q = estimate_q(&b, &mask).unwrap();
        assert_eq!(q.values(), &ndarray::arr2(&[[0.0, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn no_free_cells_is_an_error() {
        let b = IncidenceMatrix::from_rows(&[[0u8]]).unwrap();
        let mask = ConstraintMask::free(1, 1).with(0, 0, CellState::Prohibited);
        assert!(matches!(fit_logistic(&b, &mask), Err(Error::NoFreeCells)));
    }

    #[test]
    fn constrained_cells_are_exact() {
        let b = random_bipartite(5, 6, 0.5, 9).unwrap();
        let mut mask = ConstraintMask::free(5, 6);
        for i in 0..5 {
            let state = if b.get(i, 2) == 1 {
                CellState::Required
            } else {
                CellState::Prohibited
            };
            mask.set(i, 2, state);
        }
        for k in 0..6 {
            if b.get(0, k) == 0 {
                mask.set(0, k, CellState::Prohibited);
            }
        }
        let q = estimate_q(&b, &mask).unwrap();
        assert_eq!(q.provenance(), Model::SdsmEc);
        for (i, k, state) in mask.constrained() {
            let expected = if state == CellState::Required { 1.0 } else { 0.0 };
            assert_eq!(q.get(i, k), expected);
        }
    }

    #[test]
    fn prohibited_column_is_zero() {
        let b = IncidenceMatrix::from_rows(&[[1, 0, 1], [1, 0, 0], [0, 0, 1]]).unwrap();
        let mut mask = ConstraintMask::free(3, 3);
        for i in 0..3 {
            mask.set(i, 1, CellState::Prohibited);
        }
        let q = estimate_q(&b, &mask).unwrap();
        assert!(q.values().column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn required_cell_overrides_coefficients() {
        let fit = FitResult {
            beta0: -50.0,
            beta1: 0.0,
            beta2: 0.0,
            converged: true,
            iterations: 1,
            degenerate: false,
            mean_response: 0.1,
            n_fit: 3,
        };
        let mask = ConstraintMask::free(2, 2).with(0, 1, CellState::Required);
        let q = predict_q(
            &fit,
            &DegreeSequence::rows(vec![1, 1]),
            &DegreeSequence::cols(vec![1, 1]),
            &mask,
        )
        .unwrap();
        assert_eq!(q.get(0, 1), 1.0);
        assert_eq!(q.get(0, 0), PROBABILITY_CLAMP);
        assert!(predict_q(
            &fit,
            &DegreeSequence::rows(vec![1]),
            &DegreeSequence::cols(vec![1, 1]),
            &mask
        )
        .is_err());
    }

    #[test]
    fn all_free_mask_reproduces_unconstrained_fit() {
        let b = random_bipartite(8, 10, 0.35, 1).unwrap();
        let free = ConstraintMask::free(8, 10);
        let fit = fit_logistic(&b, &free).unwrap();
        assert!(fit.converged);
        let q1 = estimate_q(&b, &free).unwrap();
        let q2 = predict_q(&fit, &b.row_sums(), &b.col_sums(), &free).unwrap();
        assert_eq!(q1, q2);
    }

    #[test]
    fn collinear_solver_drops_redundant_direction() {
        // Second and third predictors identical.
        let h = [[4.0, 8.0, 8.0], [8.0, 20.0, 20.0], [8.0, 20.0, 20.0]];
        let g = [1.0, 3.0, 3.0];
        let x = solve_psd(&h, &g);
        assert_eq!(x[2], 0.0);
        let hx: Vec<f64> = h
            .iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        for (a, b) in hx.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn score_equations_hold(r in 3usize..15, c in 3usize..15, d in 0.15f64..0.85, seed in any::<u64>()) {
            let b = random_bipartite(r, c, d, seed).unwrap();
            let mask = ConstraintMask::free_like(&b);
            let fit = fit_logistic(&b, &mask).unwrap();
            let q = predict_q(&fit, &b.row_sums(), &b.col_sums(), &mask).unwrap();
            prop_assert!(q.values().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
            if fit.converged && !fit.degenerate {
                for resid in score_residuals(&b, &mask, &q) {
                    prop_assert!(resid.abs() < 1e-6, "{:?}", fit);
                }
            }
        }

        #[test]
        fn row_permutation_equivariance(r in 2usize..10, c in 2usize..10, d in 0.1f64..0.9, seed in any::<u64>()) {
            let b = random_bipartite(r, c, d, seed).unwrap();
            let order: Vec<usize> = (0..r).rev().collect();
            let permuted = IncidenceMatrix::from_cells(
                Array2::from_shape_fn((r, c), |(i, k)| b.get(order[i], k))
            ).unwrap();
            let mask = ConstraintMask::free(r, c);
            let q = estimate_q(&b, &mask).unwrap();
            let qp = estimate_q(&permuted, &mask.permute_rows(&order)).unwrap();
            for i in 0..r {
                for k in 0..c {
                    prop_assert!((qp.get(i, k) - q.get(order[i], k)).abs() < 1e-9);
                }
            }
        }
    }
}
