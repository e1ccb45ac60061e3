//! Exact microcanonical ground truth at desk scale.
//!
//! Enumerates every binary matrix with given row and column sums that is 0 on
//! prohibited cells and 1 on required cells. Required cells are committed up
//! front (their row and column margins are decremented) and the residual
//! problem is enumerated over the free cells by row-wise backtracking with
//! margin-feasibility pruning.

use ndarray::Array2;

use crate::bipartite::{CellState, ConstraintMask, DegreeSequence, IncidenceMatrix};
use crate::error::{Axis, Error, Result};
use crate::nullmodel::ProbabilityMatrix;

/// Margins and constraints defining a space of incidence matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSpec {
    rows: DegreeSequence,
    cols: DegreeSequence,
    mask: ConstraintMask,
}

impl SpaceSpec {
    pub fn new(rows: DegreeSequence, cols: DegreeSequence, mask: ConstraintMask) -> Result<Self> {
        let dim = (rows.len(), cols.len());
        if dim.0 == 0 || dim.1 == 0 {
            return Err(Error::EmptyDimension);
        }
        if mask.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: mask.dim(),
            });
        }
        if rows.total() != cols.total() {
            return Err(Error::MarginTotalMismatch {
                rows: rows.total(),
                cols: cols.total(),
            });
        }
        Ok(Self { rows, cols, mask })
    }

    /// Unconstrained space.
    pub fn free(rows: &[u32], cols: &[u32]) -> Result<Self> {
        Self::new(
            DegreeSequence::rows(rows.to_vec()),
            DegreeSequence::cols(cols.to_vec()),
            ConstraintMask::free(rows.len(), cols.len()),
        )
    }

    /// The space `b` belongs to under `mask`.
    pub fn of_matrix(b: &IncidenceMatrix, mask: &ConstraintMask) -> Result<Self> {
        Self::new(b.row_sums(), b.col_sums(), mask.clone())
    }

    pub fn with_cell(mut self, row: usize, col: usize, state: CellState) -> Self {
        self.mask.set(row, col, state);
        self
    }

    pub fn rows(&self) -> &DegreeSequence {
        &self.rows
    }

    pub fn cols(&self) -> &DegreeSequence {
        &self.cols
    }

    pub fn mask(&self) -> &ConstraintMask {
        &self.mask
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }
}

/// Refuses specs too large to enumerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLimits {
    pub max_rows: usize,
    pub max_cols: usize,
    /// Upper bound on the product of per-row choice counts.
    pub max_search_width: f64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_rows: 6,
            max_cols: 6,
            max_search_width: 1e8,
        }
    }
}

/// Cardinality and exact inclusion probabilities of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSummary {
    pub cardinality: u128,
    /// Number of members with a 1 in each cell.
    pub cell_counts: Array2<u128>,
    /// `cell_counts / cardinality`; all zeros for an empty space.
    pub true_q: Array2<f64>,
}

impl SpaceSummary {
    pub fn is_empty(&self) -> bool {
        self.cardinality == 0
    }
}

/// Residual problem after committing required cells.
struct Residual {
    row_need: Vec<u32>,
    col_need: Vec<u32>,
    allowed: Array2<bool>,
    base: Array2<u8>,
}

fn residual(spec: &SpaceSpec) -> Option<Residual> {
    let (r, c) = spec.dim();
    let mut row_need: Vec<i64> = spec.rows.values().iter().map(|&v| i64::from(v)).collect();
    let mut col_need: Vec<i64> = spec.cols.values().iter().map(|&v| i64::from(v)).collect();
    let mut allowed = Array2::from_elem((r, c), false);
    let mut base = Array2::<u8>::zeros((r, c));
    for ((i, k), &state) in spec.mask.states().indexed_iter() {
        match state {
            CellState::Free => allowed[[i, k]] = true,
            CellState::Prohibited => {}
            CellState::Required => {
                base[[i, k]] = 1;
                row_need[i] -= 1;
                col_need[k] -= 1;
            }
        }
    }
    if row_need.iter().chain(&col_need).any(|&v| v < 0) {
        return None;
    }
    Some(Residual {
        row_need: row_need.into_iter().map(|v| v as u32).collect(),
        col_need: col_need.into_iter().map(|v| v as u32).collect(),
        allowed,
        base,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

fn check_limits(spec: &SpaceSpec, res: Option<&Residual>, limits: &OracleLimits) -> Result<()> {
    let (r, c) = spec.dim();
    if r > limits.max_rows || c > limits.max_cols {
        return Err(Error::SpaceTooLarge(format!(
            "{r}x{c} exceeds the {}x{} enumeration bound",
            limits.max_rows, limits.max_cols
        )));
    }
    if let Some(res) = res {
        let width: f64 = (0..r)
            .map(|i| {
                let avail = res.allowed.row(i).iter().filter(|&&a| a).count();
                binomial(avail, res.row_need[i] as usize).max(1.0)
            })
            .product();
        if width > limits.max_search_width {
            return Err(Error::SpaceTooLarge(format!(
                "estimated search width {width:.3e} exceeds {:.3e}",
                limits.max_search_width
            )));
        }
    }
    Ok(())
}

struct Search<'a, F> {
    res: &'a Residual,
    /// Allowed cells in rows `i..` per column, for capacity pruning.
    allowed_below: Array2<u32>,
    col_left: Vec<u32>,
    current: Array2<u8>,
    visit: F,
    count: u128,
}

impl<F: FnMut(&Array2<u8>)> Search<'_, F> {
    fn row(&mut self, i: usize) {
        let (r, _) = self.current.dim();
        if i == r {
            self.count += 1;
            (self.visit)(&self.current);
            return;
        }
        let need = self.res.row_need[i];
        self.place(i, 0, need);
    }

    fn place(&mut self, i: usize, from: usize, left: u32) {
        let c = self.col_left.len();
        if left == 0 {
            // Every column must still fit in the rows below.
            let feasible = (0..c).all(|k| self.col_left[k] <= self.allowed_below[[i + 1, k]]);
            if feasible {
                self.row(i + 1);
            }
            return;
        }
        let open = (from..c)
            .filter(|&k| self.res.allowed[[i, k]] && self.col_left[k] > 0)
            .count() as u32;
        if open < left {
            return;
        }
        for k in from..c {
            if !self.res.allowed[[i, k]] || self.col_left[k] == 0 {
                continue;
            }
            self.col_left[k] -= 1;
            self.current[[i, k]] = 1;
            self.place(i, k + 1, left - 1);
            self.current[[i, k]] = self.res.base[[i, k]];
            self.col_left[k] += 1;
        }
    }
}

/// Calls `visit` on every member of the space; returns the cardinality.
pub fn for_each_member<F>(spec: &SpaceSpec, limits: &OracleLimits, visit: F) -> Result<u128>
where
    F: FnMut(&Array2<u8>),
{
    let res = residual(spec);
    check_limits(spec, res.as_ref(), limits)?;
    let Some(res) = res else {
        return Ok(0);
    };
    let (r, c) = spec.dim();
    let mut allowed_below = Array2::<u32>::zeros((r + 1, c));
    for i in (0..r).rev() {
        for k in 0..c {
            allowed_below[[i, k]] = allowed_below[[i + 1, k]] + u32::from(res.allowed[[i, k]]);
        }
    }
    if (0..c).any(|k| res.col_need[k] > allowed_below[[0, k]]) {
        return Ok(0);
    }
    let mut search = Search {
        res: &res,
        allowed_below,
        col_left: res.col_need.clone(),
        current: res.base.clone(),
        visit,
        count: 0,
    };
    search.row(0);
    Ok(search.count)
}

/// Enumerates the space with default [`OracleLimits`].
pub fn enumerate_space(spec: &SpaceSpec) -> Result<SpaceSummary> {
    enumerate_space_with(spec, &OracleLimits::default())
}

pub fn enumerate_space_with(spec: &SpaceSpec, limits: &OracleLimits) -> Result<SpaceSummary> {
    let mut cell_counts = Array2::<u128>::zeros(spec.dim());
    let cardinality = for_each_member(spec, limits, |m| {
        cell_counts.zip_mut_with(m, |count, &v| *count += u128::from(v));
    })?;
    let true_q = if cardinality == 0 {
        Array2::zeros(spec.dim())
    } else {
        cell_counts.mapv(|n| n as f64 / cardinality as f64)
    };
    Ok(SpaceSummary {
        cardinality,
        cell_counts,
        true_q,
    })
}

/// First member of the space in enumeration order, if any.
pub fn first_member(spec: &SpaceSpec, limits: &OracleLimits) -> Result<Option<Array2<u8>>> {
    let mut first = None;
    for_each_member(spec, limits, |m| {
        if first.is_none() {
            first = Some(m.clone());
        }
    })?;
    Ok(first)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDeviation {
    pub row: usize,
    pub col: usize,
    pub estimated: f64,
    pub truth: f64,
    pub deviation: f64,
}

/// Fixed-width histogram over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, bins: usize) -> Self {
        let edges = (0..=bins).map(|b| b as f64 / bins as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let b = ((v * bins as f64).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

pub const DEVIATION_BINS: usize = 20;

/// Absolute deviations between estimated and true probabilities on free cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub cells: Vec<CellDeviation>,
    pub mean: f64,
    pub max: f64,
    pub histogram: Histogram,
}

pub fn q_deviation(
    estimated: &ProbabilityMatrix,
    truth: &SpaceSummary,
    mask: &ConstraintMask,
) -> Result<DeviationReport> {
    if truth.is_empty() {
        return Err(Error::EmptySpace);
    }
    let dim = truth.true_q.dim();
    for found in [estimated.dim(), mask.dim()] {
        if found != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found,
            });
        }
    }
    let cells: Vec<CellDeviation> = truth
        .true_q
        .indexed_iter()
        .filter(|((i, k), _)| mask.is_free(*i, *k))
        .map(|((row, col), &t)| {
            let e = estimated.get(row, col);
            CellDeviation {
                row,
                col,
                estimated: e,
                truth: t,
                deviation: (e - t).abs(),
            }
        })
        .collect();
    let n = cells.len().max(1) as f64;
    let mean = cells.iter().map(|c| c.deviation).sum::<f64>() / n;
    let max = cells.iter().map(|c| c.deviation).fold(0.0, f64::max);
    let histogram = Histogram::new(cells.iter().map(|c| c.deviation), DEVIATION_BINS);
    Ok(DeviationReport {
        cells,
        mean,
        max,
        histogram,
    })
}

/// Fraction of space members whose projected weight at `(i, j)` is at least
/// the weight observed in `b`.
pub fn pvalue_oracle(b: &IncidenceMatrix, spec: &SpaceSpec, i: usize, j: usize) -> Result<f64> {
    pvalue_oracle_with(b, spec, i, j, &OracleLimits::default())
}

pub fn pvalue_oracle_with(
    b: &IncidenceMatrix,
    spec: &SpaceSpec,
    i: usize,
    j: usize,
    limits: &OracleLimits,
) -> Result<f64> {
    if b.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            found: b.dim(),
        });
    }
    let r = b.n_agents();
    for index in [i, j] {
        if index >= r {
            return Err(Error::IndexOutOfRange {
                axis: Axis::Row,
                index,
                size: r,
            });
        }
    }
    if i == j {
        return Err(Error::SelfPair(i));
    }
    let observed = b.project().weight(i, j);
    let mut hits: u128 = 0;
    let total = for_each_member(spec, limits, |m| {
        let w: u32 = m
            .row(i)
            .iter()
            .zip(m.row(j).iter())
            .map(|(&a, &b)| u32::from(a & b))
            .sum();
        if w >= observed {
            hits += 1;
        }
    })?;
    if total == 0 {
        return Err(Error::EmptySpace);
    }
    Ok(hits as f64 / total as f64)
}
