//! Bipartite data model: incidence matrix, margins, constraint mask and the
//! weighted one-mode projection.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use ndarray::Array2;

use crate::error::{Axis, Error, Result};

/// Binary agent × artifact incidence matrix with labelled rows and columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    agents: Vec<String>,
    artifacts: Vec<String>,
    cells: Array2<u8>,
}

impl IncidenceMatrix {
    pub fn new(agents: Vec<String>, artifacts: Vec<String>, cells: Array2<u8>) -> Result<Self> {
        if agents.is_empty() || artifacts.is_empty() {
            return Err(Error::EmptyDimension);
        }
        let expected = (agents.len(), artifacts.len());
        if cells.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: cells.dim(),
            });
        }
        check_unique(&agents, Axis::Row)?;
        check_unique(&artifacts, Axis::Column)?;
        if let Some(((row, col), &value)) = cells.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(Error::NonBinaryCell { row, col, value });
        }
        Ok(Self {
            agents,
            artifacts,
            cells,
        })
    }

    /// Builds a matrix labelled by index (`"0"`, `"1"`, ...) on both axes.
    pub fn from_cells(cells: Array2<u8>) -> Result<Self> {
        let (r, c) = cells.dim();
        Self::new(index_labels(r), index_labels(c), cells)
    }

    /// Convenience constructor from nested rows, labelled by index.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut flat = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: (r, c),
                    found: (r, row.len()),
                });
            }
            flat.extend_from_slice(row);
        }
        let cells = Array2::from_shape_vec((r, c), flat).map_err(|_| Error::EmptyDimension)?;
        Self::from_cells(cells)
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_artifacts(&self) -> usize {
        self.artifacts.len()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.cells.dim()
    }

    pub fn agent_labels(&self) -> &[String] {
        &self.agents
    }

    pub fn artifact_labels(&self) -> &[String] {
        &self.artifacts
    }

    pub fn cells(&self) -> &Array2<u8> {
        &self.cells
    }

    pub fn get(&self, agent: usize, artifact: usize) -> u8 {
        self.cells[[agent, artifact]]
    }

    pub fn agent_index(&self, label: &str) -> Option<usize> {
        self.agents.iter().position(|a| a == label)
    }

    pub fn artifact_index(&self, label: &str) -> Option<usize> {
        self.artifacts.iter().position(|a| a == label)
    }

    /// Agent degrees r_i.
    pub fn row_sums(&self) -> DegreeSequence {
        let values = self
            .cells
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&v| u32::from(v)).sum())
            .collect();
        DegreeSequence::new(values, Axis::Row)
    }

    /// Artifact degrees c_k.
    pub fn col_sums(&self) -> DegreeSequence {
        let values = self
            .cells
            .columns()
            .into_iter()
            .map(|col| col.iter().map(|&v| u32::from(v)).sum())
            .collect();
        DegreeSequence::new(values, Axis::Column)
    }

    pub fn transpose(&self) -> IncidenceMatrix {
        IncidenceMatrix {
            agents: self.artifacts.clone(),
            artifacts: self.agents.clone(),
            cells: self.cells.t().to_owned(),
        }
    }

    /// Weighted one-mode projection `P = B Bᵀ`.
    pub fn project(&self) -> Projection {
        let r = self.n_agents();
        // Row supports make the product proportional to the number of ones.
        let support: Vec<Vec<usize>> = self
            .cells
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 1)
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        let mut weights = Array2::<u32>::zeros((r, r));
        for i in 0..r {
            weights[[i, i]] = support[i].len() as u32;
            for j in (i + 1)..r {
                let w = support[i]
                    .iter()
                    .filter(|&&k| self.cells[[j, k]] == 1)
                    .count() as u32;
                weights[[i, j]] = w;
                weights[[j, i]] = w;
            }
        }
        Projection {
            agents: self.agents.clone(),
            weights,
        }
    }

    /// Set of `(agent, artifact)` label pairs holding a 1.
    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.cells
            .indexed_iter()
            .filter(|(_, &v)| v == 1)
            .map(|((i, k), _)| (self.agents[i].clone(), self.artifacts[k].clone()))
            .collect()
    }

    pub fn n_edges(&self) -> usize {
        self.cells.iter().filter(|&&v| v == 1).count()
    }
}

fn index_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn check_unique(labels: &[String], axis: Axis) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(Error::DuplicateLabel {
                axis,
                label: label.clone(),
            });
        }
    }
    Ok(())
}

/// Row or column margins of an incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    values: Vec<u32>,
    axis: Axis,
}

impl DegreeSequence {
    pub fn new(values: Vec<u32>, axis: Axis) -> Self {
        Self { values, axis }
    }

    pub fn rows(values: Vec<u32>) -> Self {
        Self::new(values, Axis::Row)
    }

    pub fn cols(values: Vec<u32>) -> Self {
        Self::new(values, Axis::Column)
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| u64::from(v)).sum()
    }
}

impl std::ops::Index<usize> for DegreeSequence {
    type Output = u32;

    fn index(&self, i: usize) -> &u32 {
        &self.values[i]
    }
}

/// Per-cell edge constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CellState {
    #[default]
    Free,
    /// Structural zero: the cell is 0 in every member of the null ensemble.
    Prohibited,
    /// The cell is 1 in every member of the null ensemble.
    Required,
}

impl CellState {
    pub fn as_str(self) -> &'static str {
        match self {
            CellState::Free => "free",
            CellState::Prohibited => "prohibited",
            CellState::Required => "required",
        }
    }
}

impl fmt::Display for CellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CellState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "free" => Ok(CellState::Free),
            "prohibited" => Ok(CellState::Prohibited),
            "required" => Ok(CellState::Required),
            other => Err(format!(
                "unknown constraint {other:?} (expected prohibited or required)"
            )),
        }
    }
}

/// Constraint states for every cell of an incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintMask {
    states: Array2<CellState>,
}

impl ConstraintMask {
    /// All-free mask.
    pub fn free(rows: usize, cols: usize) -> Self {
        Self {
            states: Array2::from_elem((rows, cols), CellState::Free),
        }
    }

    pub fn free_like(b: &IncidenceMatrix) -> Self {
        let (r, c) = b.dim();
        Self::free(r, c)
    }

    pub fn from_states(states: Array2<CellState>) -> Self {
        Self { states }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.states.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> CellState {
        self.states[[row, col]]
    }

    pub fn set(&mut self, row: usize, col: usize, state: CellState) {
        self.states[[row, col]] = state;
    }

    pub fn with(mut self, row: usize, col: usize, state: CellState) -> Self {
        self.set(row, col, state);
        self
    }

    pub fn states(&self) -> &Array2<CellState> {
        &self.states
    }

    pub fn is_free(&self, row: usize, col: usize) -> bool {
        self.states[[row, col]] == CellState::Free
    }

    pub fn count(&self, state: CellState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    pub fn is_all_free(&self) -> bool {
        self.states.iter().all(|&s| s == CellState::Free)
    }

    /// Constrained cells in row-major order.
    pub fn constrained(&self) -> impl Iterator<Item = (usize, usize, CellState)> + '_ {
        self.states
            .indexed_iter()
            .filter(|(_, &s)| s != CellState::Free)
            .map(|((i, k), &s)| (i, k, s))
    }

    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let (r, c) = self.dim();
        Self {
            states: Array2::from_shape_fn((r, c), |(i, k)| self.states[[order[i], k]]),
        }
    }
}

/// A cell of `B` that contradicts its constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub state: CellState,
    pub value: u8,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}) = {} but cell is {}",
            self.row, self.col, self.value, self.state
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.passes() {
            Ok(())
        } else {
            Err(Error::ConstraintViolation(self.violations))
        }
    }
}

/// Checks that `b` is 0 on every prohibited cell and 1 on every required cell.
///
/// A dimension mismatch is an `Err`; constraint violations are listed in the
/// returned report.
pub fn validate(b: &IncidenceMatrix, mask: &ConstraintMask) -> Result<ValidationReport> {
    if b.dim() != mask.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: mask.dim(),
        });
    }
    let violations = mask
        .constrained()
        .filter_map(|(row, col, state)| {
            let value = b.get(row, col);
            let bad = match state {
                CellState::Prohibited => value != 0,
                CellState::Required => value != 1,
                CellState::Free => false,
            };
            bad.then_some(Violation {
                row,
                col,
                state,
                value,
            })
        })
        .collect();
    Ok(ValidationReport { violations })
}

/// Weighted agent × agent co-occurrence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    agents: Vec<String>,
    weights: Array2<u32>,
}

impl Projection {
    pub fn agent_labels(&self) -> &[String] {
        &self.agents
    }

    pub fn weights(&self) -> &Array2<u32> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.weights[[i, j]]
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }
}
