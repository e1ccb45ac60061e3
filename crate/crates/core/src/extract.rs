//! Backbone extraction: every projected edge weight is tested against its
//! Poisson-binomial null distribution, and an edge is kept when
//! `Pr(P*_ij >= P_ij) < alpha / 2`.

use ndarray::Array2;
use rayon::prelude::*;

use crate::bipartite::{validate, ConstraintMask, IncidenceMatrix};
use crate::error::{Error, Result};
use crate::nullmodel::{fit_logistic, predict_q, FitResult, Model, ProbabilityMatrix};
use crate::pbin::upper_tail_with;

/// Binary backbone of a bipartite projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    agent_labels: Vec<String>,
    adjacency: Array2<u8>,
    pvalues: Array2<f64>,
    alpha: f64,
    model: Model,
    fit: FitResult,
}

impl Backbone {
    pub fn agent_labels(&self) -> &[String] {
        &self.agent_labels
    }

    /// Symmetric 0/1 matrix with an empty diagonal.
    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adjacency
    }

    /// Upper-tail p-values; the diagonal is NaN.
    pub fn pvalues(&self) -> &Array2<f64> {
        &self.pvalues
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// Logistic fit behind the probability matrix.
    pub fn fit(&self) -> &FitResult {
        &self.fit
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[[i, j]] == 1
    }

    /// Retained edges as index pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let r = self.agent_labels.len();
        (0..r)
            .flat_map(|i| ((i + 1)..r).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_edge(i, j))
            .collect()
    }

    /// Retained edges by label, smaller label first, sorted.
    pub fn edge_labels(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .edges()
            .into_iter()
            .map(|(i, j)| {
                let (a, b) = (&self.agent_labels[i], &self.agent_labels[j]);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect();
        out.sort();
        out
    }

    pub fn n_edges(&self) -> usize {
        self.edges().len()
    }

    /// Number of agent pairs tested, `r(r-1)/2`.
    pub fn n_tested(&self) -> usize {
        let r = self.agent_labels.len();
        r * r.saturating_sub(1) / 2
    }
}

/// Upper-tail p-value of every agent pair's projected weight under `q`.
///
/// Pairs are evaluated in parallel; each entry depends only on its own row
/// pair, so the result is identical to a sequential evaluation.
pub fn significance_matrix(b: &IncidenceMatrix, q: &ProbabilityMatrix) -> Result<Array2<f64>> {
    if b.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: q.dim(),
        });
    }
    let r = b.n_agents();
    let projection = b.project();
    let values = q.values();
    let rows: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(probs, scratch), i| {
                ((i + 1)..r)
                    .map(|j| {
                        probs.clear();
                        probs.extend(
                            values
                                .row(i)
                                .iter()
                                .zip(values.row(j).iter())
                                .map(|(a, b)| a * b),
                        );
                        let observed = projection.weight(i, j) as usize;
                        upper_tail_with(probs, observed, scratch)
                    })
                    .collect()
            },
        )
        .collect();

    let mut pvalues = Array2::from_elem((r, r), f64::NAN);
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, p) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            pvalues[[i, j]] = p;
            pvalues[[j, i]] = p;
        }
    }
    Ok(pvalues)
}

/// Extracts the backbone of `b`'s projection at level `alpha`.
///
/// Under [`Model::Sdsm`] the mask is ignored; under [`Model::SdsmEc`] it
/// shapes the probability matrix. `b` must satisfy `mask` in either case.
pub fn extract_backbone(
    b: &IncidenceMatrix,
    mask: &ConstraintMask,
    alpha: f64,
    model: Model,
) -> Result<Backbone> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    validate(b, mask)?.into_result()?;
    let free;
    let effective = match model {
        Model::Sdsm => {
            free = ConstraintMask::free_like(b);
            &free
        }
        Model::SdsmEc => mask,
    };
    let fit = fit_logistic(b, effective)?;
    let q = predict_q(&fit, &b.row_sums(), &b.col_sums(), effective)?;
    let pvalues = significance_matrix(b, &q)?;
    let threshold = alpha / 2.0;
    let r = b.n_agents();
    let adjacency = Array2::from_shape_fn((r, r), |(i, j)| {
        u8::from(i != j && pvalues[[i, j]] < threshold)
    });
    Ok(Backbone {
        agent_labels: b.agent_labels().to_vec(),
        adjacency,
        pvalues,
        alpha,
        model,
        fit,
    })
}
