//! Statistically significant backbones of bipartite projections.
//!
//! The projection `P = B Bᵀ` of a binary agent × artifact matrix counts the
//! artifacts each pair of agents shares. An edge survives in the backbone when
//! its weight is improbably large under a canonical null ensemble whose
//! per-cell probabilities are fitted by logistic regression on the agent and
//! artifact degrees. Edge constraints (prohibited and required cells) are
//! carried through into the null model, so that structurally impossible
//! configurations do not inflate significance.
//!
//! Modules:
//!
//! * [`bipartite`]: incidence matrices, margins, constraint masks, projection.
//! * [`nullmodel`]: the probability matrix `Q` and its logistic fit.
//! * [`pbin`]: exact Poisson-binomial tail probabilities.
//! * [`extract`]: the backbone decision rule.
//! * [`oracle`]: exhaustive enumeration of fixed-margin spaces.
//! * [`synth`]: seeded generators.
//! * [`io`]: CSV formats.

pub mod bipartite;
pub mod error;
pub mod extract;
pub mod io;
pub mod nullmodel;
pub mod oracle;
pub mod pbin;
pub mod synth;

pub use bipartite::{
    validate, CellState, ConstraintMask, DegreeSequence, IncidenceMatrix, Projection,
    ValidationReport, Violation,
};
pub use error::{Axis, Error, Result};
pub use extract::{extract_backbone, significance_matrix, Backbone};
pub use nullmodel::{
    estimate_q, fit_logistic, predict_q, FitOptions, FitResult, Model, ProbabilityMatrix,
};
pub use oracle::{enumerate_space, q_deviation, pvalue_oracle, SpaceSpec, SpaceSummary};
pub use pbin::{pair_params, upper_tail, BernoulliParams};
pub use synth::{random_bipartite, two_block, TwoBlockSpec};
