//! Seeded generators for toy and random bipartite networks.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`. Cells are visited in row-major order and each
//! visited cell consumes one uniform `f64` draw in `[0, 1)`; the cell is 1
//! when the draw is below the density. The stream is platform independent,
//! so a seed reproduces the same matrix everywhere.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bipartite::{CellState, ConstraintMask, IncidenceMatrix};
use crate::error::{Error, Result};

/// Two groups of agents, two groups of artifacts, and edges only within a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBlockSpec {
    pub agents_per_group: usize,
    pub artifacts_per_group: usize,
    /// Probability that a within-group cell holds a 1, in (0, 1].
    pub within_density: f64,
    pub seed: u64,
}

impl TwoBlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.agents_per_group < 2 || self.artifacts_per_group < 2 {
            return Err(Error::InvalidSpec(
                "two-block networks need at least 2 agents and 2 artifacts per group".into(),
            ));
        }
        if !(self.within_density > 0.0 && self.within_density <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "within-group density must lie in (0, 1], got {}",
                self.within_density
            )));
        }
        Ok(())
    }

    /// Group (0 or 1) of agent `i`.
    pub fn agent_group(&self, i: usize) -> usize {
        i / self.agents_per_group
    }

    /// Group (0 or 1) of artifact `k`.
    pub fn artifact_group(&self, k: usize) -> usize {
        k / self.artifacts_per_group
    }
}

/// Generates a two-block network and the mask prohibiting every cross-group cell.
///
/// Agents are labelled `g1_agent01`, ..., `g2_agentNN`; artifacts
/// `g1_artifact01`, ... . Only within-group cells consume random draws.
pub fn two_block(spec: &TwoBlockSpec) -> Result<(IncidenceMatrix, ConstraintMask)> {
    spec.validate()?;
    let r = 2 * spec.agents_per_group;
    let c = 2 * spec.artifacts_per_group;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cells = Array2::<u8>::zeros((r, c));
    let mut mask = ConstraintMask::free(r, c);
    for i in 0..r {
        for k in 0..c {
            if spec.agent_group(i) == spec.artifact_group(k) {
                cells[[i, k]] = u8::from(rng.random::<f64>() < spec.within_density);
            } else {
                mask.set(i, k, CellState::Prohibited);
            }
        }
    }
    let width = |n: usize| n.to_string().len().max(2);
    let agents = group_labels("agent", spec.agents_per_group, width(spec.agents_per_group));
    let artifacts = group_labels(
        "artifact",
        spec.artifacts_per_group,
        width(spec.artifacts_per_group),
    );
    Ok((IncidenceMatrix::new(agents, artifacts, cells)?, mask))
}

fn group_labels(kind: &str, per_group: usize, width: usize) -> Vec<String> {
    (1..=2)
        .flat_map(|g| (1..=per_group).map(move |n| format!("g{g}_{kind}{n:0width$}")))
        .collect()
}

/// Independent Bernoulli(`density`) cells, labelled by index.
pub fn random_bipartite(rows: usize, cols: usize, density: f64, seed: u64) -> Result<IncidenceMatrix> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidSpec(format!(
            "density must lie in [0, 1], got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Array2::<u8>::zeros((rows, cols));
    for cell in cells.iter_mut() {
        *cell = u8::from(rng.random::<f64>() < density);
    }
    IncidenceMatrix::from_cells(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::validate;

    fn spec(density: f64, seed: u64) -> TwoBlockSpec {
        TwoBlockSpec {
            agents_per_group: 3,
            artifacts_per_group: 2,
            within_density: density,
            seed,
        }
    }

    #[test]
    fn full_density_is_block_diagonal() {
        let (b, mask) = two_block(&spec(1.0, 0)).unwrap();
        for i in 0..6 {
            for k in 0..4 {
                let within = i / 3 == k / 2;
                assert_eq!(b.get(i, k), u8::from(within));
                assert_eq!(mask.is_free(i, k), within);
            }
        }
        assert_eq!(b.agent_labels()[0], "g1_agent01");
        assert_eq!(b.artifact_labels()[3], "g2_artifact02");
    }

    #[test]
    fn output_satisfies_mask() {
        for seed in 0..20 {
            let (b, mask) = two_block(&spec(0.6, seed)).unwrap();
            assert!(validate(&b, &mask).unwrap().passes());
        }
    }

    #[test]
    fn rejects_degenerate_specs() {
        let mut s = spec(0.5, 0);
        s.agents_per_group = 1;
        assert!(two_block(&s).is_err());
        assert!(two_block(&spec(0.0, 0)).is_err());
        assert!(random_bipartite(2, 2, 1.5, 0).is_err());
    }

    #[test]
    fn random_extremes_and_determinism() {
        assert_eq!(random_bipartite(3, 4, 0.0, 8).unwrap().n_edges(), 0);
        assert_eq!(random_bipartite(3, 4, 1.0, 8).unwrap().n_edges(), 12);
        assert_eq!(
            random_bipartite(7, 9, 0.3, 42).unwrap(),
            random_bipartite(7, 9, 0.3, 42).unwrap()
        );
        assert_eq!(two_block(&spec(0.5, 4)).unwrap(), two_block(&spec(0.5, 4)).unwrap());
    }
}
