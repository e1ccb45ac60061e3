use ndarray::Array2;
use proptest::prelude::*;
use sdsm_core::oracle::{for_each_member, pvalue_oracle, OracleLimits};
use sdsm_core::{
    enumerate_space, estimate_q, two_block, CellState, ConstraintMask, IncidenceMatrix, SpaceSpec,
    TwoBlockSpec,
};

fn members(spec: &SpaceSpec) -> Vec<Array2<u8>> {
    let mut out = Vec::new();
    for_each_member(spec, &OracleLimits::default(), |m| out.push(m.clone())).unwrap();
    out
}

/// All binary matrices of the spec's shape meeting its margins and mask.
fn scan_members(spec: &SpaceSpec) -> Vec<Array2<u8>> {
    let (r, c) = spec.dim();
    (0u64..(1 << (r * c)))
        .map(|bits| Array2::from_shape_fn((r, c), |(i, k)| (bits >> (i * c + k) & 1) as u8))
        .filter(|m| {
            (0..r).all(|i| m.row(i).iter().map(|&v| u32::from(v)).sum::<u32>() == spec.rows()[i])
                && (0..c).all(|k| m.column(k).iter().map(|&v| u32::from(v)).sum::<u32>() == spec.cols()[k])
                && spec.mask().constrained().all(|(i, k, s)| match s {
                    CellState::Prohibited => m[[i, k]] == 0,
                    CellState::Required => m[[i, k]] == 1,
                    CellState::Free => true,
                })
        })
        .collect()
}

#[test]
fn members_have_the_requested_margins() {
    let spec = SpaceSpec::free(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap();
    for m in members(&spec) {
        let b = IncidenceMatrix::from_cells(m).unwrap();
        assert_eq!(b.row_sums().values(), &[1, 1, 2, 2]);
        assert_eq!(b.col_sums().values(), &[1, 1, 2, 2]);
    }
}

#[test]
fn pvalue_oracle_agrees_with_recount_over_scan() {
    let b = IncidenceMatrix::from_rows(&[[1, 1, 0, 0], [1, 1, 1, 0], [0, 0, 1, 1], [0, 1, 0, 1]]).unwrap();
    let mask = ConstraintMask::free(4, 4)
        .with(0, 3, CellState::Prohibited)
        .with(2, 2, CellState::Required);
    let spec = SpaceSpec::of_matrix(&b, &mask).unwrap();
    let scanned = scan_members(&spec);
    assert_eq!(members(&spec).len(), scanned.len());
    let p = b.project();
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                continue;
            }
            let hits = scanned
                .iter()
                .filter(|m| {
                    let w: u32 = (0..4).map(|k| u32::from(m[[i, k]] & m[[j, k]])).sum();
                    w >= p.weight(i, j)
                })
                .count();
            let expected = hits as f64 / scanned.len() as f64;
            assert_eq!(pvalue_oracle(&b, &spec, i, j).unwrap(), expected);
        }
    }
}

#[test]
fn estimate_depends_only_on_space() {
    // Same margins and mask give the same sufficient statistics, so every
    // member yields the same estimate.
    let spec = SpaceSpec::free(&[1, 1, 2, 2], &[1, 1, 2, 2])
        .unwrap()
        .with_cell(2, 3, CellState::Prohibited);
    let all = members(&spec);
    let first = estimate_q(&IncidenceMatrix::from_cells(all[0].clone()).unwrap(), spec.mask()).unwrap();
    for m in &all[1..] {
        let q = estimate_q(&IncidenceMatrix::from_cells(m.clone()).unwrap(), spec.mask()).unwrap();
        for (a, b) in q.values().iter().zip(first.values().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn cross_group_cells_are_zero_under_constraints() {
    let spec = TwoBlockSpec {
        agents_per_group: 4,
        artifacts_per_group: 5,
        within_density: 0.6,
        seed: 1,
    };
    let (b, mask) = two_block(&spec).unwrap();
    let q = estimate_q(&b, &mask).unwrap();
    for i in 0..8 {
        for k in 0..10 {
            if spec.agent_group(i) != spec.artifact_group(k) {
                assert_eq!(q.get(i, k), 0.0);
            } else {
                assert!(q.get(i, k) > 0.0);
            }
        }
    }
}

fn arb_space() -> impl Strategy<Value = SpaceSpec> {
    (1usize..=4, 1usize..=4)
        .prop_flat_map(|(r, c)| {
            (
                prop::collection::vec(0u8..=1, r * c),
                prop::collection::vec(0u8..3, r * c),
                Just((r, c)),
            )
        })
        .prop_map(|(cells, states, (r, c))| {
            // Margins from an actual matrix, so the space is non-trivial.
            let m = Array2::from_shape_vec((r, c), cells).unwrap();
            let b = IncidenceMatrix::from_cells(m).unwrap();
            let mut mask = ConstraintMask::free(r, c);
            for (n, s) in states.into_iter().enumerate() {
                let state = match s {
                    0 | 1 if n % 3 != 0 => CellState::Free,
                    0 => CellState::Prohibited,
                    1 => CellState::Required,
                    _ => CellState::Free,
                };
                mask.set(n / c, n % c, state);
            }
            SpaceSpec::of_matrix(&b, &mask).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn backtracking_matches_scan(spec in arb_space()) {
        let summary = enumerate_space(&spec).unwrap();
        let scanned = scan_members(&spec);
        prop_assert_eq!(summary.cardinality, scanned.len() as u128);
        if summary.cardinality > 0 {
            for i in 0..spec.dim().0 {
                let row: f64 = summary.true_q.row(i).sum();
                prop_assert!((row - f64::from(spec.rows()[i])).abs() < 1e-12);
            }
            for k in 0..spec.dim().1 {
                let col: f64 = summary.true_q.column(k).sum();
                prop_assert!((col - f64::from(spec.cols()[k])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prohibiting_never_grows_the_space(spec in arb_space(), cell in any::<prop::sample::Index>()) {
        let (r, c) = spec.dim();
        let n = cell.index(r * c);
        let (i, k) = (n / c, n % c);
        prop_assume!(spec.mask().is_free(i, k));
        let before = enumerate_space(&spec).unwrap();
        let after = enumerate_space(&spec.clone().with_cell(i, k, CellState::Prohibited)).unwrap();
        prop_assert!(after.cardinality <= before.cardinality);
        if before.cell_counts[[i, k]] == 0 {
            prop_assert_eq!(after.cardinality, before.cardinality);
        }
    }
}
