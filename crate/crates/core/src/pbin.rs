//! Exact Poisson-binomial upper tails.
//!
//! The projected weight of an agent pair under the canonical null is a sum of
//! independent, non-identical Bernoulli variables, one per artifact. Tails are
//! computed by dynamic-programming convolution, truncated at the threshold so
//! that the cost is `O(c · t)` and the tail mass is accumulated directly rather
//! than obtained as `1 - cdf`.

use crate::error::{Axis, Error, Result};
use crate::nullmodel::ProbabilityMatrix;

/// Success probabilities of the Bernoulli summands.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliParams {
    probs: Vec<f64>,
}

impl BernoulliParams {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `Pr(X >= t)`.
    pub fn upper_tail(&self, t: usize) -> f64 {
        upper_tail(self, t)
    }
}

/// Summand probabilities for agents `i` and `j`: entry k is `Q_ik · Q_jk`.
pub fn pair_params(q: &ProbabilityMatrix, i: usize, j: usize) -> Result<BernoulliParams> {
    let r = q.dim().0;
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
    let v = q.values();
    let probs = v
        .row(i)
        .iter()
        .zip(v.row(j).iter())
        .map(|(a, b)| a * b)
        .collect();
    Ok(BernoulliParams { probs })
}

/// `Pr(X >= t)` for `X` the sum of independent Bernoulli(`params`) draws.
pub fn upper_tail(params: &BernoulliParams, t: usize) -> f64 {
    upper_tail_probs(&params.probs, t)
}

/// Same as [`upper_tail`] on an unchecked slice; entries must lie in [0, 1].
pub fn upper_tail_probs(probs: &[f64], t: usize) -> f64 {
    let mut scratch = Vec::new();
    upper_tail_with(probs, t, &mut scratch)
}

/// [`upper_tail_probs`] reusing a caller-owned buffer.
pub(crate) fn upper_tail_with(probs: &[f64], t: usize, dist: &mut Vec<f64>) -> f64 {
    if t == 0 {
        return 1.0;
    }
    // p = 1 summands shift the distribution, p = 0 summands drop out.
    let certain = probs.iter().filter(|&&p| p >= 1.0).count();
    if certain >= t {
        return 1.0;
    }
    let need = t - certain;
    let uncertain = probs.iter().filter(|&&p| p > 0.0 && p < 1.0).count();
    if need > uncertain {
        return 0.0;
    }

    // dist[m] = Pr(S = m) for m < need; dist[need] = Pr(S >= need).
    dist.clear();
    dist.resize(need + 1, 0.0);
    dist[0] = 1.0;
    for &p in probs.iter().filter(|&&p| p > 0.0 && p < 1.0) {
        let q = 1.0 - p;
        dist[need] += dist[need - 1] * p;
        for m in (1..need).rev() {
            dist[m] = dist[m] * q + dist[m - 1] * p;
        }
        dist[0] *= q;
    }
    dist[need].clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(probs: &[f64], t: usize) -> f64 {
        let n = probs.len();
        let mut total = 0.0;
        for outcome in 0u32..(1 << n) {
            if (outcome.count_ones() as usize) < t {
                continue;
            }
            let mut pr = 1.0;
            for (k, &p) in probs.iter().enumerate() {
                pr *= if outcome >> k & 1 == 1 { p } else { 1.0 - p };
            }
            total += pr;
        }
        total
    }

    fn params(p: &[f64]) -> BernoulliParams {
        BernoulliParams::new(p.to_vec()).unwrap()
    }

    #[test]
    fn small_values() {
        assert_eq!(upper_tail(&params(&[0.3, 0.9]), 0), 1.0);
        assert_eq!(upper_tail(&params(&[0.5, 0.5]), 2), 0.25);
        assert!((upper_tail(&params(&[0.2, 0.5, 0.8]), 2) - 0.5).abs() < 1e-15);
        assert_eq!(upper_tail(&params(&[0.2, 0.5]), 3), 0.0);
    }

    #[test]
    fn certain_and_impossible_summands() {
        assert_eq!(upper_tail(&params(&[1.0, 1.0, 0.0]), 2), 1.0);
        assert_eq!(upper_tail(&params(&[1.0, 0.0, 0.0]), 2), 0.0);
        assert!((upper_tail(&params(&[1.0, 0.5, 0.0]), 2) - 0.5).abs() < 1e-15);
        assert_eq!(upper_tail(&params(&[0.0; 5]), 1), 0.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(BernoulliParams::new(vec![0.5, 1.5]).is_err());
        assert!(BernoulliParams::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn pair_params_products() {
        let q = ProbabilityMatrix::from_values(ndarray::arr2(&[[0.5, 0.2], [0.4, 1.0]])).unwrap();
        let p = pair_params(&q, 0, 1).unwrap();
        assert!((p.probs()[0] - 0.2).abs() < 1e-15);
        assert!((p.probs()[1] - 0.2).abs() < 1e-15);
        assert!(matches!(pair_params(&q, 1, 1), Err(Error::SelfPair(1))));
        assert!(matches!(
            pair_params(&q, 0, 2),
            Err(Error::IndexOutOfRange { .. })
        ));

        let q = ProbabilityMatrix::from_values(ndarray::arr2(&[[0.0, 1.0], [0.7, 1.0]])).unwrap();
        assert_eq!(pair_params(&q, 0, 1).unwrap().probs(), &[0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn matches_enumeration(probs in prop::collection::vec(0.0f64..=1.0, 0..12), t in 0usize..14) {
            let exact = brute_force(&probs, t);
            prop_assert!((upper_tail_probs(&probs, t) - exact).abs() < 1e-12);
        }

        #[test]
        fn monotone_and_bounded(probs in prop::collection::vec(0.0f64..=1.0, 0..40)) {
            let n = probs.len();
            prop_assert_eq!(upper_tail_probs(&probs, 0), 1.0);
            prop_assert_eq!(upper_tail_probs(&probs, n + 1), 0.0);
            let mut prev = 1.0;
            for t in 0..=n + 1 {
                let v = upper_tail_probs(&probs, t);
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(v <= prev + 1e-15);
                prev = v;
            }
        }

        #[test]
        fn order_invariant(mut probs in prop::collection::vec(0.0f64..=1.0, 1..30), t in 0usize..30) {
            let a = upper_tail_probs(&probs, t);
            probs.reverse();
            let shift = probs.len() / 3;
            probs.rotate_left(shift);
            prop_assert!((upper_tail_probs(&probs, t) - a).abs() < 1e-12);
        }
    }
}
