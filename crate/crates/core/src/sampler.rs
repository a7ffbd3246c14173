//! Exact uniform sampling from the restricted permutation set and from full
//! relabelings.
//!
//! The restricted set is every product of disjoint admissible swaps. Its
//! swap graph is a disjoint union of complete bipartite components, so a
//! uniform element is a uniform matching drawn independently in each
//! component: pick the matching size `k` with probability proportional to
//! the number of `k`-matchings, then a uniform `k`-matching of that size.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::blockdesign::{Component, SwapSet};
use crate::data::{Group, IndexPermutation, LabelState, RestrictedPermutation};
use crate::error::{Error, Result};

/// Distribution of the matching size in a complete bipartite graph `K_{a,b}`.
///
/// `m_k = C(a,k) C(b,k) k!` counts the `k`-matchings; the weights are built
/// from `m_{k+1}/m_k = (a−k)(b−k)/(k+1)` in log space and normalized, so huge
/// components never overflow.
#[derive(Clone, Debug)]
pub struct ComponentMatchingLaw {
    a: usize,
    b: usize,
    size_weights: Vec<f64>,
    log_total: f64,
}

impl ComponentMatchingLaw {
    pub fn new(a: usize, b: usize) -> Self {
        let kmax = a.min(b);
        let mut logs = Vec::with_capacity(kmax + 1);
        let mut log_m = 0.0f64;
        logs.push(log_m);
        for k in 0..kmax {
            log_m += (((a - k) * (b - k)) as f64 / (k + 1) as f64).ln();
            logs.push(log_m);
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut size_weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = size_weights.iter().sum();
        size_weights.iter_mut().for_each(|w| *w /= total);
        Self {
            a,
            b,
            size_weights,
            log_total: top + total.ln(),
        }
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Normalized weights over `k = 0..=min(a, b)`.
    pub fn size_weights(&self) -> &[f64] {
        &self.size_weights
    }

    /// Natural log of the total number of matchings, `ln Σ_k m_k`.
    pub fn log_total(&self) -> f64 {
        self.log_total
    }
}

/// Convenience wrapper matching the per-component law constructor.
pub fn component_matching_counts(a: usize, b: usize) -> ComponentMatchingLaw {
    ComponentMatchingLaw::new(a, b)
}

/// Uniform sampler over all products of disjoint admissible swaps of a
/// swap set. Precomputes the per-component size laws.
#[derive(Clone, Debug)]
pub struct RestrictedSampler {
    components: Vec<(Component, Option<WeightedIndex<f64>>)>,
    max_swaps: usize,
}

impl RestrictedSampler {
    pub fn new(swapset: &SwapSet) -> Self {
        let components: Vec<_> = swapset
            .components()
            .iter()
            .map(|c| {
                let law = ComponentMatchingLaw::new(c.a_side.len(), c.b_side.len());
                (c.clone(), WeightedIndex::new(law.size_weights.iter().copied()).ok())
            })
            .collect();
        let max_swaps = components
            .iter()
            .map(|(c, _)| c.a_side.len().min(c.b_side.len()))
            .sum();
        Self {
            components,
            max_swaps,
        }
    }

    /// Largest number of swaps any draw can contain.
    pub fn max_swaps(&self) -> usize {
        self.max_swaps
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RestrictedPermutation {
        let mut swaps = Vec::new();
        for (comp, law) in &self.components {
            let Some(law) = law else { continue };
            let k = law.sample(rng);
            if k == 0 {
                continue;
            }
            let a_pick = index::sample(rng, comp.a_side.len(), k);
            let mut b_pick: Vec<usize> = index::sample(rng, comp.b_side.len(), k).into_vec();
            b_pick.shuffle(rng);
            swaps.extend(
                a_pick
                    .into_iter()
                    .zip(b_pick)
                    .map(|(x, y)| (comp.a_side[x], comp.b_side[y])),
            );
        }
        RestrictedPermutation::from_disjoint(swaps)
    }
}

/// Draw a uniform element of the restricted set of `swapset`.
pub fn sample_restricted<R: Rng + ?Sized>(swapset: &SwapSet, rng: &mut R) -> RestrictedPermutation {
    RestrictedSampler::new(swapset).sample(rng)
}

/// Law of a single-swap draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwapMode {
    /// Uniform over the admissible swaps.
    SwapOnly,
    /// Uniform over the admissible swaps plus the identity.
    WithIdentity,
}

/// One uniformly chosen admissible swap (or, in `WithIdentity` mode,
/// possibly the identity).
pub fn sample_single_swap<R: Rng + ?Sized>(
    swapset: &SwapSet,
    mode: SwapMode,
    rng: &mut R,
) -> Result<RestrictedPermutation> {
    let p = swapset.len();
    if p == 0 {
        return Err(Error::EmptySwapSet);
    }
    let outcomes = match mode {
        SwapMode::SwapOnly => p,
        SwapMode::WithIdentity => p + 1,
    };
    let k = rng.random_range(0..outcomes);
    Ok(if k == p {
        RestrictedPermutation::identity()
    } else {
        RestrictedPermutation::from_disjoint(vec![swapset.pairs()[k]])
    })
}

/// Uniform labeling with exactly `n1` A's and `n2` B's.
pub fn sample_full_relabeling<R: Rng + ?Sized>(n1: usize, n2: usize, rng: &mut R) -> LabelState {
    let mut labels = vec![Group::A; n1];
    labels.resize(n1 + n2, Group::B);
    labels.shuffle(rng);
    LabelState::from_labels(labels)
}

/// Uniform element of the full symmetric group on `n` indices.
pub fn sample_uniform_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> IndexPermutation {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    IndexPermutation::from_map(map).expect("shuffle of 0..n is a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockdesign::{build_swap_set, BlockDesign};
    use crate::data::Group::{A, B};
    use crate::rng::StreamKey;

    #[test]
    fn matching_counts() {
        let w = component_matching_counts(1, 1);
        assert!((w.size_weights()[0] - 0.5).abs() < 1e-15);
        assert!((w.size_weights()[1] - 0.5).abs() < 1e-15);

        let w = component_matching_counts(2, 2);
        let want = [1.0 / 7.0, 4.0 / 7.0, 2.0 / 7.0];
        for (x, y) in w.size_weights().iter().zip(want) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((w.log_total() - 7f64.ln()).abs() < 1e-12);

        let w = component_matching_counts(0, 5);
        assert_eq!(w.size_weights(), &[1.0]);

        // far past f64 range for raw counts
        let w = component_matching_counts(400, 500);
        assert!(w.size_weights().iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!((w.size_weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.log_total().is_finite());
        assert!(w.log_total() > 700.0 * std::f64::consts::LN_10);
    }

    fn two_block_swapset(labels: Vec<Group>) -> SwapSet {
        let n = labels.len();
        let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut rng = StreamKey::root(0).rng();
        let d = BlockDesign::from_scores(scores, 2)
            .unwrap()
            .select_representatives(1.0, &mut rng)
            .unwrap()
            .complementary_pairs()
            .unwrap();
        build_swap_set(&d, &LabelState::from_labels(labels)).unwrap()
    }

    #[test]
    fn single_component_one_by_one() {
        // blocks {0,1},{2,3}; A at 0, B at 2 -> one admissible swap
        let p = two_block_swapset(vec![A, A, B, A]);
        // components: (A in block0 = {0,1}) x (B in block1 = {2}); (A in block1={3}) x (B in block0 = {})
        assert_eq!(p.components().len(), 1);
        let s = RestrictedSampler::new(&p);
        let mut rng = StreamKey::root(9).rng();
        let swaps = (0..20_000).filter(|_| !s.sample(&mut rng).is_empty()).count();
        // a = 2, b = 1: m = (1, 2) -> P(non-identity) = 2/3
        assert!((swaps as f64 / 20_000.0 - 2.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn determinism_and_bounds() {
        let p = two_block_swapset(vec![A, B, A, B, A, B, A, B, A, B]);
        let s = RestrictedSampler::new(&p);
        let draw = |seed| {
            let mut rng = StreamKey::root(seed).rng();
            (0..50).map(|_| s.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
        for perm in draw(5) {
            assert!(perm.len() <= 5);
            assert!(RestrictedPermutation::new(perm.swaps().to_vec()).is_ok());
        }
    }

    #[test]
    fn single_swap_modes() {
        let p = two_block_swapset(vec![A, B, B, A]);
        // (A{0} x B{2}) and (A{3} x B{1})
        assert_eq!(p.len(), 2);
        let mut rng = StreamKey::root(1).rng();
        for _ in 0..100 {
            assert_eq!(sample_single_swap(&p, SwapMode::SwapOnly, &mut rng).unwrap().len(), 1);
        }
        let ids = (0..30_000)
            .filter(|_| sample_single_swap(&p, SwapMode::WithIdentity, &mut rng).unwrap().is_empty())
            .count();
        assert!((ids as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn full_relabeling_counts() {
        let mut rng = StreamKey::root(2).rng();
        let g = sample_full_relabeling(4, 0, &mut rng);
        assert_eq!(g.as_slice(), &[A, A, A, A]);
        for _ in 0..20 {
            let g = sample_full_relabeling(3, 5, &mut rng);
            assert_eq!((g.n1(), g.n2()), (3, 5));
        }
        let p = sample_uniform_permutation(6, &mut rng);
        assert!(IndexPermutation::from_map(p.as_slice().to_vec()).is_ok());
    }
}
