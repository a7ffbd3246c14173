//! Label-independent blocking, representative selection, complementary
//! block pairing, and the admissible cross-swap set.
//!
//! Nothing before [`build_swap_set`] looks at group labels: block scores,
//! the partition and the representative draw are functions of the pooled
//! data and a random stream only.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::Rng;

use crate::data::{Group, LabelState, PooledSample};
use crate::error::{Error, Result};
use crate::stats::KernelMatrix;

/// Partition of the pooled indices into score-ordered blocks, plus the
/// representative set and the admitted block pairs once those are filled.
#[derive(Clone, Debug)]
pub struct BlockDesign {
    scores: Vec<f64>,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    representatives: Vec<usize>,
    is_rep: Vec<bool>,
    rho: Option<f64>,
    pairs: Vec<(usize, usize)>,
}

impl BlockDesign {
    /// Blocks from arbitrary label-independent scores: equal-frequency bins
    /// of the scores in ascending order, ties broken by index. Block sizes
    /// differ by at most one, larger blocks first.
    pub fn from_scores(scores: Vec<f64>, b: usize) -> Result<Self> {
        let n = scores.len();
        if b < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 blocks, got {b}")));
        }
        if b > n {
            return Err(Error::InvalidArgument(format!(
                "cannot split {n} points into {b} blocks"
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("non-finite block score".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| scores[x].total_cmp(&scores[y]).then(x.cmp(&y)));

        let (base, extra) = (n / b, n % b);
        let mut blocks = Vec::with_capacity(b);
        let mut block_of = vec![0; n];
        let mut start = 0;
        for r in 0..b {
            let size = base + usize::from(r < extra);
            let mut members = order[start..start + size].to_vec();
            for &i in &members {
                block_of[i] = r;
            }
            members.sort_unstable();
            blocks.push(members);
            start += size;
        }
        Ok(Self {
            scores,
            blocks,
            block_of,
            representatives: Vec::new(),
            is_rep: vec![false; n],
            rho: None,
            pairs: Vec::new(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.block_of[i]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Sorted representative indices (empty until selected).
    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn is_representative(&self, i: usize) -> bool {
        self.is_rep[i]
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Largest number of disjoint swaps, `⌊|R|/2⌋`.
    pub fn max_swaps(&self) -> usize {
        self.representatives.len() / 2
    }

    /// Mean score of each block, in block order.
    pub fn block_mean_scores(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|&i| self.scores[i]).sum::<f64>() / b.len() as f64)
            .collect()
    }

    /// Draw `⌊ρN⌋` representatives: per-block quotas by largest-remainder
    /// apportionment, members drawn uniformly without replacement.
    pub fn select_representatives<R: Rng + ?Sized>(mut self, rho: f64, rng: &mut R) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1], got {rho}")));
        }
        let total = representative_count(rho, self.len());
        if total < 2 {
            return Err(Error::RepresentativesTooSmall(total));
        }
        let sizes: Vec<usize> = self.blocks.iter().map(Vec::len).collect();
        let quotas = largest_remainder(total, &sizes);
        let mut reps = Vec::with_capacity(total);
        for (block, &quota) in self.blocks.iter().zip(&quotas) {
            reps.extend(index::sample(rng, block.len(), quota).into_iter().map(|k| block[k]));
        }
        reps.sort_unstable();
        self.is_rep = vec![false; self.len()];
        for &i in &reps {
            self.is_rep[i] = true;
        }
        self.representatives = reps;
        self.rho = Some(rho);
        Ok(self)
    }

    /// Pair blocks symmetrically by ascending mean score: lowest with
    /// highest, second with second-highest, and so on. With an odd count
    /// the middle block stays unpaired.
    pub fn complementary_pairs(mut self) -> Result<Self> {
        let b = self.num_blocks();
        if b < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 blocks, got {b}")));
        }
        let means = self.block_mean_scores();
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| means[x].total_cmp(&means[y]).then(x.cmp(&y)));
        self.pairs = (0..b / 2).map(|k| (order[k], order[b - 1 - k])).collect();
        Ok(self)
    }
}

/// `⌊ρN⌋`, guarded against products like `0.29 * 100 = 28.999…`.
pub fn representative_count(rho: f64, n: usize) -> usize {
    (rho * n as f64 + 1e-9).floor() as usize
}

/// Largest-remainder (Hamilton) apportionment of `total` seats proportional
/// to `sizes`; remainder ties go to the earlier block.
pub fn largest_remainder(total: usize, sizes: &[usize]) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    // exact integer arithmetic: quota_r = total * size_r / n
    let mut quotas: Vec<usize> = sizes.iter().map(|&s| total * s / n).collect();
    let assigned: usize = quotas.iter().sum();
    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&x, &y| {
        let (rx, ry) = ((total * sizes[x]) % n, (total * sizes[y]) % n);
        ry.cmp(&rx).then(x.cmp(&y))
    });
    for &r in by_remainder.iter().take(total - assigned) {
        quotas[r] += 1;
    }
    quotas
}

/// Projection of each centered row onto the first principal axis of the
/// pooled data; the value itself when `d = 1`.
pub fn principal_scores(sample: &PooledSample) -> Vec<f64> {
    let d = sample.dim();
    if d == 1 {
        return sample.as_slice().to_vec();
    }
    let n = sample.len();
    let mut mean = vec![0.0; d];
    for row in sample.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x / n as f64;
        }
    }
    let centered = DMatrix::from_fn(n, d, |i, k| sample.row(i)[k] - mean[k]);
    let cov = centered.transpose() * &centered;
    let eig = SymmetricEigen::new(cov);
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let mut axis: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    // fix the sign so the largest-magnitude coordinate is positive
    let pivot = axis
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if axis[pivot] < 0.0 {
        axis.iter_mut().for_each(|v| *v = -*v);
    }
    (0..n)
        .map(|i| {
            sample
                .row(i)
                .iter()
                .zip(&mean)
                .zip(&axis)
                .map(|((x, m), a)| (x - m) * a)
                .sum()
        })
        .collect()
}

/// Equal-frequency quantile blocks of the pooled values (first principal
/// component when `d > 1`).
pub fn quantile_blocks(sample: &PooledSample, b: usize) -> Result<BlockDesign> {
    BlockDesign::from_scores(principal_scores(sample), b)
}

/// Kernel mean scores `s_i = (1/N) Σ_j K[i,j]`.
pub fn kernel_mean_scores(kmat: &KernelMatrix) -> Vec<f64> {
    let n = kmat.len() as f64;
    (0..kmat.len())
        .map(|i| kmat.row(i).iter().sum::<f64>() / n)
        .collect()
}

/// Equal-size blocks on the kernel mean scores.
pub fn kernel_score_blocks(kmat: &KernelMatrix, b: usize) -> Result<BlockDesign> {
    BlockDesign::from_scores(kernel_mean_scores(kmat), b)
}

/// One complete-bipartite piece of the admissible swap graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub a_side: Vec<usize>,
    pub b_side: Vec<usize>,
}

impl Component {
    pub fn num_edges(&self) -> usize {
        self.a_side.len() * self.b_side.len()
    }
}

/// Admissible ordered cross-swaps `(i, j)`: `i ∈ A∩R`, `j ∈ B∩R`, in the
/// two different blocks of an admitted pair. Grouped into vertex-disjoint
/// complete bipartite components.
#[derive(Clone, Debug)]
pub struct SwapSet {
    pairs: Vec<(usize, usize)>,
    components: Vec<Component>,
}

impl SwapSet {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Components with both sides non-empty.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Uniform swap law `w = 1/|P|`.
    pub fn weight(&self) -> f64 {
        1.0 / self.pairs.len() as f64
    }
}

/// Enumerate the admissible swaps of `design` under `labels`.
pub fn build_swap_set(design: &BlockDesign, labels: &LabelState) -> Result<SwapSet> {
    if labels.len() != design.len() {
        return Err(Error::InvalidArgument(format!(
            "design covers {} indices, labels have {}",
            design.len(),
            labels.len()
        )));
    }
    let side = |block: usize, group: Group| -> Vec<usize> {
        design.blocks[block]
            .iter()
            .copied()
            .filter(|&i| design.is_rep[i] && labels.get(i) == group)
            .collect()
    };
    let mut components = Vec::new();
    for &(r, s) in &design.pairs {
        for (x, y) in [(r, s), (s, r)] {
            let comp = Component {
                a_side: side(x, Group::A),
                b_side: side(y, Group::B),
            };
            if comp.num_edges() > 0 {
                components.push(comp);
            }
        }
    }
    let pairs: Vec<(usize, usize)> = components
        .iter()
        .flat_map(|c| {
            c.a_side
                .iter()
                .flat_map(move |&i| c.b_side.iter().map(move |&j| (i, j)))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptySwapSet);
    }
    Ok(SwapSet { pairs, components })
}
