//! Two-sample statistics with exact full evaluation and exact one-swap
//! updates: the group-mean difference and the unbiased MMD².

use std::fmt;
use std::str::FromStr;

use crate::data::{Group, LabelState, PooledSample};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Mean difference
// ---------------------------------------------------------------------------

/// How a scalar statistic is read off a univariate mean difference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sidedness {
    /// `T = Δ`; large values favour `mean(A) > mean(B)`.
    One,
    /// `T = |Δ|`.
    #[default]
    Two,
}

impl FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Self::One),
            "two" => Ok(Self::Two),
            other => Err(Error::InvalidArgument(format!(
                "sidedness must be `one` or `two`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "one",
            Self::Two => "two",
        })
    }
}

/// `mean(A) − mean(B)`, computed from scratch.
pub fn mean_diff_full(sample: &PooledSample, labels: &LabelState) -> Vec<f64> {
    let d = sample.dim();
    let mut sum_a = vec![0.0; d];
    let mut sum_b = vec![0.0; d];
    for (row, g) in sample.rows().zip(labels.as_slice()) {
        let acc = match g {
            Group::A => &mut sum_a,
            Group::B => &mut sum_b,
        };
        for (s, x) in acc.iter_mut().zip(row) {
            *s += x;
        }
    }
    let (n1, n2) = (labels.n1() as f64, labels.n2() as f64);
    sum_a.iter().zip(&sum_b).map(|(a, b)| a / n1 - b / n2).collect()
}

/// Scalar statistic from a mean-difference vector: the Euclidean norm when
/// `d > 1`, otherwise `Δ` or `|Δ|` by sidedness.
pub fn mean_diff_statistic(delta: &[f64], sided: Sidedness) -> f64 {
    match (delta, sided) {
        ([x], Sidedness::One) => *x,
        ([x], Sidedness::Two) => x.abs(),
        _ => delta.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Running group sums for O(d) one-swap updates of the mean difference.
#[derive(Clone, Debug)]
pub struct MeanDiffState<'a> {
    sample: &'a PooledSample,
    labels: LabelState,
    sum_a: Vec<f64>,
    sum_b: Vec<f64>,
    h: f64,
}

impl<'a> MeanDiffState<'a> {
    pub fn new(sample: &'a PooledSample, labels: LabelState) -> Self {
        let d = sample.dim();
        let mut sum_a = vec![0.0; d];
        let mut sum_b = vec![0.0; d];
        for (row, g) in sample.rows().zip(labels.as_slice()) {
            let acc = if *g == Group::A { &mut sum_a } else { &mut sum_b };
            for (s, x) in acc.iter_mut().zip(row) {
                *s += x;
            }
        }
        let h = 1.0 / labels.n1() as f64 + 1.0 / labels.n2() as f64;
        Self {
            sample,
            labels,
            sum_a,
            sum_b,
            h,
        }
    }

    pub fn labels(&self) -> &LabelState {
        &self.labels
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.sample.dim()
    }

    pub fn delta(&self) -> Vec<f64> {
        let (n1, n2) = (self.labels.n1() as f64, self.labels.n2() as f64);
        self.sum_a
            .iter()
            .zip(&self.sum_b)
            .map(|(a, b)| a / n1 - b / n2)
            .collect()
    }

    /// `Δ' − Δ = h (Z_j − Z_i)` for swapping A-labeled `i` with B-labeled `j`.
    pub fn increment(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        self.labels.check_cross_swap(i, j)?;
        Ok(self.increment_unchecked(i, j))
    }

    pub(crate) fn increment_unchecked(&self, i: usize, j: usize) -> Vec<f64> {
        let (zi, zj) = (self.sample.row(i), self.sample.row(j));
        zj.iter().zip(zi).map(|(b, a)| self.h * (b - a)).collect()
    }

    /// Scalar increment for `d = 1`, without allocating.
    pub(crate) fn scalar_increment_unchecked(&self, i: usize, j: usize) -> f64 {
        self.h * (self.sample.row(j)[0] - self.sample.row(i)[0])
    }

    pub fn commit_swap(&mut self, i: usize, j: usize) -> Result<()> {
        self.labels.swap_cross(i, j)?;
        let (zi, zj) = (self.sample.row(i), self.sample.row(j));
        for k in 0..zi.len() {
            self.sum_a[k] += zj[k] - zi[k];
            self.sum_b[k] += zi[k] - zj[k];
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Gaussian kernel scale.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Bandwidth {
    /// Median of the nonzero pairwise Euclidean distances of the pooled
    /// sample (1.0 when every point coincides).
    #[default]
    Median,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "median" {
            return Ok(Self::Median);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad bandwidth `{s}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {v}"
            )));
        }
        Ok(Self::Fixed(v))
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Median => f.write_str("median"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Median of nonzero pairwise distances over `i < j`; 1.0 if there are none.
pub fn median_heuristic(sample: &PooledSample) -> f64 {
    let n = sample.len();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = sq_dist(sample.row(i), sample.row(j));
            if d2 > 0.0 {
                dists.push(d2.sqrt());
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let m = dists.len();
    let upper = *dists
        .select_nth_unstable_by(m / 2, |a, b| a.total_cmp(b))
        .1;
    if m % 2 == 1 {
        upper
    } else {
        let lower = dists[..m / 2]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Dense symmetric kernel matrix over the pooled sample.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
    bandwidth: Option<f64>,
}

impl KernelMatrix {
    /// `K[i,j] = exp(-|Z_i - Z_j|² / (2 bw²))`.
    pub fn gaussian(sample: &PooledSample, bandwidth: Bandwidth) -> Result<Self> {
        let bw = match bandwidth {
            Bandwidth::Median => median_heuristic(sample),
            Bandwidth::Fixed(v) if v > 0.0 && v.is_finite() => v,
            Bandwidth::Fixed(v) => {
                return Err(Error::InvalidArgument(format!(
                    "bandwidth must be positive, got {v}"
                )))
            }
        };
        let n = sample.len();
        let scale = -1.0 / (2.0 * bw * bw);
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let k = (scale * sq_dist(sample.row(i), sample.row(j))).exp();
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Ok(Self {
            n,
            values,
            bandwidth: Some(bw),
        })
    }

    /// `K[i,j] = <Z_i, Z_j>`; used as a test oracle.
    pub fn linear(sample: &PooledSample) -> Self {
        let n = sample.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = sample.row(i).iter().zip(sample.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        Self {
            n,
            values,
            bandwidth: None,
        }
    }

    /// Wrap a precomputed row-major matrix; must be square and symmetric.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} kernel values, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidArgument(format!(
                        "kernel matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            n,
            values,
            bandwidth: None,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Resolved Gaussian bandwidth, if this is a Gaussian kernel.
    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

// ---------------------------------------------------------------------------
// Unbiased MMD²
// ---------------------------------------------------------------------------

fn check_mmd_groups(labels: &LabelState) -> Result<()> {
    if labels.n1() < 2 {
        return Err(Error::DegenerateGroup {
            group: 'A',
            size: labels.n1(),
        });
    }
    if labels.n2() < 2 {
        return Err(Error::DegenerateGroup {
            group: 'B',
            size: labels.n2(),
        });
    }
    Ok(())
}

fn mmd_from_blocks(within_a: f64, within_b: f64, cross: f64, n1: usize, n2: usize) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    within_a / (n1 * (n1 - 1.0)) + within_b / (n2 * (n2 - 1.0)) - 2.0 * cross / (n1 * n2)
}

/// Unbiased MMD² from scratch in O(N²).
pub fn mmd2_full(kmat: &KernelMatrix, labels: &LabelState) -> Result<f64> {
    check_mmd_groups(labels)?;
    let g = labels.as_slice();
    let (mut within_a, mut within_b, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..kmat.len() {
        let row = kmat.row(i);
        for j in 0..kmat.len() {
            if i == j {
                continue;
            }
            match (g[i], g[j]) {
                (Group::A, Group::A) => within_a += row[j],
                (Group::B, Group::B) => within_b += row[j],
                (Group::A, Group::B) => cross += row[j],
                (Group::B, Group::A) => {}
            }
        }
    }
    Ok(mmd_from_blocks(within_a, within_b, cross, labels.n1(), labels.n2()))
}

// Sum of K[l, ·] over `group`, excluding l itself.
fn group_sum_excluding(kmat: &KernelMatrix, labels: &LabelState, l: usize, group: Group) -> f64 {
    kmat.row(l)
        .iter()
        .zip(labels.as_slice())
        .enumerate()
        .filter(|(k, (_, g))| *k != l && **g == group)
        .map(|(_, (v, _))| v)
        .sum()
}

/// Within-minus-cross kernel score of an A-labeled point:
/// `2/(n1(n1-1)) Σ_{A∖i} K[i,·] − 2/(n1 n2) Σ_B K[i,·]`.
pub fn psi_a_to_b(kmat: &KernelMatrix, labels: &LabelState, i: usize) -> Result<f64> {
    check_mmd_groups(labels)?;
    if labels.get(i) != Group::A {
        return Err(Error::InvalidArgument(format!("index {i} is not A-labeled")));
    }
    let (n1, n2) = (labels.n1() as f64, labels.n2() as f64);
    let within = group_sum_excluding(kmat, labels, i, Group::A);
    let cross = group_sum_excluding(kmat, labels, i, Group::B);
    Ok(2.0 / (n1 * (n1 - 1.0)) * within - 2.0 / (n1 * n2) * cross)
}

/// Mirror of [`psi_a_to_b`] for a B-labeled point.
pub fn psi_b_to_a(kmat: &KernelMatrix, labels: &LabelState, j: usize) -> Result<f64> {
    check_mmd_groups(labels)?;
    if labels.get(j) != Group::B {
        return Err(Error::InvalidArgument(format!("index {j} is not B-labeled")));
    }
    let (n1, n2) = (labels.n1() as f64, labels.n2() as f64);
    let within = group_sum_excluding(kmat, labels, j, Group::B);
    let cross = group_sum_excluding(kmat, labels, j, Group::A);
    Ok(2.0 / (n2 * (n2 - 1.0)) * within - 2.0 / (n1 * n2) * cross)
}

/// Coefficients of the exact one-swap decomposition.
#[derive(Clone, Copy, Debug)]
struct SwapCoefficients {
    c_a: f64,
    c_b: f64,
}

impl SwapCoefficients {
    fn new(n1: usize, n2: usize) -> Self {
        let (n1, n2) = (n1 as f64, n2 as f64);
        let cross = 2.0 / (n1 * n2);
        Self {
            c_a: 2.0 / (n1 * (n1 - 1.0)) + cross,
            c_b: 2.0 / (n2 * (n2 - 1.0)) + cross,
        }
    }

    // `u`: kernel mass of the point against A (excluding itself), `v`: against B.
    fn score(&self, u: f64, v: f64) -> f64 {
        self.c_a * u - self.c_b * v
    }

    fn increment(&self, score_j: f64, score_i: f64, k_ij: f64) -> f64 {
        score_j - score_i - (self.c_a + self.c_b) * k_ij
    }
}

/// Exact change of the unbiased MMD² when A-labeled `i` and B-labeled `j`
/// exchange labels, in O(N).
///
/// With `u(l)`, `v(l)` the kernel mass of point `l` against the other A and
/// B points, the change is `φ(j) − φ(i) − (c_A + c_B) K[i,j]` where
/// `φ(l) = c_A u(l) − c_B v(l)`, `c_A = 2/(n1(n1−1)) + 2/(n1 n2)` and
/// `c_B = 2/(n2(n2−1)) + 2/(n1 n2)`. The `K[i,j]` term corrects for the
/// swapped pair entering both the within-group and the cross-group sums.
pub fn mmd_one_swap_increment(
    kmat: &KernelMatrix,
    labels: &LabelState,
    i: usize,
    j: usize,
) -> Result<f64> {
    check_mmd_groups(labels)?;
    labels.check_cross_swap(i, j)?;
    let coef = SwapCoefficients::new(labels.n1(), labels.n2());
    let score = |l: usize| {
        coef.score(
            group_sum_excluding(kmat, labels, l, Group::A),
            group_sum_excluding(kmat, labels, l, Group::B),
        )
    };
    Ok(coef.increment(score(j), score(i), kmat.get(i, j)))
}

/// Row sums per group plus the three U-statistic blocks; supports O(1)
/// one-swap increments and O(N) swap commits.
#[derive(Clone, Debug)]
pub struct MmdState<'k> {
    kmat: &'k KernelMatrix,
    labels: LabelState,
    rowsum_a: Vec<f64>,
    rowsum_b: Vec<f64>,
    within_a: f64,
    within_b: f64,
    cross: f64,
    coef: SwapCoefficients,
}

impl<'k> MmdState<'k> {
    pub fn new(kmat: &'k KernelMatrix, labels: LabelState) -> Result<Self> {
        check_mmd_groups(&labels)?;
        if kmat.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "kernel matrix is {}x{}, labels have length {}",
                kmat.len(),
                kmat.len(),
                labels.len()
            )));
        }
        let n = kmat.len();
        let g = labels.as_slice();
        let mut rowsum_a = vec![0.0; n];
        let mut rowsum_b = vec![0.0; n];
        for l in 0..n {
            for (k, v) in kmat.row(l).iter().enumerate() {
                match g[k] {
                    Group::A => rowsum_a[l] += v,
                    Group::B => rowsum_b[l] += v,
                }
            }
        }
        let (mut within_a, mut within_b, mut cross) = (0.0, 0.0, 0.0);
        for l in 0..n {
            let diag = kmat.get(l, l);
            match g[l] {
                Group::A => {
                    within_a += rowsum_a[l] - diag;
                    cross += rowsum_b[l];
                }
                Group::B => within_b += rowsum_b[l] - diag,
            }
        }
        let coef = SwapCoefficients::new(labels.n1(), labels.n2());
        Ok(Self {
            kmat,
            labels,
            rowsum_a,
            rowsum_b,
            within_a,
            within_b,
            cross,
            coef,
        })
    }

    pub fn labels(&self) -> &LabelState {
        &self.labels
    }

    pub fn mmd2(&self) -> f64 {
        mmd_from_blocks(
            self.within_a,
            self.within_b,
            self.cross,
            self.labels.n1(),
            self.labels.n2(),
        )
    }

    /// `Σ_{a∈A} K[l,a]` (includes `K[l,l]` when `l` is A-labeled).
    pub fn rowsum_a(&self) -> &[f64] {
        &self.rowsum_a
    }

    pub fn rowsum_b(&self) -> &[f64] {
        &self.rowsum_b
    }

    // Kernel mass of l against the other A points / other B points.
    fn masses(&self, l: usize) -> (f64, f64) {
        let diag = self.kmat.get(l, l);
        match self.labels.get(l) {
            Group::A => (self.rowsum_a[l] - diag, self.rowsum_b[l]),
            Group::B => (self.rowsum_a[l], self.rowsum_b[l] - diag),
        }
    }

    /// O(1) version of [`psi_a_to_b`].
    pub fn psi_a_to_b(&self, i: usize) -> Result<f64> {
        if self.labels.get(i) != Group::A {
            return Err(Error::InvalidArgument(format!("index {i} is not A-labeled")));
        }
        let (n1, n2) = (self.labels.n1() as f64, self.labels.n2() as f64);
        let (u, v) = self.masses(i);
        Ok(2.0 / (n1 * (n1 - 1.0)) * u - 2.0 / (n1 * n2) * v)
    }

    /// O(1) version of [`psi_b_to_a`].
    pub fn psi_b_to_a(&self, j: usize) -> Result<f64> {
        if self.labels.get(j) != Group::B {
            return Err(Error::InvalidArgument(format!("index {j} is not B-labeled")));
        }
        let (n1, n2) = (self.labels.n1() as f64, self.labels.n2() as f64);
        let (u, v) = self.masses(j);
        Ok(2.0 / (n2 * (n2 - 1.0)) * v - 2.0 / (n1 * n2) * u)
    }

    /// O(1) exact increment; see [`mmd_one_swap_increment`].
    pub fn increment(&self, i: usize, j: usize) -> Result<f64> {
        self.labels.check_cross_swap(i, j)?;
        Ok(self.increment_unchecked(i, j))
    }

    pub(crate) fn increment_unchecked(&self, i: usize, j: usize) -> f64 {
        let (ui, vi) = self.masses(i);
        let (uj, vj) = self.masses(j);
        self.coef.increment(
            self.coef.score(uj, vj),
            self.coef.score(ui, vi),
            self.kmat.get(i, j),
        )
    }

    /// Move `i` from A to B and `j` from B to A, updating row sums in O(N).
    pub fn commit_swap(&mut self, i: usize, j: usize) -> Result<()> {
        self.labels.check_cross_swap(i, j)?;
        let k = self.kmat;
        let (kii, kjj, kij) = (k.get(i, i), k.get(j, j), k.get(i, j));
        let (ra_i, ra_j, rb_i, rb_j) = (
            self.rowsum_a[i],
            self.rowsum_a[j],
            self.rowsum_b[i],
            self.rowsum_b[j],
        );
        self.within_a += 2.0 * ((ra_j - kij) - (ra_i - kii));
        self.within_b += 2.0 * ((rb_i - kij) - (rb_j - kjj));
        self.cross += (rb_j - kjj) - (rb_i - kij) + (ra_i - kii) - (ra_j - kij);
        let (row_i, row_j) = (k.row(i), k.row(j));
        for l in 0..k.len() {
            let d = row_j[l] - row_i[l];
            self.rowsum_a[l] += d;
            self.rowsum_b[l] -= d;
        }
        self.labels.swap_cross(i, j)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Finite-population variances
// ---------------------------------------------------------------------------

/// Per-coordinate `S² = 1/(N−1) Σ (Z_l − Z̄)²`.
pub fn pooled_variance(sample: &PooledSample) -> Result<Vec<f64>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "pooled variance needs N >= 2, got {n}"
        )));
    }
    let d = sample.dim();
    let mut mean = vec![0.0; d];
    for row in sample.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut ss = vec![0.0; d];
    for row in sample.rows() {
        for k in 0..d {
            let c = row[k] - mean[k];
            ss[k] += c * c;
        }
    }
    Ok(ss.into_iter().map(|s| s / (n as f64 - 1.0)).collect())
}

/// Exact variance of `Δ` under uniform relabeling with fixed group sizes,
/// `h · S²` (equivalently `h · N/(N−1) · σ²` with the population variance
/// `σ² = (N−1)/N · S²`). Univariate only.
pub fn full_relabel_variance_mean(sample: &PooledSample) -> Result<f64> {
    if sample.dim() != 1 {
        return Err(Error::UnsupportedDimension(sample.dim()));
    }
    let s2 = pooled_variance(sample)?[0];
    Ok(sample.h() * s2)
}
