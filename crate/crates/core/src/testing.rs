//! Permutation p-values and the restricted / full test runners.
//!
//! Reference statistics follow the randomized-center construction: draw
//! `σ_0, σ_1, …, σ_M` iid from the permutation set and evaluate the
//! statistic under `σ_m ∘ σ_0⁻¹` applied to the observed labeling. The
//! p-value counts ties as exceedances.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::blockdesign::{build_swap_set, kernel_score_blocks, quantile_blocks, BlockDesign, SwapSet};
use crate::data::{compose_with_inverse, IndexPermutation, LabelState, PooledSample, RestrictedPermutation};
use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};
use crate::sampler::{sample_single_swap, sample_uniform_permutation, RestrictedSampler, SwapMode};
use crate::stats::{
    mean_diff_full, mean_diff_statistic, mmd2_full, Bandwidth, KernelMatrix, MeanDiffState, MmdState,
    Sidedness,
};

/// Two-sample statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Statistic {
    MeanDiff,
    Mmd2,
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" | "mean-diff" => Ok(Self::MeanDiff),
            "mmd" | "mmd2" => Ok(Self::Mmd2),
            other => Err(Error::InvalidArgument(format!(
                "statistic must be `mean` or `mmd`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MeanDiff => "mean",
            Self::Mmd2 => "mmd",
        })
    }
}

/// Permutation set the reference distribution is drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Uniform over all products of disjoint admissible swaps.
    Block,
    /// Uniform over single admissible swaps plus the identity.
    Single,
    /// Uniform over the full symmetric group.
    Full,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(Self::Block),
            "single" => Ok(Self::Single),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidArgument(format!(
                "scheme must be `block`, `single` or `full`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Block => "block",
            Self::Single => "single",
            Self::Full => "full",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TestConfig {
    pub statistic: Statistic,
    pub scheme: Scheme,
    /// Number of reference permutations `M`.
    pub perms: usize,
    pub alpha: f64,
    pub rho: f64,
    pub blocks: usize,
    pub bandwidth: Bandwidth,
    pub seed: u64,
    pub sided: Sidedness,
    /// Extra representative draws allowed when the swap set comes out empty.
    pub design_retries: usize,
    /// Recompute every reference statistic from scratch and compare with the
    /// incremental value.
    pub verify: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            statistic: Statistic::MeanDiff,
            scheme: Scheme::Block,
            perms: 100,
            alpha: 0.05,
            rho: 0.2,
            blocks: 4,
            bandwidth: Bandwidth::Median,
            seed: 0,
            sided: Sidedness::Two,
            design_retries: 0,
            verify: cfg!(debug_assertions),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.perms == 0 {
            return Err(Error::InvalidArgument("need at least one permutation".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.scheme != Scheme::Full && !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TestResult {
    pub observed: f64,
    pub p_value: f64,
    pub perm_stats: Vec<f64>,
    pub reject: bool,
    /// `⌈(1−α)(M+1)⌉`-th smallest of the reference statistics and the
    /// observed one; informational, decisions use the p-value.
    pub critical_value: f64,
    pub n1: usize,
    pub n2: usize,
    /// Most swaps a reference permutation can apply from the observed labels.
    pub max_swaps: usize,
    /// Resolved Gaussian bandwidth (MMD only).
    pub bandwidth: Option<f64>,
    /// Number of representative draws used to obtain a non-empty swap set.
    pub design_attempts: usize,
}

impl fmt::Display for TestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p_value={} observed={} critical={} reject={} n1={} n2={} L_max={}",
            self.p_value, self.observed, self.critical_value, self.reject, self.n1, self.n2, self.max_swaps
        )
    }
}

/// `(1 + #{m : ref_m ≥ observed}) / (1 + M)`.
pub fn p_value(observed: f64, ref_stats: &[f64]) -> f64 {
    let exceed = ref_stats.iter().filter(|&&t| t >= observed).count();
    (1 + exceed) as f64 / (1 + ref_stats.len()) as f64
}

/// `⌈(1−α)(M+1)⌉`-th order statistic of `ref_stats ∪ {observed}`.
pub fn critical_value(observed: f64, ref_stats: &[f64], alpha: f64) -> f64 {
    let mut all: Vec<f64> = ref_stats.to_vec();
    all.push(observed);
    all.sort_by(f64::total_cmp);
    let rank = ((1.0 - alpha) * all.len() as f64 - 1e-9).ceil() as usize;
    all[rank.clamp(1, all.len()) - 1]
}

// ---------------------------------------------------------------------------
// Statistic evaluation
// ---------------------------------------------------------------------------

/// Incremental evaluator of the configured statistic around a base labeling.
#[derive(Clone, Debug)]
pub enum Evaluator<'a> {
    Mean {
        state: MeanDiffState<'a>,
        sided: Sidedness,
    },
    Mmd {
        state: MmdState<'a>,
    },
}

impl<'a> Evaluator<'a> {
    pub fn mean(sample: &'a PooledSample, labels: LabelState, sided: Sidedness) -> Self {
        Self::Mean {
            state: MeanDiffState::new(sample, labels),
            sided,
        }
    }

    pub fn mmd(kmat: &'a KernelMatrix, labels: LabelState) -> Result<Self> {
        Ok(Self::Mmd {
            state: MmdState::new(kmat, labels)?,
        })
    }

    pub fn labels(&self) -> &LabelState {
        match self {
            Self::Mean { state, .. } => state.labels(),
            Self::Mmd { state } => state.labels(),
        }
    }

    /// Statistic at the current labels.
    pub fn value(&self) -> f64 {
        match self {
            Self::Mean { state, sided } => mean_diff_statistic(&state.delta(), *sided),
            Self::Mmd { state } => state.mmd2(),
        }
    }

    /// Change of the statistic if A-labeled `i` and B-labeled `j` swapped.
    pub fn swap_increment(&self, i: usize, j: usize) -> Result<f64> {
        match self {
            Self::Mean { state, sided } => {
                let delta = state.delta();
                let inc = state.increment(i, j)?;
                let after: Vec<f64> = delta.iter().zip(&inc).map(|(a, b)| a + b).collect();
                Ok(mean_diff_statistic(&after, *sided) - mean_diff_statistic(&delta, *sided))
            }
            Self::Mmd { state } => state.increment(i, j),
        }
    }

    pub fn commit_swap(&mut self, i: usize, j: usize) -> Result<()> {
        match self {
            Self::Mean { state, .. } => state.commit_swap(i, j),
            Self::Mmd { state } => state.commit_swap(i, j),
        }
    }

    /// Move to `target` by pairing the label changes into cross-swaps and
    /// committing them one at a time; returns the number of swaps applied.
    pub fn move_to(&mut self, target: &LabelState) -> Result<usize> {
        let (a_to_b, b_to_a) = self.labels().diff(target);
        if a_to_b.len() != b_to_a.len() {
            return Err(Error::InvalidArgument("target labeling changes group sizes".into()));
        }
        for (&i, &j) in a_to_b.iter().zip(&b_to_a) {
            self.commit_swap(i, j)?;
        }
        Ok(a_to_b.len())
    }

    /// Statistic under `target`, evaluated along a swap path from the
    /// current labels. Leaves `self` untouched.
    pub fn evaluate(&self, target: &LabelState) -> Result<(f64, usize)> {
        let mut walker = self.clone();
        let steps = walker.move_to(target)?;
        Ok((walker.value(), steps))
    }
}

/// Statistic recomputed from scratch.
pub fn statistic_full(
    statistic: Statistic,
    sample: &PooledSample,
    kmat: Option<&KernelMatrix>,
    labels: &LabelState,
    sided: Sidedness,
) -> Result<f64> {
    match statistic {
        Statistic::MeanDiff => Ok(mean_diff_statistic(&mean_diff_full(sample, labels), sided)),
        Statistic::Mmd2 => {
            let k = kmat.ok_or_else(|| Error::InvalidArgument("MMD needs a kernel matrix".into()))?;
            mmd2_full(k, labels)
        }
    }
}

// ---------------------------------------------------------------------------
// Design construction
// ---------------------------------------------------------------------------

/// Block design and swap set for one dataset.
#[derive(Clone, Debug)]
pub struct PreparedDesign {
    pub design: BlockDesign,
    pub swapset: SwapSet,
    pub attempts: usize,
}

/// Blocks from the pooled data (quantiles for the mean difference, kernel
/// mean scores for MMD), complementary pairs, then representatives. On an
/// empty swap set the representatives are redrawn from a fresh stream up to
/// `cfg.design_retries` more times.
pub fn prepare_design(
    sample: &PooledSample,
    labels: &LabelState,
    kmat: Option<&KernelMatrix>,
    cfg: &TestConfig,
) -> Result<PreparedDesign> {
    let blocks = match (cfg.statistic, kmat) {
        (Statistic::Mmd2, Some(k)) => kernel_score_blocks(k, cfg.blocks)?,
        (Statistic::Mmd2, None) => {
            return Err(Error::InvalidArgument("MMD needs a kernel matrix".into()))
        }
        (Statistic::MeanDiff, _) => quantile_blocks(sample, cfg.blocks)?,
    }
    .complementary_pairs()?;

    let root = StreamKey::root(cfg.seed).child(tag("design"));
    for attempt in 0..=cfg.design_retries {
        let mut rng = root.child(attempt as u64).rng();
        let design = blocks.clone().select_representatives(cfg.rho, &mut rng)?;
        match build_swap_set(&design, labels) {
            Ok(swapset) => {
                return Ok(PreparedDesign {
                    design,
                    swapset,
                    attempts: attempt + 1,
                })
            }
            Err(Error::EmptySwapSet) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateDesign {
        attempts: cfg.design_retries + 1,
    })
}

fn kernel_for(sample: &PooledSample, cfg: &TestConfig) -> Result<Option<KernelMatrix>> {
    match cfg.statistic {
        Statistic::Mmd2 => Ok(Some(KernelMatrix::gaussian(sample, cfg.bandwidth)?)),
        Statistic::MeanDiff => Ok(None),
    }
}

fn base_evaluator<'a>(
    sample: &'a PooledSample,
    kmat: Option<&'a KernelMatrix>,
    labels: &LabelState,
    cfg: &TestConfig,
) -> Result<Evaluator<'a>> {
    match (cfg.statistic, kmat) {
        (Statistic::MeanDiff, _) => Ok(Evaluator::mean(sample, labels.clone(), cfg.sided)),
        (Statistic::Mmd2, Some(k)) => Evaluator::mmd(k, labels.clone()),
        (Statistic::Mmd2, None) => Err(Error::InvalidArgument("MMD needs a kernel matrix".into())),
    }
}

fn perm_stream(cfg: &TestConfig, m: usize) -> StreamKey {
    StreamKey::root(cfg.seed).descend(&[tag("perm"), m as u64])
}

// Evaluate T under (σ_m ∘ σ_0⁻¹) applied to the observed labels, m = 1..=M.
fn reference_stats<F>(
    base: &Evaluator<'_>,
    sample: &PooledSample,
    kmat: Option<&KernelMatrix>,
    labels: &LabelState,
    cfg: &TestConfig,
    composed: F,
) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<IndexPermutation> + Sync,
{
    (1..=cfg.perms)
        .into_par_iter()
        .map(|m| {
            let target = composed(m)?.apply(labels)?;
            let (t, steps) = base.evaluate(&target)?;
            if cfg.verify {
                let fresh = statistic_full(cfg.statistic, sample, kmat, &target, cfg.sided)?;
                let tol = 1e-8 * (steps as f64 + 1.0) * fresh.abs().max(1.0);
                assert!(
                    (t - fresh).abs() <= tol,
                    "incremental statistic {t} disagrees with recomputation {fresh} after {steps} swaps"
                );
            }
            Ok(t)
        })
        .collect()
}

fn finish(
    observed: f64,
    perm_stats: Vec<f64>,
    labels: &LabelState,
    cfg: &TestConfig,
    max_swaps: usize,
    kmat: Option<&KernelMatrix>,
    design_attempts: usize,
) -> TestResult {
    let p = p_value(observed, &perm_stats);
    TestResult {
        observed,
        p_value: p,
        critical_value: critical_value(observed, &perm_stats, cfg.alpha),
        perm_stats,
        reject: p <= cfg.alpha,
        n1: labels.n1(),
        n2: labels.n2(),
        max_swaps,
        bandwidth: kmat.and_then(KernelMatrix::bandwidth),
        design_attempts,
    }
}

/// Test over the block-restricted set (`Scheme::Block` or `Scheme::Single`).
pub fn run_restricted_test(sample: &PooledSample, labels: &LabelState, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    if cfg.scheme == Scheme::Full {
        return Err(Error::InvalidArgument("full scheme passed to the restricted runner".into()));
    }
    let kmat = kernel_for(sample, cfg)?;
    let base = base_evaluator(sample, kmat.as_ref(), labels, cfg)?;
    let prepared = prepare_design(sample, labels, kmat.as_ref(), cfg)?;
    let n = sample.len();

    let (draws, max_swaps): (Vec<RestrictedPermutation>, usize) = match cfg.scheme {
        Scheme::Block => {
            let sampler = RestrictedSampler::new(&prepared.swapset);
            let draws = (0..=cfg.perms)
                .map(|m| sampler.sample(&mut perm_stream(cfg, m).rng()))
                .collect();
            (draws, prepared.design.max_swaps())
        }
        Scheme::Single => {
            let draws = (0..=cfg.perms)
                .map(|m| {
                    sample_single_swap(&prepared.swapset, SwapMode::WithIdentity, &mut perm_stream(cfg, m).rng())
                })
                .collect::<Result<_>>()?;
            (draws, 1)
        }
        Scheme::Full => unreachable!(),
    };

    let observed = base.value();
    let refs = reference_stats(&base, sample, kmat.as_ref(), labels, cfg, |m| {
        compose_with_inverse(&draws[m], &draws[0], n)
    })?;
    Ok(finish(observed, refs, labels, cfg, max_swaps, kmat.as_ref(), prepared.attempts))
}

/// Classical test over uniformly random relabelings, with the same
/// randomized-center construction.
pub fn run_full_test(sample: &PooledSample, labels: &LabelState, cfg: &TestConfig) -> Result<TestResult> {
    cfg.validate()?;
    let kmat = kernel_for(sample, cfg)?;
    let base = base_evaluator(sample, kmat.as_ref(), labels, cfg)?;
    let n = sample.len();
    let center_inv = sample_uniform_permutation(n, &mut perm_stream(cfg, 0).rng()).inverse();
    let observed = base.value();
    let refs = reference_stats(&base, sample, kmat.as_ref(), labels, cfg, |m| {
        Ok(sample_uniform_permutation(n, &mut perm_stream(cfg, m).rng()).compose(&center_inv))
    })?;
    let max_swaps = labels.n1().min(labels.n2());
    Ok(finish(observed, refs, labels, cfg, max_swaps, kmat.as_ref(), 0))
}

/// Dispatch on `cfg.scheme`.
pub fn run_test(sample: &PooledSample, labels: &LabelState, cfg: &TestConfig) -> Result<TestResult> {
    match cfg.scheme {
        Scheme::Full => run_full_test(sample, labels, cfg),
        Scheme::Block | Scheme::Single => run_restricted_test(sample, labels, cfg),
    }
}
