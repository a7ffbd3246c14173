//! Data-dependent concentration diagnostics: one-swap increment moments,
//! representative-fraction feasibility, Bernstein–Freedman tail and
//! quantile bounds, and restricted-versus-full variance comparisons.

use std::fmt;

use rand::seq::index;
use rand::Rng;

use crate::blockdesign::SwapSet;
use crate::data::{LabelState, PooledSample};
use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};
use crate::sampler::{sample_full_relabeling, RestrictedSampler};
use crate::stats::{full_relabel_variance_mean, KernelMatrix, Sidedness};
use crate::testing::{prepare_design, run_test, statistic_full, Evaluator, Scheme, Statistic, TestConfig};

/// Above this many admissible swaps the moments use a uniform subsample.
pub const ENUMERATION_CAP: usize = 1_000_000;
/// Subsample size used beyond [`ENUMERATION_CAP`].
pub const SUBSAMPLE_SIZE: usize = 100_000;
/// Default multiplier applied to the minimal representative fraction.
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.35;

fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// One-swap change of the statistic at the evaluator's labels. For a
/// univariate mean difference this is the signed change of `Δ`; otherwise
/// the change of the scalar statistic.
pub fn one_swap_change(ev: &Evaluator<'_>, i: usize, j: usize) -> Result<f64> {
    match ev {
        Evaluator::Mean { state, .. } if state.dim() == 1 => {
            ev.labels().check_cross_swap(i, j)?;
            Ok(state.scalar_increment_unchecked(i, j))
        }
        Evaluator::Mmd { state } => state.increment(i, j),
        Evaluator::Mean { .. } => ev.swap_increment(i, j),
    }
}

/// Moments of the one-swap increment under the uniform swap law.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementMoments {
    /// Variance of the increment at the observed labels (first-step value).
    pub v_star: f64,
    /// Largest absolute increment.
    pub m_bound: f64,
    /// Number of swaps the moments were computed from.
    pub pairs_used: usize,
    /// Whether `pairs_used` is a subsample of the swap set.
    pub subsampled: bool,
    /// MMD only: variance of the A→B and B→A ψ scores over the A-side and
    /// B-side representative pools.
    pub tau_a2: Option<f64>,
    pub tau_b2: Option<f64>,
}

impl IncrementMoments {
    /// `v*/M²`, or `None` when every increment is zero.
    pub fn r(&self) -> Option<f64> {
        (self.m_bound > 0.0).then(|| self.v_star / (self.m_bound * self.m_bound))
    }
}

fn pairs_for_moments<R: Rng + ?Sized>(swapset: &SwapSet, rng: &mut R) -> (Vec<(usize, usize)>, bool) {
    let pairs = swapset.pairs();
    if pairs.len() <= ENUMERATION_CAP {
        (pairs.to_vec(), false)
    } else {
        let mut pick = index::sample(rng, pairs.len(), SUBSAMPLE_SIZE).into_vec();
        pick.sort_unstable();
        (pick.into_iter().map(|k| pairs[k]).collect(), true)
    }
}

/// `v*` and `M` over the admissible swaps at the evaluator's labels. The
/// stream is only consumed when the swap set exceeds [`ENUMERATION_CAP`].
pub fn increment_moments<R: Rng + ?Sized>(
    ev: &Evaluator<'_>,
    swapset: &SwapSet,
    rng: &mut R,
) -> Result<IncrementMoments> {
    if swapset.is_empty() {
        return Err(Error::EmptySwapSet);
    }
    let (pairs, subsampled) = pairs_for_moments(swapset, rng);
    let incs = pairs
        .iter()
        .map(|&(i, j)| one_swap_change(ev, i, j))
        .collect::<Result<Vec<_>>>()?;
    let m_bound = incs.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let (tau_a2, tau_b2) = match ev {
        Evaluator::Mmd { state } => {
            let mut a_pool = Vec::new();
            let mut b_pool = Vec::new();
            for c in swapset.components() {
                for &i in &c.a_side {
                    a_pool.push(state.psi_a_to_b(i)?);
                }
                for &j in &c.b_side {
                    b_pool.push(state.psi_b_to_a(j)?);
                }
            }
            (Some(population_variance(&a_pool)), Some(population_variance(&b_pool)))
        }
        Evaluator::Mean { .. } => (None, None),
    };

    Ok(IncrementMoments {
        v_star: population_variance(&incs),
        m_bound,
        pairs_used: pairs.len(),
        subsampled,
        tau_a2,
        tau_b2,
    })
}

/// Largest one-swap increment variance seen after committing random
/// prefixes of restricted draws. At each prefix the variance is taken over
/// the swaps whose endpoints the prefix has not touched.
pub fn stress_v_star(
    ev: &Evaluator<'_>,
    swapset: &SwapSet,
    paths: usize,
    key: StreamKey,
) -> Result<f64> {
    let (pairs, _) = pairs_for_moments(swapset, &mut key.child(tag("pairs")).rng());
    let sampler = RestrictedSampler::new(swapset);
    let mut touched = vec![false; ev.labels().len()];
    let mut worst = 0.0f64;
    for p in 0..paths {
        let mut rng = key.child(p as u64).rng();
        let draw = sampler.sample(&mut rng);
        let k = if draw.is_empty() {
            0
        } else {
            rng.random_range(0..=draw.len())
        };
        let mut walker = ev.clone();
        touched.iter_mut().for_each(|t| *t = false);
        for &(i, j) in &draw.swaps()[..k] {
            walker.commit_swap(i, j)?;
            touched[i] = true;
            touched[j] = true;
        }
        let incs = pairs
            .iter()
            .filter(|&&(i, j)| !touched[i] && !touched[j])
            .map(|&(i, j)| one_swap_change(&walker, i, j))
            .collect::<Result<Vec<_>>>()?;
        worst = worst.max(population_variance(&incs));
    }
    Ok(worst)
}

/// Smallest representative fraction satisfying the regime condition, and
/// whether `rho` meets it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub rho_min: f64,
    pub feasible: bool,
}

/// `ρ_min = (8/9) ln(1/α) / (r N)`.
pub fn rho_min(r: f64, n: usize, alpha: f64) -> Result<f64> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::DegenerateDiagnostics(format!("ratio r must be positive, got {r}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("need 0 < alpha < 1 and N > 0, got {alpha}, {n}")));
    }
    Ok(8.0 / 9.0 * (1.0 / alpha).ln() / (r * n as f64))
}

pub fn rho_feasibility(r: f64, n: usize, alpha: f64, rho: f64) -> Result<Feasibility> {
    let rho_min = rho_min(r, n, alpha)?;
    Ok(Feasibility {
        rho_min,
        feasible: rho >= rho_min,
    })
}

/// `min(c·ρ_min, 1)`.
pub fn rho_recommend(rho_min: f64, c: f64) -> f64 {
    (c * rho_min).min(1.0)
}

fn check_tail_args(s: f64, v_star: f64, m_bound: f64) -> Result<()> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InvalidArgument(format!("deviation must be positive, got {s}")));
    }
    if v_star < 0.0 || m_bound < 0.0 {
        return Err(Error::InvalidArgument("variance and bound must be nonnegative".into()));
    }
    if v_star == 0.0 && m_bound == 0.0 {
        return Err(Error::DegenerateDiagnostics("zero variance and zero increment bound".into()));
    }
    Ok(())
}

/// `exp(−s² / (2(L v* + M s/3)))`.
pub fn freedman_tail(s: f64, l: usize, v_star: f64, m_bound: f64) -> Result<f64> {
    check_tail_args(s, v_star, m_bound)?;
    let denom = 2.0 * (l as f64 * v_star + m_bound * s / 3.0);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((-s * s / denom).exp())
}

/// `exp(−s² / (ρN v* + (2/3) M s))`, the same bound with `L` replaced by
/// its ceiling `ρN/2`.
pub fn freedman_tail_rho(s: f64, rho_n: f64, v_star: f64, m_bound: f64) -> Result<f64> {
    check_tail_args(s, v_star, m_bound)?;
    let denom = rho_n * v_star + 2.0 / 3.0 * m_bound * s;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((-s * s / denom).exp())
}

/// `exp(−¼ min{s²/(L v*), 3s/M})`.
pub fn freedman_tail_min(s: f64, l: usize, v_star: f64, m_bound: f64) -> Result<f64> {
    check_tail_args(s, v_star, m_bound)?;
    let var_term = s * s / (l as f64 * v_star);
    let lin_term = 3.0 * s / m_bound;
    Ok((-0.25 * var_term.min(lin_term)).exp())
}

/// `mean_T + 2 √(L v* ln(1/α))`.
pub fn quantile_bound(l: usize, v_star: f64, alpha: f64, mean_t: f64) -> f64 {
    mean_t + 2.0 * (l as f64 * v_star * (1.0 / alpha).ln()).sqrt()
}

/// `ln(1/α) ≤ 9 L v* / (4 M²)`: the variance term dominates at level α.
pub fn in_variance_regime(l: usize, v_star: f64, m_bound: f64, alpha: f64) -> bool {
    if m_bound == 0.0 {
        return true;
    }
    (1.0 / alpha).ln() <= 9.0 * l as f64 * v_star / (4.0 * m_bound * m_bound)
}

/// `mean_T + √(Var_full / α)`.
pub fn chebyshev_bound(mean_t: f64, var_full: f64, alpha: f64) -> f64 {
    mean_t + (var_full / alpha).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceComparison {
    pub var_rest: f64,
    pub var_full: f64,
    /// Closed form under full relabeling (univariate mean difference only).
    pub var_full_formula: Option<f64>,
    pub ratio: f64,
}

fn comparison_sidedness(statistic: Statistic, sample: &PooledSample, sided: Sidedness) -> Sidedness {
    // the univariate comparison is on the signed difference
    if statistic == Statistic::MeanDiff && sample.dim() == 1 {
        Sidedness::One
    } else {
        sided
    }
}

/// Variance of the statistic under the restricted scheme and under full
/// relabeling, around the observed labels.
///
/// With `Scheme::Single` the restricted variance is exact, enumerated over
/// every admissible swap; with `Scheme::Block` it is a Monte Carlo estimate
/// from `replicates` sampler draws. The full-relabeling variance is always
/// Monte Carlo. A univariate mean difference is compared on the signed
/// difference regardless of `cfg.sided`.
pub fn variance_comparison(
    sample: &PooledSample,
    labels: &LabelState,
    cfg: &TestConfig,
    replicates: usize,
) -> Result<VarianceComparison> {
    if replicates < 100 {
        return Err(Error::InvalidArgument(format!(
            "variance comparison needs at least 100 replicates, got {replicates}"
        )));
    }
    let sided = comparison_sidedness(cfg.statistic, sample, cfg.sided);
    let kmat = match cfg.statistic {
        Statistic::Mmd2 => Some(KernelMatrix::gaussian(sample, cfg.bandwidth)?),
        Statistic::MeanDiff => None,
    };
    let ev = match &kmat {
        Some(k) => Evaluator::mmd(k, labels.clone())?,
        None => Evaluator::mean(sample, labels.clone(), sided),
    };
    let prepared = prepare_design(sample, labels, kmat.as_ref(), cfg)?;
    let key = StreamKey::root(cfg.seed).child(tag("variance"));

    let var_rest = match cfg.scheme {
        Scheme::Single => {
            let t0 = ev.value();
            let values = prepared
                .swapset
                .pairs()
                .iter()
                .map(|&(i, j)| Ok(t0 + ev.swap_increment(i, j)?))
                .collect::<Result<Vec<_>>>()?;
            population_variance(&values)
        }
        Scheme::Block => {
            let sampler = RestrictedSampler::new(&prepared.swapset);
            let values = (0..replicates)
                .map(|m| {
                    let draw = sampler.sample(&mut key.descend(&[tag("rest"), m as u64]).rng());
                    Ok(ev.evaluate(&draw.apply(labels)?)?.0)
                })
                .collect::<Result<Vec<_>>>()?;
            sample_variance(&values)
        }
        Scheme::Full => {
            return Err(Error::InvalidArgument(
                "variance comparison needs a restricted scheme".into(),
            ))
        }
    };

    let values = (0..replicates)
        .map(|m| {
            let mut rng = key.descend(&[tag("full"), m as u64]).rng();
            let relabeled = sample_full_relabeling(labels.n1(), labels.n2(), &mut rng);
            statistic_full(cfg.statistic, sample, kmat.as_ref(), &relabeled, sided)
        })
        .collect::<Result<Vec<_>>>()?;
    let var_full = sample_variance(&values);

    let var_full_formula = match (cfg.statistic, sample.dim()) {
        (Statistic::MeanDiff, 1) => Some(full_relabel_variance_mean(sample)?),
        _ => None,
    };
    let ratio = if var_full > 0.0 { var_rest / var_full } else { f64::NAN };
    Ok(VarianceComparison {
        var_rest,
        var_full,
        var_full_formula,
        ratio,
    })
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    population_variance(xs) * n / (n - 1.0)
}

/// Knobs for [`diagnose`] beyond the test configuration.
#[derive(Clone, Copy, Debug)]
pub struct DiagnoseOptions {
    pub safety_factor: f64,
    pub stress_paths: usize,
    pub variance_replicates: usize,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            safety_factor: DEFAULT_SAFETY_FACTOR,
            stress_paths: 100,
            variance_replicates: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub h: f64,
    pub rho: f64,
    pub alpha: f64,
    pub pairs: usize,
    pub moments: IncrementMoments,
    pub v_star_stress: f64,
    pub l_max: usize,
    pub rho_min: Option<f64>,
    pub rho_opt: Option<f64>,
    pub feasible: bool,
    pub variance_regime: bool,
    pub observed: f64,
    pub p_value: f64,
    pub mean_t: f64,
    pub q_rest_bound: f64,
    pub q_full_chebyshev: f64,
    pub variance: VarianceComparison,
}

impl DiagnosticsReport {
    pub fn v_star(&self) -> f64 {
        self.moments.v_star
    }

    pub fn m_bound(&self) -> f64 {
        self.moments.m_bound
    }

    pub fn r(&self) -> Option<f64> {
        self.moments.r()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "degenerate".to_string(), |v| v.to_string())
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.moments;
        writeln!(f, "N={}", self.n)?;
        writeln!(f, "h={}", self.h)?;
        writeln!(f, "rho={}", self.rho)?;
        writeln!(f, "alpha={}", self.alpha)?;
        writeln!(f, "pairs={}", self.pairs)?;
        writeln!(f, "pairs_used={}", m.pairs_used)?;
        writeln!(f, "subsampled={}", m.subsampled)?;
        writeln!(f, "v_star={}", m.v_star)?;
        writeln!(f, "v_star_kind=first-step")?;
        writeln!(f, "v_star_stress={}", self.v_star_stress)?;
        if let (Some(a), Some(b)) = (m.tau_a2, m.tau_b2) {
            writeln!(f, "tau_a2={a}")?;
            writeln!(f, "tau_b2={b}")?;
            writeln!(f, "tau_sum={}", a + b)?;
        }
        writeln!(f, "M_bound={}", m.m_bound)?;
        writeln!(f, "r={}", opt(m.r()))?;
        writeln!(f, "L_max={}", self.l_max)?;
        writeln!(f, "rho_min={}", opt(self.rho_min))?;
        writeln!(f, "rho_opt={}", opt(self.rho_opt))?;
        writeln!(f, "feasible={}", self.feasible)?;
        writeln!(f, "variance_regime={}", self.variance_regime)?;
        writeln!(f, "observed={}", self.observed)?;
        writeln!(f, "p_value={}", self.p_value)?;
        writeln!(f, "mean_T={}", self.mean_t)?;
        writeln!(f, "q_rest_bound={}", self.q_rest_bound)?;
        writeln!(f, "q_full_chebyshev={}", self.q_full_chebyshev)?;
        writeln!(f, "var_rest_empirical={}", self.variance.var_rest)?;
        writeln!(f, "var_full_empirical={}", self.variance.var_full)?;
        writeln!(f, "var_full_formula={}", opt(self.variance.var_full_formula))?;
        write!(f, "var_ratio={}", self.variance.ratio)
    }
}

/// Full diagnostics for one dataset: moments at the observed labels, the
/// stress value, feasibility, bounds, and a variance comparison.
pub fn diagnose(
    sample: &PooledSample,
    labels: &LabelState,
    cfg: &TestConfig,
    opts: &DiagnoseOptions,
) -> Result<DiagnosticsReport> {
    cfg.validate()?;
    let kmat = match cfg.statistic {
        Statistic::Mmd2 => Some(KernelMatrix::gaussian(sample, cfg.bandwidth)?),
        Statistic::MeanDiff => None,
    };
    let ev = match &kmat {
        Some(k) => Evaluator::mmd(k, labels.clone())?,
        None => Evaluator::mean(sample, labels.clone(), cfg.sided),
    };
    let prepared = prepare_design(sample, labels, kmat.as_ref(), cfg)?;
    let key = StreamKey::root(cfg.seed).child(tag("diagnostics"));
    let moments = increment_moments(&ev, &prepared.swapset, &mut key.child(tag("moments")).rng())?;
    let v_star_stress = stress_v_star(&ev, &prepared.swapset, opts.stress_paths, key.child(tag("stress")))?
        .max(moments.v_star);
    let l_max = prepared.design.max_swaps();

    let (rho_min, rho_opt, feasible) = match moments.r() {
        Some(r) if r > 0.0 => {
            let fz = rho_feasibility(r, sample.len(), cfg.alpha, cfg.rho)?;
            (Some(fz.rho_min), Some(rho_recommend(fz.rho_min, opts.safety_factor)), fz.feasible)
        }
        _ => (None, None, false),
    };

    let result = run_test(sample, labels, cfg)?;
    let mean_t = result.perm_stats.iter().sum::<f64>() / result.perm_stats.len() as f64;

    let var_cfg = TestConfig {
        scheme: Scheme::Single,
        ..cfg.clone()
    };
    let variance = variance_comparison(sample, labels, &var_cfg, opts.variance_replicates)?;

    Ok(DiagnosticsReport {
        n: sample.len(),
        h: sample.h(),
        rho: cfg.rho,
        alpha: cfg.alpha,
        pairs: prepared.swapset.len(),
        v_star_stress,
        l_max,
        rho_min,
        rho_opt,
        feasible,
        variance_regime: in_variance_regime(l_max, moments.v_star, moments.m_bound, cfg.alpha),
        observed: result.observed,
        p_value: result.p_value,
        mean_t,
        q_rest_bound: quantile_bound(l_max, moments.v_star, cfg.alpha, mean_t),
        q_full_chebyshev: chebyshev_bound(mean_t, variance.var_full, cfg.alpha),
        variance,
        moments,
    })
}
