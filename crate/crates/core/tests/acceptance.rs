//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use blockperm::blockdesign::{build_swap_set, kernel_score_blocks, quantile_blocks, BlockDesign};
use blockperm::data::Group::{A, B};
use blockperm::diagnostics::{freedman_tail, increment_moments, quantile_bound, rho_min};
use blockperm::sampler::{component_matching_counts, sample_full_relabeling, RestrictedSampler};
use blockperm::sim::{run_all, run_power_study, run_variance_sweep, table1_profile, ExperimentSpec, Scenario};
use blockperm::stats::{mean_diff_full, mmd2_full, mmd_one_swap_increment, MeanDiffState, MmdState};
use blockperm::testing::Evaluator;
use blockperm::{
    Bandwidth, Group, KernelMatrix, LabelState, PooledSample, RestrictedPermutation, Scheme, Sidedness,
    Statistic, StreamKey, SwapSet, TestConfig,
};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_instance(key: StreamKey, n: usize, d: usize) -> (PooledSample, LabelState) {
    let mut rng = key.rng();
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let n1 = rng.random_range(2..=n - 2);
    let labels = sample_full_relabeling(n1, n - n1, &mut rng);
    (PooledSample::new(data, d, n1, n - n1).unwrap(), labels)
}

fn swapped(labels: &LabelState, i: usize, j: usize) -> LabelState {
    RestrictedPermutation::new(vec![(i, j)]).unwrap().apply(labels).unwrap()
}

// Representatives are redrawn until the swap set is non-empty.
fn some_swapset(base: &BlockDesign, labels: &LabelState, key: StreamKey) -> Option<SwapSet> {
    for attempt in 0..50u64 {
        let mut rng = key.child(attempt).rng();
        let rho = rng.random_range(0.3..=1.0);
        let design = base.clone().select_representatives(rho, &mut rng).unwrap();
        if let Ok(p) = build_swap_set(&design, labels) {
            return Some(p);
        }
    }
    None
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut worst_mean, mut worst_mmd, mut swaps) = (0.0f64, 0.0f64, 0usize);
    for k in 0..1000u64 {
        let key = StreamKey::root(SEED).descend(&[1, k]);
        let n = 8 + (k as usize * 7) % 57;
        let d = [1, 2, 10][k as usize % 3];
        let b = 2 + (k as usize % 3);
        // labels that leave no admissible swap at all are redrawn
        let (sample, labels, p_mean, p_mmd, kmat) = (0..)
            .find_map(|attempt| {
                let key = key.child(attempt);
                let (sample, labels) = random_instance(key.child(0), n, d);
                let base = quantile_blocks(&sample, b).unwrap().complementary_pairs().unwrap();
                let p_mean = some_swapset(&base, &labels, key.child(1))?;
                let kmat = KernelMatrix::gaussian(&sample, Bandwidth::Median).unwrap();
                let base = kernel_score_blocks(&kmat, b).unwrap().complementary_pairs().unwrap();
                let p_mmd = some_swapset(&base, &labels, key.child(2))?;
                Some((sample, labels, p_mean, p_mmd, kmat))
            })
            .unwrap();
        let p = p_mean;
        let state = MeanDiffState::new(&sample, labels.clone());
        let before = mean_diff_full(&sample, &labels);
        for &(i, j) in p.pairs() {
            let after = mean_diff_full(&sample, &swapped(&labels, i, j));
            for ((inc, a), b0) in state.increment(i, j).unwrap().iter().zip(&after).zip(&before) {
                worst_mean = worst_mean.max((inc - (a - b0)).abs());
            }
        }
        swaps += p.len();

        let p = p_mmd;
        let state = MmdState::new(&kmat, labels.clone()).unwrap();
        let before = mmd2_full(&kmat, &labels).unwrap();
        for &(i, j) in p.pairs() {
            let fresh = mmd2_full(&kmat, &swapped(&labels, i, j)).unwrap() - before;
            let inc = state.increment(i, j).unwrap();
            let direct = mmd_one_swap_increment(&kmat, &labels, i, j).unwrap();
            worst_mmd = worst_mmd.max((inc - fresh).abs()).max((direct - fresh).abs());
        }
        swaps += p.len();
    }
    let elapsed = start.elapsed();
    outcome(
        worst_mean <= 1e-10 && worst_mmd <= 1e-8 && elapsed < Duration::from_secs(60),
        format!(
            "1000 instances, {swaps} swaps; max mean error {worst_mean:.2e} (tol 1e-10), \
             max MMD² error {worst_mmd:.2e} (tol 1e-8), {:.1}s (limit 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut with_last: Vec<Vec<usize>> = subsets(n - 1, k - 1);
    with_last.iter_mut().for_each(|s| s.push(n - 1));
    let mut out = subsets(n - 1, k);
    out.extend(with_last);
    out
}

fn criterion_2() -> Outcome {
    let z: Vec<f64> = (1..=6).map(f64::from).collect();
    let deltas: Vec<f64> = subsets(6, 3)
        .into_iter()
        .map(|a| {
            let sa: f64 = a.iter().map(|&i| z[i]).sum();
            let sb: f64 = z.iter().sum::<f64>() - sa;
            sa / 3.0 - sb / 3.0
        })
        .collect();
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let var = deltas.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / deltas.len() as f64;
    let (n, h) = (6.0, 2.0 / 3.0);
    let s2 = z.iter().map(|x| (x - 3.5).powi(2)).sum::<f64>() / (n - 1.0);
    let target = h * n / (n - 1.0) * s2;
    let library = blockperm::stats::full_relabel_variance_mean(
        &PooledSample::from_scalars(z.clone(), 3, 3).unwrap(),
    )
    .unwrap();
    outcome(
        (var - target).abs() <= 1e-12,
        format!(
            "{} relabelings: enumerated Var(Δ) = {var:.12}, target h·N/(N−1)·S² = {target:.12} \
             (library closed form h·S² = {library:.12})",
            deltas.len()
        ),
    )
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for k in 0..50u64 {
        let key = StreamKey::root(SEED).descend(&[3, k]);
        let n = 10 + (k as usize * 5) % 50;
        let (sample, labels, p) = (0..)
            .find_map(|attempt| {
                let key = key.child(attempt);
                let (sample, labels) = random_instance(key.child(0), n, 1);
                let base = quantile_blocks(&sample, 2 + k as usize % 4)
                    .unwrap()
                    .complementary_pairs()
                    .unwrap();
                let p = some_swapset(&base, &labels, key.child(1))?;
                Some((sample, labels, p))
            })
            .unwrap();
        let t0 = mean_diff_full(&sample, &labels)[0];
        let exhaustive: Vec<f64> = p
            .pairs()
            .iter()
            .map(|&(i, j)| mean_diff_full(&sample, &swapped(&labels, i, j))[0] - t0)
            .collect();
        let h = sample.h();
        let diffs: Vec<f64> = p
            .pairs()
            .iter()
            .map(|&(i, j)| sample.row(j)[0] - sample.row(i)[0])
            .collect();
        let closed = h * h * population_variance(&diffs);
        let ev = Evaluator::mean(&sample, labels.clone(), Sidedness::Two);
        let v_star = increment_moments(&ev, &p, &mut key.child(2).rng()).unwrap().v_star;
        worst = worst
            .max((population_variance(&exhaustive) - closed).abs())
            .max((v_star - closed).abs());
        count += 1;
    }
    outcome(
        worst <= 1e-12,
        format!("{count} instances; max |Var(ΔT) − h²·Var_w(Z_J − Z_I)| = {worst:.2e} (tol 1e-12)"),
    )
}

// Every product of disjoint swaps from `p`, as sorted swap lists.
fn enumerate_restricted(p: &SwapSet) -> Vec<Vec<(usize, usize)>> {
    fn rec(
        pairs: &[(usize, usize)],
        k: usize,
        used: &mut Vec<usize>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if k == pairs.len() {
            let mut s = cur.clone();
            s.sort_unstable();
            out.push(s);
            return;
        }
        rec(pairs, k + 1, used, cur, out);
        let (i, j) = pairs[k];
        if !used.contains(&i) && !used.contains(&j) {
            used.extend([i, j]);
            cur.push((i, j));
            rec(pairs, k + 1, used, cur, out);
            cur.pop();
            used.truncate(used.len() - 2);
        }
    }
    let mut out = Vec::new();
    rec(p.pairs(), 0, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

fn criterion_4() -> Outcome {
    let instances: Vec<(usize, Vec<Group>)> = vec![
        (2, vec![A, B, A, B, B, A, B, A]),
        (2, vec![A, A, B, B, B, B, A, A, B, B]),
        (2, vec![A, A, B, B, B, A, B, B, B, B]),
        (4, vec![A, B, A, B, B, A, B, A, A, B, A, B]),
        (3, vec![A, A, B, A, B, B, A, B, B]),
        (2, vec![A, B, B, A, A, A, B, B]),
    ];
    let chi = |df: f64| ChiSquared::new(df).unwrap();
    let mut details = Vec::new();
    let mut pass = true;
    for (k, (b, labels)) in instances.into_iter().enumerate() {
        let n = labels.len();
        let design = BlockDesign::from_scores((0..n).map(|i| i as f64).collect(), b)
            .unwrap()
            .complementary_pairs()
            .unwrap()
            .select_representatives(1.0, &mut StreamKey::root(0).rng())
            .unwrap();
        let p = build_swap_set(&design, &LabelState::from_labels(labels)).unwrap();
        let support = enumerate_restricted(&p);
        let predicted: f64 = p
            .components()
            .iter()
            .map(|c| component_matching_counts(c.a_side.len(), c.b_side.len()).log_total())
            .sum::<f64>()
            .exp();
        let size = support.len();
        let index: HashMap<Vec<(usize, usize)>, usize> =
            support.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
        let sampler = RestrictedSampler::new(&p);
        let mut rng = StreamKey::root(SEED).descend(&[4, k as u64]).rng();
        let draws = 1_000_000usize;
        let mut counts = vec![0usize; size];
        for _ in 0..draws {
            let mut s = sampler.sample(&mut rng).swaps().to_vec();
            s.sort_unstable();
            counts[index[&s]] += 1;
        }
        let expected = draws as f64 / size as f64;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        let p_value = 1.0 - chi((size - 1) as f64).cdf(stat);
        let ok = (2..=200).contains(&size) && (predicted - size as f64).abs() < 1e-6 && p_value >= 0.001;
        pass &= ok;
        details.push(format!("|S|={size} χ²={stat:.1} p={p_value:.3}"));
    }
    outcome(pass, format!("10^6 draws each; {}", details.join("; ")))
}

fn null_spec(statistic: Statistic, d: usize, blocks: usize) -> ExperimentSpec {
    ExperimentSpec {
        d,
        n_grid: vec![32],
        shift: vec![],
        n_sim: 1000,
        scenarios: vec![Scenario::Null],
        schemes: vec![Scheme::Block, Scheme::Full],
        blocks_by_n: [(32, blocks)].into_iter().collect(),
        cfg: TestConfig {
            statistic,
            perms: 100,
            alpha: 0.05,
            rho: 0.2,
            seed: SEED,
            design_retries: 10,
            verify: false,
            ..TestConfig::default()
        },
        sweep: None,
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let bound = 0.05 + 3.0 * (0.05f64 * 0.95 / 1000.0).sqrt();
    let mut pass = true;
    let mut details = Vec::new();
    for (stat, d, b) in [
        (Statistic::MeanDiff, 1, 3),
        (Statistic::MeanDiff, 10, 3),
        (Statistic::Mmd2, 1, 2),
        (Statistic::Mmd2, 10, 2),
    ] {
        let r = run_power_study(&null_spec(stat, d, b)).unwrap();
        for c in &r.cells {
            pass &= c.rejection_rate() <= bound && c.design_errors == 0;
            details.push(format!(
                "{stat} d={d} {}={:.3}{}",
                c.scheme,
                c.rejection_rate(),
                if c.design_errors > 0 {
                    format!(" ({} design errors)", c.design_errors)
                } else {
                    String::new()
                }
            ));
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(15 * 60);
    outcome(
        pass,
        format!(
            "n=32, 1000 replicates, bound {bound:.4}: {}; {:.1}s (limit 900s)",
            details.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let specs: Vec<ExperimentSpec> = table1_profile(SEED)
        .into_iter()
        .filter(|s| !s.scenarios.is_empty())
        .collect();
    let r = run_all(&specs).unwrap();
    let power = |stat: Statistic, n: usize, scheme: Scheme| {
        r.cells
            .iter()
            .find(|c| c.statistic == stat && c.n == n && c.scheme == scheme && c.scenario == Scenario::Alternative)
            .map(|c| c.rejection_rate())
            .unwrap()
    };
    let bands = [
        (Statistic::MeanDiff, 64, Scheme::Block, 0.66, 0.12),
        (Statistic::MeanDiff, 64, Scheme::Full, 0.53, 0.12),
        (Statistic::MeanDiff, 128, Scheme::Block, 0.87, 0.10),
        (Statistic::MeanDiff, 128, Scheme::Full, 0.63, 0.12),
        (Statistic::Mmd2, 256, Scheme::Block, 0.89, 0.10),
        (Statistic::Mmd2, 256, Scheme::Full, 0.86, 0.10),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (stat, n, scheme, target, tol) in bands {
        let p = power(stat, n, scheme);
        let ok = (p - target).abs() <= tol;
        pass &= ok;
        details.push(format!(
            "{stat} n={n} {scheme}={p:.3} (want {target}±{tol}) {}",
            if ok { "ok" } else { "MISS" }
        ));
    }
    let mut order_misses = Vec::new();
    for stat in [Statistic::MeanDiff, Statistic::Mmd2] {
        for n in blockperm::sim::TABLE1_N_GRID {
            let (blk, full) = (power(stat, n, Scheme::Block), power(stat, n, Scheme::Full));
            if blk < full - 0.05 {
                order_misses.push(format!("{stat} n={n} block {blk:.3} < full {full:.3} − 0.05"));
            }
        }
    }
    pass &= order_misses.is_empty();
    let order = if order_misses.is_empty() {
        "block ≥ full − 0.05 in every alternative cell".to_string()
    } else {
        format!("ordering MISS: {}", order_misses.join(", "))
    };
    outcome(pass, format!("{}; {order}", details.join("; ")))
}

fn criterion_7() -> Outcome {
    let spec = table1_profile(SEED)
        .into_iter()
        .find(|s| s.sweep.is_some())
        .unwrap();
    let rows = run_variance_sweep(&spec).unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
    let shrink = ratios[ratios.len() - 1] / ratios[0];
    outcome(
        monotone && shrink <= 0.5,
        format!(
            "ratios {} at n = {}; ratio(256)/ratio(32) = {shrink:.3} (limit 0.5)",
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", "),
            rows.iter().map(|r| r.n.to_string()).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let rm = rho_min(0.25, 128, 0.05).unwrap();
    let rho_ok = (rm - 0.08321).abs() <= 1e-5;

    let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 0.01).collect();
    let tails: Vec<f64> = grid
        .iter()
        .map(|&s| freedman_tail(s, 12, 0.015, 0.2).unwrap())
        .collect();
    let monotone = tails.windows(2).all(|w| w[1] < w[0]) && tails.iter().all(|&t| t <= 1.0);

    let add = |l: usize, alpha: f64| quantile_bound(l, 0.01, alpha, 0.7) - 0.7;
    let mut worst = 0.0f64;
    for l in [1, 3, 8, 20, 50] {
        for alpha in [0.01, 0.05, 0.1, 0.2] {
            // √L scaling
            let lhs = add(4 * l, alpha);
            let rhs = 2.0 * add(l, alpha);
            worst = worst.max((lhs - rhs).abs());
            // √log(1/α) scaling against α = e⁻¹
            let unit = add(l, (-1f64).exp());
            worst = worst.max((add(l, alpha) - unit * (1.0 / alpha).ln().sqrt()).abs());
        }
    }
    outcome(
        rho_ok && monotone && worst <= 1e-12,
        format!(
            "rho_min = {rm:.6} (want 0.08321±1e-5); tail monotone on 400-point grid: {monotone}; \
             max scaling-identity error {worst:.1e} (tol 1e-12)"
        ),
    )
}

fn criterion_9() -> Outcome {
    let run = |dir: &std::path::Path| {
        let status = Command::new(env!("CARGO_BIN_EXE_blockperm"))
            .args(["table1", "--seed", &SEED.to_string(), "--out"])
            .arg(dir)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());
    let mut same = true;
    let mut files = Vec::new();
    for name in ["results.csv", "variance.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        same &= x == y;
        files.push(format!("{name} {} bytes", x.len()));
    }
    outcome(same, format!("two runs, seed {SEED}: {} identical: {same}", files.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("increment identities", criterion_1),
        ("full-relabel variance identity", criterion_2),
        ("one-swap variance identity", criterion_3),
        ("sampler uniformity", criterion_4),
        ("exact validity under the null", criterion_5),
        ("power table reproduction", criterion_6),
        ("variance contraction trend", criterion_7),
        ("diagnostics arithmetic", criterion_8),
        ("reproducibility", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let o = run();
        println!("{id} [{name}]: {} - {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
