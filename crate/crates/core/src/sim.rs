//! Gaussian mean-shift simulation harness: power and type-I studies,
//! variance-contraction sweeps, and their CSV output.
//!
//! Every replicate draws its data and its test seed from its own stream,
//! addressed by (scenario, n, replicate), so results do not depend on
//! scheduling. The full and block schemes see the same datasets.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{LabelState, PooledSample};
use crate::diagnostics::variance_comparison;
use crate::error::{Error, Result};
use crate::rng::{tag, StreamKey};
use crate::testing::{run_test, Scheme, Statistic, TestConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    Null,
    Alternative,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(Self::Null),
            "alternative" | "alt" => Ok(Self::Alternative),
            other => Err(Error::InvalidArgument(format!("unknown scenario `{other}`"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Null => "null",
            Self::Alternative => "alternative",
        })
    }
}

/// Variance sweep settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Null datasets averaged per `n`.
    pub datasets: usize,
    /// Full-relabeling draws per dataset.
    pub replicates: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            datasets: 20,
            replicates: 400,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub d: usize,
    pub n_grid: Vec<usize>,
    /// Mean of the B group under the alternative; padded with zeros to `d`.
    pub shift: Vec<f64>,
    pub n_sim: usize,
    pub scenarios: Vec<Scenario>,
    pub schemes: Vec<Scheme>,
    /// Block count per group size; `cfg.blocks` for sizes not listed.
    pub blocks_by_n: BTreeMap<usize, usize>,
    /// Statistic, level, ρ, M, bandwidth, master seed, retries.
    pub cfg: TestConfig,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::InvalidArgument("n_grid is empty".into()));
        }
        if self.n_sim == 0 {
            return Err(Error::InvalidArgument("n_sim must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if self.shift.len() > self.d {
            return Err(Error::InvalidArgument(format!(
                "shift has {} coordinates for dimension {}",
                self.shift.len(),
                self.d
            )));
        }
        self.cfg.validate()
    }

    pub fn blocks_for(&self, n: usize) -> usize {
        self.blocks_by_n.get(&n).copied().unwrap_or(self.cfg.blocks)
    }

    fn shift_vector(&self) -> Vec<f64> {
        let mut s = self.shift.clone();
        s.resize(self.d, 0.0);
        s
    }

    /// Parse the `key = value` sections format:
    ///
    /// ```text
    /// [experiment]
    /// statistic = mean
    /// d = 2
    /// n_grid = 32, 64
    /// shift = 0.4
    /// n_sim = 200
    /// scenarios = null, alternative
    /// schemes = full, block
    /// blocks_by_n = 32:3, 64:4
    ///
    /// [test]
    /// perms = 100
    /// alpha = 0.05
    /// rho = 0.2
    /// blocks = 4
    /// bandwidth = median
    /// seed = 7
    /// sided = two
    /// design_retries = 10
    ///
    /// [variance]
    /// datasets = 20
    /// replicates = 400
    /// ```
    ///
    /// `#` starts a comment. The `[variance]` section enables the sweep.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::defaults();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                if section == "variance" {
                    spec.sweep.get_or_insert_with(SweepSpec::default);
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            spec.set(&section, key.trim(), value.trim())
                .map_err(|e| Error::Parse {
                    line: line_no,
                    msg: e.to_string(),
                })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn defaults() -> Self {
        Self {
            d: 1,
            n_grid: vec![32],
            shift: vec![0.0],
            n_sim: 100,
            scenarios: vec![Scenario::Null, Scenario::Alternative],
            schemes: vec![Scheme::Full, Scheme::Block],
            blocks_by_n: BTreeMap::new(),
            cfg: TestConfig {
                design_retries: 10,
                verify: false,
                ..TestConfig::default()
            },
            sweep: None,
        }
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("experiment", "statistic") => self.cfg.statistic = value.parse()?,
            ("experiment", "d") => self.d = parse_num(value)?,
            ("experiment", "n_grid") => self.n_grid = parse_list(value)?,
            ("experiment", "shift") => self.shift = parse_list(value)?,
            ("experiment", "n_sim") => self.n_sim = parse_num(value)?,
            ("experiment", "scenarios") => self.scenarios = parse_list(value)?,
            ("experiment", "schemes") => self.schemes = parse_list(value)?,
            ("experiment", "blocks_by_n") => {
                self.blocks_by_n = value
                    .split(',')
                    .map(|kv| {
                        let (n, b) = kv.split_once(':').ok_or_else(|| {
                            Error::InvalidArgument(format!("expected `n:b`, got `{}`", kv.trim()))
                        })?;
                        Ok((parse_num(n.trim())?, parse_num(b.trim())?))
                    })
                    .collect::<Result<_>>()?
            }
            ("test", "perms") => self.cfg.perms = parse_num(value)?,
            ("test", "alpha") => self.cfg.alpha = parse_num(value)?,
            ("test", "rho") => self.cfg.rho = parse_num(value)?,
            ("test", "blocks") => self.cfg.blocks = parse_num(value)?,
            ("test", "bandwidth") => self.cfg.bandwidth = value.parse()?,
            ("test", "seed") => self.cfg.seed = parse_num(value)?,
            ("test", "sided") => self.cfg.sided = value.parse()?,
            ("test", "design_retries") => self.cfg.design_retries = parse_num(value)?,
            ("test", "verify") => self.cfg.verify = parse_num(value)?,
            ("variance", "datasets") => {
                self.sweep.get_or_insert_with(SweepSpec::default).datasets = parse_num(value)?
            }
            ("variance", "replicates") => {
                self.sweep.get_or_insert_with(SweepSpec::default).replicates = parse_num(value)?
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown key `{key}` in section `[{section}]`"
                )))
            }
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse `{s}`")))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|e| Error::InvalidArgument(format!("cannot parse `{x}`: {e}")))
        })
        .collect()
}

/// `n` points from `N(0, I_d)` labeled A followed by `n` points from
/// `N(shift, I_d)` labeled B. Normal variates are drawn with the ziggurat
/// method of `rand_distr::StandardNormal`, row by row, A first.
pub fn generate_gaussian_pair<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    shift: &[f64],
    rng: &mut R,
) -> Result<(PooledSample, LabelState)> {
    if shift.len() != d {
        return Err(Error::InvalidArgument(format!(
            "shift has {} coordinates for dimension {d}",
            shift.len()
        )));
    }
    let mut data = Vec::with_capacity(2 * n * d);
    for _ in 0..n {
        for _ in 0..d {
            data.push(rng.sample::<f64, _>(StandardNormal));
        }
    }
    for _ in 0..n {
        for mu in shift {
            data.push(mu + rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok((PooledSample::new(data, d, n, n)?, LabelState::first_n1(n, n)))
}

/// Outcome counts for one (scenario, n, scheme) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerCell {
    pub statistic: Statistic,
    pub d: usize,
    pub n: usize,
    pub scheme: Scheme,
    pub scenario: Scenario,
    pub rejects: usize,
    pub accepts: usize,
    pub design_errors: usize,
    pub n_sim: usize,
    pub blocks: usize,
    pub rho: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Wall-clock seconds per replicate (not written to CSV).
    pub mean_runtime: f64,
}

impl PowerCell {
    pub fn rejection_rate(&self) -> f64 {
        self.rejects as f64 / self.n_sim as f64
    }

    /// `√(p̂(1−p̂)/n_sim)`.
    pub fn stderr(&self) -> f64 {
        let p = self.rejection_rate();
        (p * (1.0 - p) / self.n_sim as f64).sqrt()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentResult {
    pub cells: Vec<PowerCell>,
    pub sweep: Vec<VarianceRow>,
}

impl ExperimentResult {
    pub fn cell(&self, n: usize, scheme: Scheme, scenario: Scenario) -> Option<&PowerCell> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.scheme == scheme && c.scenario == scenario)
    }
}

fn is_design_error(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateDesign { .. } | Error::EmptySwapSet | Error::RepresentativesTooSmall(_)
    )
}

fn scenario_index(s: Scenario) -> u64 {
    match s {
        Scenario::Null => 0,
        Scenario::Alternative => 1,
    }
}

fn replicate_data(
    spec: &ExperimentSpec,
    scenario: Scenario,
    n: usize,
    rep: usize,
) -> Result<(PooledSample, LabelState, u64)> {
    let key = StreamKey::root(spec.cfg.seed).descend(&[
        tag("replicate"),
        scenario_index(scenario),
        n as u64,
        rep as u64,
    ]);
    let shift = match scenario {
        Scenario::Null => vec![0.0; spec.d],
        Scenario::Alternative => spec.shift_vector(),
    };
    let (sample, labels) = generate_gaussian_pair(n, spec.d, &shift, &mut key.child(tag("data")).rng())?;
    let test_seed = key.child(tag("test")).rng().next_u64();
    Ok((sample, labels, test_seed))
}

/// Rejection counts for every (scenario, n, scheme) in the spec, plus the
/// variance sweep when configured.
pub fn run_power_study(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &scenario in &spec.scenarios {
        for &n in &spec.n_grid {
            let blocks = spec.blocks_for(n);
            for &scheme in &spec.schemes {
                let start = Instant::now();
                let outcomes = (0..spec.n_sim)
                    .into_par_iter()
                    .map(|rep| {
                        let (sample, labels, seed) = replicate_data(spec, scenario, n, rep)?;
                        let cfg = TestConfig {
                            scheme,
                            blocks,
                            seed,
                            ..spec.cfg.clone()
                        };
                        match run_test(&sample, &labels, &cfg) {
                            Ok(r) => Ok(Some(r.reject)),
                            Err(e) if is_design_error(&e) => Ok(None),
                            Err(e) => Err(e),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let rejects = outcomes.iter().filter(|o| **o == Some(true)).count();
                let accepts = outcomes.iter().filter(|o| **o == Some(false)).count();
                cells.push(PowerCell {
                    statistic: spec.cfg.statistic,
                    d: spec.d,
                    n,
                    scheme,
                    scenario,
                    rejects,
                    accepts,
                    design_errors: spec.n_sim - rejects - accepts,
                    n_sim: spec.n_sim,
                    blocks,
                    rho: spec.cfg.rho,
                    alpha: spec.cfg.alpha,
                    seed: spec.cfg.seed,
                    mean_runtime: start.elapsed().as_secs_f64() / spec.n_sim as f64,
                });
            }
        }
    }
    let sweep = match &spec.sweep {
        Some(_) => run_variance_sweep(spec)?,
        None => Vec::new(),
    };
    Ok(ExperimentResult { cells, sweep })
}

/// One row of the variance-contraction table.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub n: usize,
    pub h: f64,
    pub var_rest: f64,
    pub var_full: f64,
    /// Average closed-form full variance (univariate mean difference only).
    pub var_full_formula: Option<f64>,
    pub ratio: f64,
}

/// Per `n`, restricted single-swap and full-relabeling variances of the
/// statistic averaged over null datasets, and their ratio.
pub fn run_variance_sweep(spec: &ExperimentSpec) -> Result<Vec<VarianceRow>> {
    spec.validate()?;
    let sweep = spec.sweep.clone().unwrap_or_default();
    if sweep.datasets == 0 {
        return Err(Error::InvalidArgument("variance sweep needs at least one dataset".into()));
    }
    spec.n_grid
        .iter()
        .map(|&n| {
            let cfg_n = TestConfig {
                scheme: Scheme::Single,
                blocks: spec.blocks_for(n),
                ..spec.cfg.clone()
            };
            let per_dataset = (0..sweep.datasets)
                .into_par_iter()
                .map(|k| {
                    let (sample, labels, seed) = replicate_data(spec, Scenario::Null, n, k)?;
                    let cfg = TestConfig { seed, ..cfg_n.clone() };
                    variance_comparison(&sample, &labels, &cfg, sweep.replicates)
                })
                .collect::<Result<Vec<_>>>()?;
            let m = per_dataset.len() as f64;
            let var_rest = per_dataset.iter().map(|v| v.var_rest).sum::<f64>() / m;
            let var_full = per_dataset.iter().map(|v| v.var_full).sum::<f64>() / m;
            let var_full_formula = per_dataset
                .iter()
                .map(|v| v.var_full_formula)
                .sum::<Option<f64>>()
                .map(|s| s / m);
            Ok(VarianceRow {
                n,
                h: 2.0 / n as f64,
                var_rest,
                var_full,
                var_full_formula,
                ratio: var_rest / var_full,
            })
        })
        .collect()
}

/// `results.csv`: one row per cell.
pub fn write_results_csv<W: Write>(cells: &[PowerCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "stat", "d", "n", "scheme", "scenario", "rejection_rate", "stderr", "n_sim", "blocks", "rho",
        "alpha", "seed",
    ])?;
    for c in cells {
        w.write_record([
            c.statistic.to_string(),
            c.d.to_string(),
            c.n.to_string(),
            c.scheme.to_string(),
            c.scenario.to_string(),
            c.rejection_rate().to_string(),
            c.stderr().to_string(),
            c.n_sim.to_string(),
            c.blocks.to_string(),
            c.rho.to_string(),
            c.alpha.to_string(),
            c.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `variance.csv`: one row per `n`.
pub fn write_variance_csv<W: Write>(rows: &[VarianceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "h", "var_rest", "var_full", "var_full_formula", "ratio"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.h.to_string(),
            r.var_rest.to_string(),
            r.var_full.to_string(),
            r.var_full_formula.map_or_else(String::new, |v| v.to_string()),
            r.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write `results.csv` (and `variance.csv` if a sweep ran) into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_results_csv(&result.cells, std::fs::File::create(dir.join("results.csv"))?)?;
    if !result.sweep.is_empty() {
        write_variance_csv(&result.sweep, std::fs::File::create(dir.join("variance.csv"))?)?;
    }
    Ok(())
}

pub const TABLE1_N_GRID: [usize; 4] = [32, 64, 128, 256];

/// Desk-scale reproduction profile of the power table: the mean difference
/// in `d = 2` and MMD² in `d = 10`, both with a 0.4 shift of the first
/// coordinate, ρ = 0.2, α = 0.05, M = 100 and 200 replicates, plus a
/// univariate variance sweep.
pub fn table1_profile(seed: u64) -> Vec<ExperimentSpec> {
    let base = |statistic, d, blocks: [usize; 4]| ExperimentSpec {
        d,
        n_grid: TABLE1_N_GRID.to_vec(),
        shift: vec![0.4],
        n_sim: 200,
        scenarios: vec![Scenario::Null, Scenario::Alternative],
        schemes: vec![Scheme::Full, Scheme::Block],
        blocks_by_n: TABLE1_N_GRID.into_iter().zip(blocks).collect(),
        cfg: TestConfig {
            statistic,
            perms: 100,
            alpha: 0.05,
            rho: 0.2,
            seed,
            design_retries: 10,
            verify: false,
            ..TestConfig::default()
        },
        sweep: None,
    };
    let mean = base(Statistic::MeanDiff, 2, [3, 4, 5, 6]);
    let mmd = base(Statistic::Mmd2, 10, [2, 3, 4, 5]);
    let sweep = ExperimentSpec {
        d: 1,
        n_sim: 1,
        scenarios: vec![],
        schemes: vec![],
        sweep: Some(SweepSpec::default()),
        ..base(Statistic::MeanDiff, 1, [3, 4, 5, 6])
    };
    vec![mean, mmd, sweep]
}

/// Run a list of experiments and concatenate their cells and sweeps.
pub fn run_all(specs: &[ExperimentSpec]) -> Result<ExperimentResult> {
    let mut out = ExperimentResult::default();
    for spec in specs {
        let r = run_power_study(spec)?;
        out.cells.extend(r.cells);
        out.sweep.extend(r.sweep);
    }
    Ok(out)
}
