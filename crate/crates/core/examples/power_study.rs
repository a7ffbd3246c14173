//! A small Monte Carlo power study written as CSV to stdout.
//!
//!     cargo run --release --example power_study

use blockperm::sim::{run_power_study, write_results_csv, ExperimentSpec};

const SPEC: &str = "
[experiment]
statistic = mean
d = 2
n_grid = 32, 64
shift = 0.6
n_sim = 100
scenarios = null, alternative
schemes = full, block
blocks_by_n = 32:3, 64:4

[test]
perms = 100
rho = 0.2
seed = 11
design_retries = 10
";

fn main() -> blockperm::Result<()> {
    let spec = ExperimentSpec::parse(SPEC)?;
    let result = run_power_study(&spec)?;
    write_results_csv(&result.cells, std::io::stdout().lock())?;
    for c in &result.cells {
        eprintln!("{} n={} {}: {:.3}s per replicate", c.scenario, c.n, c.scheme, c.mean_runtime);
    }
    Ok(())
}
