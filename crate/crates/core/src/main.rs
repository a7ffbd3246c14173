use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use blockperm::diagnostics::{diagnose, DiagnoseOptions};
use blockperm::sim::{run_all, table1_profile, write_outputs, ExperimentSpec};
use blockperm::{run_test, Bandwidth, PooledSample, Result, Scheme, Sidedness, Statistic, TestConfig};

#[derive(Parser)]
#[command(name = "blockperm", version, about = "Block-restricted permutation two-sample tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a two-sample test on a CSV file.
    Test {
        #[command(flatten)]
        input: TestArgs,
        /// Write the reference statistics to this CSV file.
        #[arg(long)]
        dump_perm_stats: Option<PathBuf>,
    },
    /// Print concentration diagnostics for a CSV file.
    Diagnose {
        #[command(flatten)]
        input: TestArgs,
    },
    /// Run the simulation described by a spec file.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the built-in power table profile.
    Table1 {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 20240601)]
        seed: u64,
        /// Override the replicate count of every cell.
        #[arg(long)]
        n_sim: Option<usize>,
    },
}

#[derive(Args)]
struct TestArgs {
    /// CSV with a header row; feature columns then a final `group` column of A/B.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "mean", value_parser = parse::<Statistic>)]
    statistic: Statistic,
    #[arg(long, default_value = "block", value_parser = parse::<Scheme>)]
    scheme: Scheme,
    #[arg(long, default_value_t = 0.2)]
    rho: f64,
    #[arg(long, default_value_t = 4)]
    blocks: usize,
    #[arg(long, default_value_t = 100)]
    perms: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "median", value_parser = parse::<Bandwidth>)]
    bandwidth: Bandwidth,
    #[arg(long, default_value = "two", value_parser = parse::<Sidedness>)]
    sided: Sidedness,
    /// Extra representative draws if the swap set comes out empty.
    #[arg(long, default_value_t = 0)]
    design_retries: usize,
}

fn parse<T>(s: &str) -> std::result::Result<T, String>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

impl TestArgs {
    fn config(&self) -> TestConfig {
        TestConfig {
            statistic: self.statistic,
            scheme: self.scheme,
            perms: self.perms,
            alpha: self.alpha,
            rho: self.rho,
            blocks: self.blocks,
            bandwidth: self.bandwidth,
            seed: self.seed,
            sided: self.sided,
            design_retries: self.design_retries,
            verify: cfg!(debug_assertions),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test { input, dump_perm_stats } => {
            let (sample, labels) = PooledSample::from_csv_path(&input.input)?;
            let result = run_test(&sample, &labels, &input.config())?;
            println!("{result}");
            if let Some(path) = dump_perm_stats {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["m", "statistic"])?;
                for (m, t) in result.perm_stats.iter().enumerate() {
                    w.write_record([(m + 1).to_string(), t.to_string()])?;
                }
                w.flush()?;
            }
        }
        Command::Diagnose { input } => {
            let (sample, labels) = PooledSample::from_csv_path(&input.input)?;
            let report = diagnose(&sample, &labels, &input.config(), &DiagnoseOptions::default())?;
            println!("{report}");
        }
        Command::Simulate { spec, out } => {
            let spec = ExperimentSpec::from_path(spec)?;
            let result = run_all(std::slice::from_ref(&spec))?;
            write_outputs(&result, &out)?;
            for c in &result.cells {
                if c.design_errors > 0 {
                    eprintln!(
                        "n={} scheme={} scenario={}: {} design errors",
                        c.n, c.scheme, c.scenario, c.design_errors
                    );
                }
            }
        }
        Command::Table1 { out, seed, n_sim } => {
            let mut specs = table1_profile(seed);
            if let Some(n) = n_sim {
                for s in specs.iter_mut().filter(|s| !s.scenarios.is_empty()) {
                    s.n_sim = n;
                }
            }
            let result = run_all(&specs)?;
            write_outputs(&result, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
