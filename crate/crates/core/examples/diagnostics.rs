//! Concentration diagnostics for one dataset: increment moments, the
//! feasible representative fraction, and quantile bounds.
//!
//!     cargo run --release --example diagnostics

use blockperm::diagnostics::{diagnose, freedman_tail, rho_min, rho_recommend, DiagnoseOptions};
use blockperm::sim::generate_gaussian_pair;
use blockperm::{StreamKey, TestConfig};

fn main() -> blockperm::Result<()> {
    let lo = rho_min(0.25, 128, 0.05)?;
    println!("rho_min(r=0.25, N=128, alpha=0.05) = {lo:.5}, recommended {:.5}", rho_recommend(lo, 1.35));
    println!("tail at s=2, L*v=1, M=0: {:.4}", freedman_tail(2.0, 1, 1.0, 0.0)?);

    let mut rng = StreamKey::root(8).rng();
    let (sample, labels) = generate_gaussian_pair(128, 1, &[0.3], &mut rng)?;
    let cfg = TestConfig {
        rho: 0.3,
        blocks: 4,
        ..TestConfig::default()
    };
    println!("{}", diagnose(&sample, &labels, &cfg, &DiagnoseOptions::default())?);
    Ok(())
}
