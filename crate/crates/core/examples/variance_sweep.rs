//! Restricted single-swap versus full-relabeling variance of the mean
//! difference as the group size grows.
//!
//!     cargo run --release --example variance_sweep

use blockperm::sim::{run_variance_sweep, table1_profile, write_variance_csv};

fn main() -> blockperm::Result<()> {
    let spec = table1_profile(2024)
        .into_iter()
        .find(|s| s.sweep.is_some())
        .expect("profile has a sweep");
    let rows = run_variance_sweep(&spec)?;
    write_variance_csv(&rows, std::io::stdout().lock())?;
    for w in rows.windows(2) {
        eprintln!("n {} -> {}: ratio x{:.3}", w[0].n, w[1].n, w[1].ratio / w[0].ratio);
    }
    Ok(())
}
