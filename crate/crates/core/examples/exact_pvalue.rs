//! Block-restricted and full tests on one simulated dataset, plus the
//! p-value formula on hand-made reference statistics.
//!
//!     cargo run --release --example exact_pvalue

use blockperm::sim::generate_gaussian_pair;
use blockperm::{p_value, run_test, Scheme, StreamKey, TestConfig};

fn main() -> blockperm::Result<()> {
    // ties count as exceedances
    println!("p({{3,5,7}} vs 5) = {}", p_value(5.0, &[3.0, 5.0, 7.0]));

    let mut rng = StreamKey::root(42).rng();
    let (sample, labels) = generate_gaussian_pair(64, 2, &[0.6, 0.0], &mut rng)?;
    for scheme in [Scheme::Block, Scheme::Single, Scheme::Full] {
        let cfg = TestConfig {
            scheme,
            blocks: 4,
            seed: 7,
            ..TestConfig::default()
        };
        let result = run_test(&sample, &labels, &cfg)?;
        println!("{scheme:>6}: {result}");
    }
    Ok(())
}
