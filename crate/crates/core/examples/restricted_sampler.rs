//! Uniform sampling of products of disjoint admissible swaps.
//!
//!     cargo run --release --example restricted_sampler

use std::collections::BTreeMap;

use blockperm::blockdesign::{build_swap_set, BlockDesign};
use blockperm::data::Group::{A, B};
use blockperm::sampler::{component_matching_counts, RestrictedSampler};
use blockperm::{LabelState, StreamKey};

fn main() -> blockperm::Result<()> {
    let law = component_matching_counts(2, 2);
    println!("K(2,2) matching sizes: {:?}, total {}", law.size_weights(), law.log_total().exp().round());

    let labels = LabelState::from_labels(vec![A, B, A, B, B, A, B, A]);
    let design = BlockDesign::from_scores((0..8).map(f64::from).collect(), 2)?
        .complementary_pairs()?
        .select_representatives(1.0, &mut StreamKey::root(0).rng())?;
    let swaps = build_swap_set(&design, &labels)?;
    let sampler = RestrictedSampler::new(&swaps);

    let mut rng = StreamKey::root(5).rng();
    let mut by_size = BTreeMap::new();
    let draws = 49_000;
    for _ in 0..draws {
        *by_size.entry(sampler.sample(&mut rng).len()).or_insert(0usize) += 1;
    }
    // 49 elements: 1 identity, 8 with one swap, 20 with two, 16 with three, 4 with four
    for (k, n) in by_size {
        println!("{k} swaps: {:.3} (expected count share x/49)", n as f64 / draws as f64 * 49.0);
    }
    Ok(())
}
