//! Label-independent blocking, representatives, complementary pairs and
//! the admissible swap set.
//!
//!     cargo run --release --example block_design

use blockperm::blockdesign::{build_swap_set, largest_remainder, quantile_blocks};
use blockperm::sim::generate_gaussian_pair;
use blockperm::StreamKey;

fn main() -> blockperm::Result<()> {
    println!("quotas for 12 seats over blocks (22,21,21): {:?}", largest_remainder(12, &[22, 21, 21]));

    let mut rng = StreamKey::root(3).rng();
    let (sample, labels) = generate_gaussian_pair(16, 1, &[1.0], &mut rng)?;
    let design = quantile_blocks(&sample, 4)?
        .complementary_pairs()?
        .select_representatives(0.5, &mut StreamKey::root(9).rng())?;

    for (r, block) in design.blocks().iter().enumerate() {
        let members: Vec<String> = block
            .iter()
            .map(|&i| {
                let mark = if design.is_representative(i) { "*" } else { "" };
                format!("{i}{}{mark}", labels.get(i))
            })
            .collect();
        println!("block {r}: {}", members.join(" "));
    }
    println!("pairs: {:?}  (* = representative)", design.pairs());

    let swaps = build_swap_set(&design, &labels)?;
    println!("|P| = {}, L_max = {}", swaps.len(), design.max_swaps());
    for c in swaps.components() {
        println!("  component A{:?} x B{:?}", c.a_side, c.b_side);
    }
    Ok(())
}
