//! One-swap increments of the mean difference and of the unbiased MMD²,
//! checked against recomputation from scratch.
//!
//!     cargo run --release --example incremental_updates

use blockperm::sim::generate_gaussian_pair;
use blockperm::stats::{mean_diff_full, mmd2_full, MeanDiffState, MmdState};
use blockperm::{Bandwidth, Group, KernelMatrix, RestrictedPermutation, StreamKey};

fn main() -> blockperm::Result<()> {
    let mut rng = StreamKey::root(1).rng();
    let (sample, labels) = generate_gaussian_pair(20, 3, &[0.5, 0.0, 0.0], &mut rng)?;
    let kmat = KernelMatrix::gaussian(&sample, Bandwidth::Median)?;
    println!("median bandwidth = {:.4}", kmat.bandwidth().unwrap());

    let mean = MeanDiffState::new(&sample, labels.clone());
    let mut mmd = MmdState::new(&kmat, labels.clone())?;
    let before = mean_diff_full(&sample, &labels);
    let mmd_before = mmd2_full(&kmat, &labels)?;

    let a: Vec<usize> = labels.indices_of(Group::A).take(3).collect();
    let b: Vec<usize> = labels.indices_of(Group::B).take(3).collect();
    for (&i, &j) in a.iter().zip(&b) {
        let after = RestrictedPermutation::new(vec![(i, j)])?.apply(&labels)?;
        let fresh: Vec<f64> = mean_diff_full(&sample, &after)
            .iter()
            .zip(&before)
            .map(|(x, y)| x - y)
            .collect();
        let inc = mean.increment(i, j)?;
        println!("swap ({i:>2},{j:>2}) mean Δ increment {inc:.6?}  recomputed {fresh:.6?}");
        let fresh = mmd2_full(&kmat, &after)? - mmd_before;
        println!("               MMD² increment {:+.10}  recomputed {fresh:+.10}", mmd.increment(i, j)?);
    }

    // committing swaps keeps the running state exact
    for (&i, &j) in a.iter().zip(&b) {
        mmd.commit_swap(i, j)?;
    }
    println!(
        "after 3 commits: running MMD² {:.12}, from scratch {:.12}",
        mmd.mmd2(),
        mmd2_full(&kmat, mmd.labels())?
    );
    Ok(())
}
