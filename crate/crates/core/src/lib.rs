//! Block-restricted permutation tests for two-sample problems.
//!
//! Instead of relabeling all `N` points, the reference distribution is
//! drawn from products of disjoint label swaps between representatives of
//! complementary score blocks. Reference statistics are evaluated
//! incrementally along the swap path, so a draw with `L` swaps costs
//! `O(L·d)` for the mean difference and `O(L·N)` for the unbiased MMD².
//!
//! ```
//! use blockperm::{run_test, PooledSample, TestConfig};
//!
//! let a = [0.1, 0.4, -0.3, 0.2, 0.0, 0.5, -0.1, 0.3];
//! let b = [1.1, 0.9, 1.4, 0.8, 1.2, 1.0, 0.7, 1.3];
//! let values: Vec<f64> = a.iter().chain(&b).copied().collect();
//! let sample = PooledSample::from_scalars(values, 8, 8).unwrap();
//! let labels = blockperm::LabelState::first_n1(8, 8);
//! let cfg = TestConfig { rho: 0.5, blocks: 2, perms: 99, ..TestConfig::default() };
//! let result = run_test(&sample, &labels, &cfg).unwrap();
//! assert!(result.p_value >= 0.01 && result.p_value <= 1.0);
//! ```

pub mod blockdesign;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod rng;
pub mod sampler;
pub mod sim;
pub mod stats;
pub mod testing;

pub use blockdesign::{build_swap_set, BlockDesign, SwapSet};
pub use data::{Group, IndexPermutation, LabelState, PooledSample, RestrictedPermutation};
pub use error::{Error, Result};
pub use rng::StreamKey;
pub use stats::{Bandwidth, KernelMatrix, Sidedness};
pub use testing::{run_full_test, run_restricted_test, run_test, p_value, Scheme, Statistic, TestConfig, TestResult};
