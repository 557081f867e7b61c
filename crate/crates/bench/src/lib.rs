//! Fixtures shared by the benchmarks.

use mtlr_core::gen::{generate, GenSpec};
use mtlr_core::Dataset;

/// A generated intercept-form dataset with exactly `n` rows and `d` variables.
pub fn fixture(n: usize, d: usize, seed: u64) -> Dataset {
    let spec = GenSpec { d_range: (d, d), n_range: (n, n), seed, ..GenSpec::default() };
    generate(&spec).expect("feasible fixture spec").ds
}
