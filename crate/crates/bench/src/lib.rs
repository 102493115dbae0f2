//! Fixtures shared by the benchmarks in `benches/`.

use cosserat::cases::{case_by_name, CaseSamples};
use cosserat::Grid3;

/// Samples of the twist-composite case on an `n^3` unit cube.
pub fn twist_samples(n: usize) -> (Grid3, CaseSamples) {
    let grid = Grid3::unit_cube(n).expect("benchmark grids have at least 3 nodes");
    let samples = case_by_name("twist-composite").and_then(|c| c.sample_all(&grid)).expect("registered case");
    (grid, samples)
}
