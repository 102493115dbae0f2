//! Seeded random fixtures. Every consumer derives its generator from a single
//! `u64` seed so reports are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{Grid3, GridField};
use crate::tensor::{exp_so3, Mat3, Rot3, Vec3};

/// Fixtures below this `|det|` are resampled.
pub const MIN_ABS_DET: f64 = 0.1;

pub type FixtureRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> FixtureRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut impl Rng) -> Vec3 {
    Vec3::from_fn(|_, _| rng.gen_range(-1.0..=1.0))
}

/// Entries uniform in `[-1, 1]`.
pub fn mat3(rng: &mut impl Rng) -> Mat3 {
    Mat3::from_fn(|_, _| rng.gen_range(-1.0..=1.0))
}

/// Like [`mat3`], resampled until `|det| >= MIN_ABS_DET`.
pub fn invertible_mat3(rng: &mut impl Rng) -> Mat3 {
    loop {
        let m = mat3(rng);
        if m.determinant().abs() >= MIN_ABS_DET {
            return m;
        }
    }
}

/// Rotation with axis-angle vector uniform in the cube `[-pi, pi]^3`.
pub fn rotation(rng: &mut impl Rng) -> Rot3 {
    exp_so3(&(vec3(rng) * std::f64::consts::PI))
}

/// Smooth random matrix field: a few random low-frequency Fourier modes per
/// entry, scaled to amplitude about one.
pub fn smooth_mat3_field(grid: &Grid3, rng: &mut impl Rng) -> GridField<Mat3> {
    const MODES: usize = 3;
    let modes: Vec<(Mat3, Vec3, Mat3)> = (0..MODES)
        .map(|_| (mat3(rng), vec3(rng) * 2.0 * std::f64::consts::PI, mat3(rng) * std::f64::consts::PI))
        .collect();
    GridField::from_positions(*grid, |x| {
        modes.iter().fold(Mat3::zeros(), |acc, (amp, k, phase)| {
            let t = k.dot(&x);
            acc + Mat3::from_fn(|i, j| amp[(i, j)] * (t + phase[(i, j)]).sin()) / MODES as f64
        })
    })
}
