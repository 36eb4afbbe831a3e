//! Counter-indexed random streams and uniform sampling of balls and spheres.
//!
//! Every random draw is addressed by `(seed, stream, block)`: a block of
//! [`BLOCK`] samples always comes from the same ChaCha keystream position,
//! so results do not depend on how blocks are scheduled across threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Ball, Vec3};

/// Samples per independently seekable block.
pub const BLOCK: usize = 1024;

/// Keystream words reserved per sample. Three `f64` draws use six.
const WORDS_PER_SAMPLE: u128 = 16;

/// Stream ids keep the different consumers of one seed decorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    BallOracle = 1,
    SphereOracle = 2,
    Convexity = 3,
    Rays = 4,
}

pub fn block_rng(seed: u64, stream: Stream, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(block as u128 * BLOCK as u128 * WORDS_PER_SAMPLE);
    rng
}

/// Number of blocks needed to cover `n` samples.
pub fn block_count(n: usize) -> usize {
    n.div_ceil(BLOCK)
}

/// Index range `[start, end)` of the samples in `block`.
pub fn block_range(block: usize, n: usize) -> std::ops::Range<usize> {
    let start = block * BLOCK;
    start..((block + 1) * BLOCK).min(n)
}

/// Uniform direction from two uniforms: `cos(phi) = 1 - 2v`, `theta = 2 pi w`.
pub fn direction_from_uniforms(v: f64, w: f64) -> Vec3 {
    let cos_phi = 1.0 - 2.0 * v;
    let sin_phi = (1.0 - cos_phi * cos_phi).max(0.0).sqrt();
    let (sin_theta, cos_theta) = (2.0 * PI * w).sin_cos();
    [cos_theta * sin_phi, sin_theta * sin_phi, cos_phi]
}

/// Uniform point in the ball, `rho = R u^(1/3)`.
pub fn uniform_in_ball<R: Rng>(rng: &mut R, ball: &Ball) -> Vec3 {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    let w: f64 = rng.random();
    let rho = ball.radius() * u.cbrt();
    ball.point_along(direction_from_uniforms(v, w), rho)
}

/// Uniform point on the bounding sphere. Consumes the same number of draws
/// as [`uniform_in_ball`] so both share a stream layout.
pub fn uniform_on_sphere<R: Rng>(rng: &mut R, ball: &Ball) -> Vec3 {
    let _u: f64 = rng.random();
    let v: f64 = rng.random();
    let w: f64 = rng.random();
    ball.point_along(direction_from_uniforms(v, w), ball.radius())
}
