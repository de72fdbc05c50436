//! Depth-map corruption: multiplicative noise plus random holes, a stand-in
//! for imperfect splat-rendered depth feeding hypothesis initialization.

use polar_core::FloatImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Multiplies each valid depth by (1 + u), u ~ Uniform(-noise_rel, noise_rel),
/// and zeroes a `hole_fraction` of valid pixels. Deterministic given `seed`.
pub fn corrupt_depth(
    depth: &FloatImage,
    noise_rel: f64,
    hole_fraction: f64,
    seed: u64,
) -> FloatImage {
    assert!(noise_rel >= 0.0);
    assert!((0.0..1.0).contains(&hole_fraction));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = depth.clone();
    for v in out.data_mut() {
        // Always draw both variates so the stream is independent of content.
        let u: f64 = rng.gen_range(-1.0..=1.0) * noise_rel;
        let hole: f64 = rng.gen();
        if *v > 0.0 {
            *v = if hole < hole_fraction { 0.0 } else { *v * (1.0 + u) };
        }
    }
    out
}
