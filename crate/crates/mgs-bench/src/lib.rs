//! Shared scene builders for the pipeline benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgs_core::image::Image;
use mgs_core::scene::reference_image;
use mgs_core::splat::{init_model, InitConfig, SplatModel};

/// A model with randomized shapes, opacities and colors, roughly resembling
/// a mid-training state.
pub fn random_model(n: usize, width: u32, height: u32, seed: u64) -> SplatModel {
    let cfg = InitConfig {
        n,
        width,
        height,
        ..InitConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = init_model(&cfg, None, &mut rng).unwrap();
    for s in model.splats.iter_mut() {
        s.log_scale = [
            (1.0 + 3.0 * rng.random::<f64>()).ln(),
            (1.0 + 3.0 * rng.random::<f64>()).ln(),
        ];
        s.theta = rng.random::<f64>() * std::f64::consts::PI;
        s.opacity_raw = 4.0 * rng.random::<f64>() - 2.0;
        s.color_raw = [
            2.0 * rng.random::<f64>() - 1.0,
            2.0 * rng.random::<f64>() - 1.0,
            2.0 * rng.random::<f64>() - 1.0,
        ];
    }
    model
}

pub fn target(width: u32, height: u32) -> Image {
    reference_image(width, height, 12345)
}
