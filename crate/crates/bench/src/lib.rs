//! Shared fixtures for the criterion benches.

use eercf_core::testkit::{generate, random_unit_batch};
use eercf_core::{BatchFeatures, DistractorMode, SynthConfig, SynthData};

/// A gallery sized like a small evaluation split, with 12 frames of
/// `patches` patches each at dimension 512.
pub fn gallery_fixture(videos: usize, patches: usize, seed: u64) -> SynthData {
    let cfg = SynthConfig {
        videos,
        queries: 16.min(videos),
        dim: 512,
        frames: 12,
        patches_per_frame: patches,
        seed,
        noise: 0.5,
        mode: DistractorMode::None,
    };
    generate(&cfg).expect("fixture config is valid")
}

/// Coarse, frame and patch batches for the loss benches.
pub fn loss_levels(batch: usize, dim: usize, seed: u64) -> [BatchFeatures; 3] {
    [0, 1, 2].map(|l| random_unit_batch(batch, dim, seed * 3 + l).expect("fixture config is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_the_requested_shape() {
        let data = gallery_fixture(20, 3, 1);
        assert_eq!(data.gallery.len(), 20);
        assert_eq!(data.gallery.videos()[0].patches().len(), 12 * 3 * 512);
        let levels = loss_levels(4, 8, 0);
        assert!(levels.iter().all(|b| b.batch_size() == 4 && b.dim() == 8));
    }
}
