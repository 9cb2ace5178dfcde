//! Text-gated interaction block.
//!
//! A parameter-free attention pooling: the sentence feature scores every
//! visual row by dot product, the scores are divided by a temperature and
//! passed through a softmax, and the rows are averaged with those weights.
//! Applied over frame rows it yields the text-frame feature, applied over
//! every patch of every frame (one joint softmax) it yields the text-patch
//! feature.

use crate::error::{Error, Result};
use crate::store::{normalize, VideoRecord};

pub const DEFAULT_FRAME_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_PATCH_TEMPERATURE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TibConfig {
    pub temperature_frame: f64,
    pub temperature_patch: f64,
}

impl Default for TibConfig {
    fn default() -> Self {
        Self {
            temperature_frame: DEFAULT_FRAME_TEMPERATURE,
            temperature_patch: DEFAULT_PATCH_TEMPERATURE,
        }
    }
}

impl TibConfig {
    pub fn new(temperature_frame: f64, temperature_patch: f64) -> Result<Self> {
        let cfg = Self { temperature_frame, temperature_patch };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_temperature(self.temperature_frame)?;
        check_temperature(self.temperature_patch)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("temperature must be positive, got {t}")))
    }
}

fn check_rows(features: &[f32], dim: usize) -> Result<usize> {
    if dim == 0 || features.is_empty() {
        return Err(Error::EmptyInput("attention pooling needs at least one row"));
    }
    if features.len() % dim != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} values do not form rows of width {dim}",
            features.len()
        )));
    }
    Ok(features.len() / dim)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Softmax attention weights of `text` over the rows of `features`
/// (row-major, width `text.len()`), with logits `row·text / temperature`.
pub fn tib_weights(features: &[f32], text: &[f32], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    check_rows(features, text.len())?;
    let logits: Vec<f64> =
        features.chunks_exact(text.len()).map(|row| dot(row, text) / temperature).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Attention-weighted sum of the rows of `features`. Not normalized.
pub fn tib_aggregate(features: &[f32], text: &[f32], temperature: f64) -> Result<Vec<f32>> {
    let dim = text.len();
    let weights = tib_weights(features, text, temperature)?;
    let mut acc = vec![0f64; dim];
    for (row, &w) in features.chunks_exact(dim).zip(&weights) {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += w * f64::from(x);
        }
    }
    Ok(acc.into_iter().map(|a| a as f32).collect())
}

fn check_video_dim(video: &VideoRecord, text: &[f32]) -> Result<()> {
    if video.dim() != text.len() {
        return Err(Error::ShapeMismatch(format!(
            "video {:?} has dimension {}, text has {}",
            video.id(),
            video.dim(),
            text.len()
        )));
    }
    Ok(())
}

/// Unit-norm text-frame feature: attention pooling over the frame rows.
pub fn text_frame_feature(video: &VideoRecord, text: &[f32], cfg: &TibConfig) -> Result<Vec<f32>> {
    check_video_dim(video, text)?;
    normalize(&tib_aggregate(video.frames(), text, cfg.temperature_frame)?)
}

/// Unit-norm text-patch feature: one softmax over all `T × P` patch rows.
pub fn text_patch_feature(video: &VideoRecord, text: &[f32], cfg: &TibConfig) -> Result<Vec<f32>> {
    check_video_dim(video, text)?;
    normalize(&tib_aggregate(video.patches(), text, cfg.temperature_patch)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::mean_pool;
    use proptest::prelude::*;

    /// Two-way softmax evaluated by hand: 1 / (1 + exp(-gap)).
    fn two_way(gap: f64) -> (f64, f64) {
        let hi = 1.0 / (1.0 + (-gap).exp());
        (hi, 1.0 - hi)
    }

    #[test]
    fn singleton_and_identical_rows() {
        assert_eq!(tib_weights(&[0.3, -0.7], &[1.0, 2.0], 0.1).unwrap(), vec![1.0]);
        let w = tib_weights(&[0.3, -0.7, 0.3, -0.7], &[1.0, 2.0], 0.1).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert_eq!(tib_aggregate(&[0.3, -0.7], &[1.0, 2.0], 0.01).unwrap(), vec![0.3, -0.7]);
        assert_eq!(
            tib_aggregate(&[0.3, -0.7, 0.3, -0.7, 0.3, -0.7], &[1.0, 2.0], 0.01).unwrap(),
            vec![0.3, -0.7]
        );
    }

    #[test]
    fn two_row_example() {
        let (hi, lo) = two_way(10.0);
        assert!((hi - 0.999_954_6).abs() < 1e-7 && (lo - 0.000_045_4).abs() < 1e-7);
        let w = tib_weights(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0], 0.1).unwrap();
        assert!((w[0] - hi).abs() < 1e-12 && (w[1] - lo).abs() < 1e-12);
        let agg = tib_aggregate(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0], 0.1).unwrap();
        assert!((f64::from(agg[0]) - hi).abs() < 1e-7);
        assert!((f64::from(agg[1]) - lo).abs() < 1e-7);
    }

    #[test]
    fn errors() {
        assert!(matches!(tib_weights(&[], &[1.0], 0.1), Err(Error::EmptyInput(_))));
        assert!(matches!(tib_weights(&[1.0], &[1.0], 0.0), Err(Error::InvalidParams(_))));
        assert!(matches!(tib_weights(&[1.0, 2.0, 3.0], &[1.0, 0.0], 1.0), Err(Error::ShapeMismatch(_))));
        assert!(TibConfig::new(0.1, -1.0).is_err());
    }

    #[test]
    fn large_logits_do_not_overflow() {
        // logits of several thousand would overflow a naive exp
        let w = tib_weights(&[50.0, 0.0, 49.0, 0.0], &[1.0, 0.0], 0.01).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
        assert!((w[0] + w[1] - 1.0).abs() < 1e-12);
    }

    fn video_2frames() -> VideoRecord {
        // frames [1,0],[0,1]; patches: frame 0 -> [1,0],[0.5,0.5]; frame 1 -> [0,1],[0,2]
        VideoRecord::new(
            "v",
            2,
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.0, 2.0],
        )
        .unwrap()
    }

    #[test]
    fn text_frame_feature_two_frames() {
        let (hi, lo) = two_way(10.0);
        let n = (hi * hi + lo * lo).sqrt();
        let f = text_frame_feature(&video_2frames(), &[1.0, 0.0], &TibConfig::default()).unwrap();
        assert!((f64::from(f[0]) - hi / n).abs() < 1e-6);
        assert!((f64::from(f[1]) - lo / n).abs() < 1e-6);
    }

    #[test]
    fn text_patch_feature_uses_joint_softmax() {
        // logits at pi=0.01 with text [1,0]: 100, 50, 0, 0
        let e: Vec<f64> = [100.0f64, 50.0, 0.0, 0.0].iter().map(|l| (l - 100.0).exp()).collect();
        let z: f64 = e.iter().sum();
        let w: Vec<f64> = e.iter().map(|x| x / z).collect();
        let raw = [w[0] + 0.5 * w[1], 0.5 * w[1] + w[2] + 2.0 * w[3]];
        let n = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
        let f = text_patch_feature(&video_2frames(), &[1.0, 0.0], &TibConfig::default()).unwrap();
        assert!((f64::from(f[0]) - raw[0] / n).abs() < 1e-6);
        assert!((f64::from(f[1]) - raw[1] / n).abs() < 1e-6);
    }

    #[test]
    fn single_frame_gives_normalized_frame() {
        let v = VideoRecord::new("v", 2, 1, 1, vec![3.0, 4.0], vec![0.0, 2.0]).unwrap();
        let cfg = TibConfig::default();
        assert_eq!(text_frame_feature(&v, &[0.2, 0.9], &cfg).unwrap(), vec![0.6, 0.8]);
        assert_eq!(text_patch_feature(&v, &[0.2, 0.9], &cfg).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn dim_mismatch() {
        let err = text_frame_feature(&video_2frames(), &[1.0, 0.0, 0.0], &TibConfig::default());
        assert!(matches!(err, Err(Error::ShapeMismatch(_))));
    }

    fn rows_and_text() -> impl Strategy<Value = (Vec<f32>, Vec<f32>, f64)> {
        (1usize..6, 1usize..10).prop_flat_map(|(dim, m)| {
            (
                prop::collection::vec(-2.0f32..2.0, dim * m),
                prop::collection::vec(-1.0f32..1.0, dim),
                0.005f64..5.0,
            )
        })
    }

    proptest! {
        #[test]
        fn weights_are_on_simplex((rows, text, t) in rows_and_text()) {
            let w = tib_weights(&rows, &text, t).unwrap();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn aggregate_in_bounding_box((rows, text, t) in rows_and_text()) {
            let dim = text.len();
            let out = tib_aggregate(&rows, &text, t).unwrap();
            for d in 0..dim {
                let col = rows.chunks_exact(dim).map(|r| r[d]);
                let (lo, hi) = col.fold((f32::MAX, f32::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
                prop_assert!(out[d] >= lo - 1e-5 && out[d] <= hi + 1e-5);
            }
        }

        #[test]
        fn huge_temperature_is_mean_pooling((rows, text, _t) in rows_and_text()) {
            let dim = text.len();
            let max_logit = rows
                .chunks_exact(dim)
                .map(|r| dot(r, &text).abs())
                .fold(1e-3, f64::max);
            let out = tib_aggregate(&rows, &text, 1e6 * max_logit).unwrap();
            let mean = mean_pool(&rows, dim).unwrap();
            for (a, b) in out.iter().zip(&mean) {
                prop_assert!((a - b).abs() < 1e-4);
            }
        }
    }
}
