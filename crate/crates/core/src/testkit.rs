//! Synthetic multi-granularity galleries with planted relevance, and a
//! brute-force reference ranker.
//!
//! Every query is built around a latent unit "concept" vector. Its target
//! video is made of frames and patches scattered around that concept. The
//! distractor modes add one extra video per query:
//!
//! * `CoarseConfusable`: every frame is a weak mixture of the concept and
//!   background, tuned so its mean-pooled vector is closer to the query than
//!   the target's. The target instead has a single strongly matching key
//!   frame among background frames. Coarse recall prefers the distractor,
//!   while text-gated pooling finds the target's key frame.
//! * `PatchNoise`: target frames carry heavy noise, and the distractor holds
//!   one spurious frame (and its patches) that matches the concept exactly,
//!   surrounded by strong unrelated frames so its coarse vector is nearly
//!   orthogonal to the query. Reranking everything lets these local matches
//!   overtake the targets; a short candidate list keeps them out.
//!
//! The random source is xoshiro256++ seeded with `seed`; output is
//! bit-identical for a fixed config.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use ndarray::Array2;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::BatchFeatures;
use crate::ranking::{Hit, RankedList, SearchConfig, Stage};
use crate::store::{Gallery, Manifest, Pair, TextRecord, VideoRecord};

pub const RNG_ALGORITHM: &str = "xoshiro256++";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistractorMode {
    None,
    CoarseConfusable,
    PatchNoise,
}

impl DistractorMode {
    pub fn name(&self) -> &'static str {
        match self {
            DistractorMode::None => "none",
            DistractorMode::CoarseConfusable => "coarse-confusable",
            DistractorMode::PatchNoise => "patch-noise",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::None, Self::CoarseConfusable, Self::PatchNoise]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub videos: usize,
    pub queries: usize,
    pub dim: usize,
    pub frames: usize,
    pub patches_per_frame: usize,
    pub seed: u64,
    /// Magnitude of the noise added to each query's concept vector.
    pub noise: f64,
    pub mode: DistractorMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            videos: 100,
            queries: 50,
            dim: 64,
            frames: 12,
            patches_per_frame: 4,
            seed: 0,
            noise: 0.0,
            mode: DistractorMode::None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("videos", self.videos),
            ("queries", self.queries),
            ("dim", self.dim),
            ("frames", self.frames),
            ("patches_per_frame", self.patches_per_frame),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
        }
        if self.frames > u16::MAX as usize || self.patches_per_frame > u16::MAX as usize {
            return Err(Error::InvalidConfig("frames and patches must fit in u16".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::InvalidConfig("noise must be non-negative".into()));
        }
        let needed = match self.mode {
            DistractorMode::None => self.queries,
            _ => 2 * self.queries,
        };
        if self.videos < needed {
            return Err(Error::InvalidConfig(format!(
                "mode {} with {} queries needs at least {needed} videos",
                self.mode.name(),
                self.queries
            )));
        }
        if self.mode == DistractorMode::CoarseConfusable && self.frames < 2 {
            return Err(Error::InvalidConfig("coarse-confusable mode needs at least 2 frames".into()));
        }
        if self.mode == DistractorMode::PatchNoise && self.frames < 2 {
            return Err(Error::InvalidConfig("patch-noise mode needs at least 2 frames".into()));
        }
        Ok(())
    }
}

/// A generated benchmark: gallery, one text per query, and the ground truth.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub gallery: Gallery,
    pub texts: Vec<TextRecord>,
    pub manifest: Manifest,
}

// frame/patch spread around the concept in ordinary videos
const ORDINARY_JITTER: f64 = 0.5;
// confusable target: background frames carry this much of the concept
const TARGET_BACKGROUND_MIX: f64 = 0.3;
const KEY_JITTER: f64 = 0.3;
// confusable distractor starts at this concept weight and grows until its
// coarse score beats the target's by the margin
const DISTRACTOR_MIX: f64 = 0.45;
const CONFUSABLE_MARGIN: f64 = 0.02;
// patch-noise: heavy target noise, strong unrelated frames around the spurious match
const NOISY_TARGET_JITTER: f64 = 3.0;
const SPURIOUS_BACKGROUND_SCALE: f64 = 2.0;

struct Gen {
    rng: Xoshiro256PlusPlus,
    dim: usize,
}

impl Gen {
    fn gaussian(&mut self) -> Vec<f64> {
        (0..self.dim).map(|_| self.rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn unit(&mut self) -> Vec<f64> {
        loop {
            let v = self.gaussian();
            let n = norm(&v);
            if n > 1e-6 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    /// `base + amount · u` for a fresh random unit `u`.
    fn jitter(&mut self, base: &[f64], amount: f64) -> Vec<f64> {
        let u = self.unit();
        base.iter().zip(&u).map(|(b, x)| b + amount * x).collect()
    }

    /// Unit vector orthogonal to `c` (assumed unit).
    fn orthogonal_unit(&mut self, c: &[f64]) -> Vec<f64> {
        loop {
            let mut v = self.gaussian();
            let p = dot(&v, c);
            for (x, y) in v.iter_mut().zip(c) {
                *x -= p * y;
            }
            let n = norm(&v);
            if n > 1e-6 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    fn patches_around(&mut self, frames: &[Vec<f64>], per_frame: usize, amount: f64) -> Vec<Vec<f64>> {
        frames
            .iter()
            .flat_map(|f| (0..per_frame).map(|_| f.clone()).collect::<Vec<_>>())
            .map(|f| self.jitter(&f, amount))
            .collect()
    }

    fn ordinary(&mut self, concept: &[f64], frames: usize, per_frame: usize, amount: f64) -> Parts {
        let fr: Vec<Vec<f64>> = (0..frames).map(|_| self.jitter(concept, amount)).collect();
        let patches = self.patches_around(&fr, per_frame, ORDINARY_JITTER);
        Parts { frames: fr, patches }
    }
}

struct Parts {
    frames: Vec<Vec<f64>>,
    patches: Vec<Vec<f64>>,
}

impl Parts {
    fn into_record(self, id: String, dim: usize, per_frame: usize) -> Result<VideoRecord> {
        let t = self.frames.len();
        let frames = self.frames.into_iter().flatten().map(|x| x as f32).collect();
        let patches = self.patches.into_iter().flatten().map(|x| x as f32).collect();
        VideoRecord::new(id, dim, t, per_frame, frames, patches)
    }

    fn coarse_cosine(&self, query: &[f64]) -> f64 {
        let dim = query.len();
        let mut mean = vec![0.0; dim];
        for f in &self.frames {
            for (m, x) in mean.iter_mut().zip(f) {
                *m += x;
            }
        }
        dot(&mean, query) / (norm(&mean) * norm(query))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Generates a gallery of `videos` records and `queries` texts. Query `q`
/// targets video `q`; distractors (if any) occupy positions `Q..2Q`; the
/// rest are fillers with unrelated concepts.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let dim = cfg.dim;
    let t = cfg.frames;
    let p = cfg.patches_per_frame;
    let mut g = Gen { rng: Xoshiro256PlusPlus::seed_from_u64(cfg.seed), dim };

    let concepts: Vec<Vec<f64>> = (0..cfg.queries).map(|_| g.unit()).collect();
    let queries: Vec<Vec<f64>> = concepts.iter().map(|c| g.jitter(c, cfg.noise)).collect();

    let mut parts: Vec<Parts> = Vec::with_capacity(cfg.videos);
    for c in &concepts {
        let target = match cfg.mode {
            DistractorMode::None => g.ordinary(c, t, p, ORDINARY_JITTER),
            DistractorMode::CoarseConfusable => {
                let key = g.rng.random_range(0..t);
                let frames: Vec<Vec<f64>> = (0..t)
                    .map(|i| {
                        if i == key {
                            g.jitter(c, KEY_JITTER)
                        } else {
                            let b = g.unit();
                            c.iter().zip(&b).map(|(x, y)| TARGET_BACKGROUND_MIX * x + y).collect()
                        }
                    })
                    .collect();
                let patches = g.patches_around(&frames, p, ORDINARY_JITTER);
                Parts { frames, patches }
            }
            DistractorMode::PatchNoise => g.ordinary(c, t, p, NOISY_TARGET_JITTER),
        };
        parts.push(target);
    }

    match cfg.mode {
        DistractorMode::None => {}
        DistractorMode::CoarseConfusable => {
            for (q, c) in concepts.iter().enumerate() {
                let to_beat = parts[q].coarse_cosine(&queries[q]) + CONFUSABLE_MARGIN;
                let backgrounds: Vec<Vec<f64>> = (0..t).map(|_| g.unit()).collect();
                let jitters: Vec<Vec<f64>> = (0..t * p).map(|_| g.unit()).collect();
                let mut mix = DISTRACTOR_MIX;
                let distractor = loop {
                    let frames: Vec<Vec<f64>> = backgrounds
                        .iter()
                        .map(|b| c.iter().zip(b).map(|(x, y)| mix * x + y).collect())
                        .collect();
                    let patches = (0..t * p)
                        .map(|i| {
                            let f = &frames[i / p];
                            f.iter().zip(&jitters[i]).map(|(x, u)| x + ORDINARY_JITTER * u).collect()
                        })
                        .collect();
                    let cand = Parts { frames, patches };
                    if cand.coarse_cosine(&queries[q]) > to_beat || mix > 64.0 {
                        break cand;
                    }
                    mix *= 1.1;
                };
                parts.push(distractor);
            }
        }
        DistractorMode::PatchNoise => {
            for c in &concepts {
                let key = g.rng.random_range(0..t);
                let frames: Vec<Vec<f64>> = (0..t)
                    .map(|i| {
                        if i == key {
                            c.clone()
                        } else {
                            g.orthogonal_unit(c).into_iter().map(|x| SPURIOUS_BACKGROUND_SCALE * x).collect()
                        }
                    })
                    .collect();
                let patches = g.patches_around(&frames, p, KEY_JITTER);
                parts.push(Parts { frames, patches });
            }
        }
    }

    while parts.len() < cfg.videos {
        let c = g.unit();
        let filler = g.ordinary(&c, t, p, ORDINARY_JITTER);
        parts.push(filler);
    }

    let videos = parts
        .into_iter()
        .enumerate()
        .map(|(i, part)| part.into_record(format!("video{i:05}"), dim, p))
        .collect::<Result<Vec<_>>>()?;
    let gallery = Gallery::new(dim, videos)?;

    let texts = queries
        .iter()
        .enumerate()
        .map(|(q, v)| TextRecord::new(format!("text{q:05}"), v.iter().map(|&x| x as f32).collect()))
        .collect::<Result<Vec<_>>>()?;

    let pairs = (0..cfg.queries)
        .map(|q| Pair { text_id: format!("text{q:05}"), video_id: format!("video{q:05}") })
        .collect();
    let mut manifest = Manifest::new(format!("synthetic-{}", cfg.mode.name()), dim, pairs);
    let mut echo = serde_json::to_value(cfg)?;
    if let serde_json::Value::Object(map) = &mut echo {
        map.insert("rng".into(), RNG_ALGORITHM.into());
    }
    manifest.synth_config = Some(echo);

    Ok(SynthData { gallery, texts, manifest })
}

/// Reference ranking of the whole gallery, written independently of the
/// engine: plain f64 loops over the raw frame and patch rows.
pub fn brute_force_rank(text: &TextRecord, gallery: &Gallery, cfg: &SearchConfig) -> Result<RankedList> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let q: Vec<f64> = text.feature().iter().map(|&x| x as f64).collect();
    let [w1, w2, w3] = cfg.fusion.as_array();
    let dim = gallery.dim();

    let unit_cos = |v: &[f64]| dot(v, &q) / norm(v);
    let pooled = |rows: &[f32], temperature: f64| -> Vec<f64> {
        let m = rows.len() / dim;
        let mut logits = vec![0.0; m];
        for r in 0..m {
            let mut s = 0.0;
            for d in 0..dim {
                s += rows[r * dim + d] as f64 * q[d];
            }
            logits[r] = s / temperature;
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut out = vec![0.0; dim];
        for r in 0..m {
            for d in 0..dim {
                out[d] += exps[r] / z * rows[r * dim + d] as f64;
            }
        }
        out
    };

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(gallery.len());
    for (pos, video) in gallery.iter().enumerate() {
        let frames = video.frames();
        let t = video.num_frames();
        let mut mean = vec![0.0; dim];
        for i in 0..t {
            for d in 0..dim {
                mean[d] += frames[i * dim + d] as f64 / t as f64;
            }
        }
        let mut s = w1 * unit_cos(&mean);
        if w2 > 0.0 {
            s += w2 * unit_cos(&pooled(frames, cfg.tib.temperature_frame));
        }
        if w3 > 0.0 {
            s += w3 * unit_cos(&pooled(video.patches(), cfg.tib.temperature_patch));
        }
        scored.push((s, pos));
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let hits = scored
        .into_iter()
        .map(|(score, pos)| Hit { video_id: gallery.videos()[pos].id().to_owned(), score })
        .collect();
    Ok(RankedList { stage: Stage::Final, hits })
}

/// A `batch × dim` pair of Gaussian feature matrices with unit-norm rows,
/// drawn from xoshiro256++ seeded with `seed`.
pub fn random_unit_batch(batch: usize, dim: usize, seed: u64) -> Result<BatchFeatures> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut draw = || Array2::from_shape_fn((batch, dim), |_| rng.sample::<f64, _>(StandardNormal));
    let video = draw();
    let text = draw();
    BatchFeatures::new(video, text)?.normalized_rows()
}
