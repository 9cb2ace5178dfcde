//! Multi-granularity embedding data model.
//!
//! A video carries three granularities of visual features: per-frame
//! features (`T × D`), per-patch features (`T × P × D`, frame-major) and the
//! text-agnostic coarse vector, which is the L2-normalized mean of the frame
//! rows. Frame and patch features are kept exactly as supplied; only the
//! coarse vector and the text feature are normalized, because the similarity
//! stage needs unit vectors while attention pooling works on raw features.

mod format;
mod manifest;

use std::collections::HashMap;

pub use format::{
    load_dataset, load_gallery, load_texts, read_texts, read_videos, save_texts, save_videos,
    write_gallery, write_texts, write_videos, Dataset, FORMAT_VERSION, HEADER_LEN, MAGIC,
    MANIFEST_FILE, TEXTS_FILE, VIDEOS_FILE,
};
pub use manifest::{Counts, Manifest, Pair};

use crate::error::{Error, Result};

const MIN_NORM: f64 = 1e-12;

/// Returns `v / ||v||`. Accumulates in f64.
pub fn normalize(v: &[f32]) -> Result<Vec<f32>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("vector".into()));
    }
    let norm = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    if norm < MIN_NORM {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|&x| (f64::from(x) / norm) as f32).collect())
}

/// Arithmetic mean of the rows of a row-major `rows × dim` matrix.
pub fn mean_pool(rows: &[f32], dim: usize) -> Result<Vec<f32>> {
    if dim == 0 || rows.is_empty() {
        return Err(Error::EmptyInput("mean_pool needs at least one row"));
    }
    if rows.len() % dim != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} values do not form rows of width {dim}",
            rows.len()
        )));
    }
    let count = rows.len() / dim;
    let mut acc = vec![0f64; dim];
    for row in rows.chunks_exact(dim) {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += f64::from(x);
        }
    }
    Ok(acc.into_iter().map(|a| (a / count as f64) as f32).collect())
}

/// One gallery video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    id: String,
    dim: usize,
    num_frames: usize,
    patches_per_frame: usize,
    frames: Vec<f32>,
    patches: Vec<f32>,
    coarse: Vec<f32>,
}

impl VideoRecord {
    /// Builds a record from raw frame rows (`T × D`) and patch rows
    /// (`T × P × D`, frame-major) and derives the coarse vector.
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        num_frames: usize,
        patches_per_frame: usize,
        frames: Vec<f32>,
        patches: Vec<f32>,
    ) -> Result<Self> {
        let id = id.into();
        if dim == 0 {
            return Err(Error::ShapeMismatch(format!("video {id:?}: dimension is zero")));
        }
        if num_frames == 0 {
            return Err(Error::EmptyInput("video needs at least one frame"));
        }
        if patches_per_frame == 0 {
            return Err(Error::EmptyInput("video needs at least one patch per frame"));
        }
        if frames.len() != num_frames * dim {
            return Err(Error::ShapeMismatch(format!(
                "video {id:?}: expected {} frame values, got {}",
                num_frames * dim,
                frames.len()
            )));
        }
        if patches.len() != num_frames * patches_per_frame * dim {
            return Err(Error::ShapeMismatch(format!(
                "video {id:?}: expected {} patch values, got {}",
                num_frames * patches_per_frame * dim,
                patches.len()
            )));
        }
        if frames.iter().chain(&patches).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("video {id:?}")));
        }
        let coarse = normalize(&mean_pool(&frames, dim)?)?;
        Ok(Self { id, dim, num_frames, patches_per_frame, frames, patches, coarse })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn patches_per_frame(&self) -> usize {
        self.patches_per_frame
    }

    /// Total patch rows across all frames.
    pub fn num_patches(&self) -> usize {
        self.num_frames * self.patches_per_frame
    }

    /// Raw frame rows, row-major `T × D`.
    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        &self.frames[i * self.dim..(i + 1) * self.dim]
    }

    /// Raw patch rows, `T × P × D`, frame-major then patch-major.
    pub fn patches(&self) -> &[f32] {
        &self.patches
    }

    /// Unit-norm text-agnostic vector: normalized mean of the frame rows.
    pub fn coarse(&self) -> &[f32] {
        &self.coarse
    }
}

/// One query caption with its sentence feature.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRecord {
    id: String,
    raw: Vec<f32>,
    feature: Vec<f32>,
    caption: Option<String>,
}

impl TextRecord {
    pub fn new(id: impl Into<String>, raw: Vec<f32>) -> Result<Self> {
        let id = id.into();
        if raw.is_empty() {
            return Err(Error::EmptyInput("text feature is empty"));
        }
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("text {id:?}")));
        }
        let feature = normalize(&raw)?;
        Ok(Self { id, raw, feature, caption: None })
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = Some(caption.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.raw.len()
    }

    /// Unit-norm sentence feature.
    pub fn feature(&self) -> &[f32] {
        &self.feature
    }

    /// Feature exactly as supplied; this is what gets serialized.
    pub fn raw(&self) -> &[f32] {
        &self.raw
    }

    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }
}

/// Immutable, indexed collection of videos sharing one embedding dimension.
#[derive(Debug, Clone)]
pub struct Gallery {
    dim: usize,
    videos: Vec<VideoRecord>,
    index: HashMap<String, usize>,
}

impl Gallery {
    pub fn new(dim: usize, videos: Vec<VideoRecord>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch("gallery dimension is zero".into()));
        }
        let mut index = HashMap::with_capacity(videos.len());
        for (pos, video) in videos.iter().enumerate() {
            if video.dim() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "video {:?} has dimension {}, gallery has {dim}",
                    video.id(),
                    video.dim()
                )));
            }
            if index.insert(video.id().to_owned(), pos).is_some() {
                return Err(Error::DuplicateId(video.id().to_owned()));
            }
        }
        Ok(Self { dim, videos, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    pub fn get(&self, pos: usize) -> Option<&VideoRecord> {
        self.videos.get(pos)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&VideoRecord> {
        self.position(id).map(|p| &self.videos[p])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, VideoRecord> {
        self.videos.iter()
    }
}
