use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Gallery, TextRecord};
use crate::error::{Error, Result};

/// A ground-truth relevance pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub text_id: String,
    pub video_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub videos: usize,
    pub texts: usize,
}

/// Dataset description stored next to the binary files as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Counts>,
    pub pairs: Vec<Pair>,
    /// Generator settings, present when the dataset is synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_config: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(dataset: impl Into<String>, dim: usize, pairs: Vec<Pair>) -> Self {
        Self { dataset: dataset.into(), dim, counts: None, pairs, synth_config: None }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        fs::write(path, json)?;
        Ok(())
    }

    /// Checks that dimensions and counts agree and every referenced id exists.
    pub fn validate(&self, gallery: &Gallery, texts: &[TextRecord]) -> Result<()> {
        if self.dim != gallery.dim() {
            return Err(Error::ShapeMismatch(format!(
                "manifest dim {} but gallery dim {}",
                self.dim,
                gallery.dim()
            )));
        }
        if let Some(t) = texts.iter().find(|t| t.dim() != self.dim) {
            return Err(Error::ShapeMismatch(format!(
                "text {:?} has dimension {}, manifest has {}",
                t.id(),
                t.dim(),
                self.dim
            )));
        }
        if let Some(c) = self.counts {
            if c.videos != gallery.len() || c.texts != texts.len() {
                return Err(Error::ShapeMismatch(format!(
                    "manifest counts {}/{} but files hold {}/{} videos/texts",
                    c.videos,
                    c.texts,
                    gallery.len(),
                    texts.len()
                )));
            }
        }
        let text_ids: HashSet<&str> = texts.iter().map(TextRecord::id).collect();
        for pair in &self.pairs {
            if !text_ids.contains(pair.text_id.as_str()) {
                return Err(Error::MissingGroundTruth(format!("text {:?}", pair.text_id)));
            }
            if gallery.position(&pair.video_id).is_none() {
                return Err(Error::MissingGroundTruth(format!("video {:?}", pair.video_id)));
            }
        }
        Ok(())
    }
}
