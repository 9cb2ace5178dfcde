//! Analytic similarity-computation cost per text-video pair.
//!
//! Costs are multiply-accumulates needed to score one text against a gallery
//! of `N` videos, divided by `N`. Encoder cost is excluded (features are
//! extracted offline by every method compared), as are softmax and
//! normalization, which are dominated by the dot products.

use serde::Serialize;

use crate::error::{Error, Result};

/// Shape parameters of a retrieval workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostModelInput {
    /// Gallery size.
    pub gallery: u64,
    /// Frames (or segments) per video.
    pub frames: u64,
    /// Words per text.
    pub words: u64,
    /// Patches per video, summed over all frames.
    pub patches: u64,
    /// Candidates kept for reranking.
    pub rerank: u64,
    /// Embedding dimension.
    pub dim: u64,
}

impl CostModelInput {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("N", self.gallery),
            ("Nv", self.frames),
            ("Nt", self.words),
            ("Np", self.patches),
            ("Nr", self.rerank),
            ("D", self.dim),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParams(format!("{name} must be positive")));
        }
        if self.rerank > self.gallery {
            return Err(Error::InvalidParams(format!(
                "Nr = {} exceeds N = {}",
                self.rerank, self.gallery
            )));
        }
        Ok(())
    }
}

/// Families of similarity computation, grouped by cost structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    /// One vector per text and per video.
    SingleVector,
    /// Text vector against one vector per segment/frame.
    SegmentVector,
    /// Sentence/word against video/frame, all four combinations.
    CrossGrained,
    /// Word-frame interaction with per-token weighting.
    WordFrame,
    /// Text-conditioned frame pooling followed by a `D × D` projection.
    PooledAttention,
    /// Coarse recall over the gallery plus a fine rerank of `Nr` candidates.
    TwoStage,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::SingleVector,
        MethodKind::SegmentVector,
        MethodKind::CrossGrained,
        MethodKind::WordFrame,
        MethodKind::PooledAttention,
        MethodKind::TwoStage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::SingleVector => "single-vector",
            MethodKind::SegmentVector => "segment-vector",
            MethodKind::CrossGrained => "cross-grained",
            MethodKind::WordFrame => "word-frame",
            MethodKind::PooledAttention => "pooled-attention",
            MethodKind::TwoStage => "two-stage",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let key = name.to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name() == key).or(match key.as_str() {
            "clip4clip" | "clip-vip" | "teachtext" | "bridgeformer" => Some(MethodKind::SingleVector),
            "ts2-net" | "ts2net" | "centerclip" => Some(MethodKind::SegmentVector),
            "x-clip" | "xclip" => Some(MethodKind::CrossGrained),
            "drl" => Some(MethodKind::WordFrame),
            "x-pool" | "xpool" => Some(MethodKind::PooledAttention),
            "eercf" => Some(MethodKind::TwoStage),
            _ => None,
        })
    }

    /// Total cost over the whole gallery, as a formula.
    pub fn formula(&self) -> &'static str {
        match self {
            MethodKind::SingleVector => "N*D",
            MethodKind::SegmentVector => "N*Nv*D",
            MethodKind::CrossGrained => "N*(1+Nv*Nt+Nv+Nt)*D",
            MethodKind::WordFrame => "N*(Nv*Nt+Nv+Nt)*D",
            MethodKind::PooledAttention => "N*(Nv+D)*D",
            MethodKind::TwoStage => "N*D+Nr*(1+Nv+Np)*D",
        }
    }
}

/// Multiply-accumulates per text-video pair.
pub fn flops_per_pair(kind: MethodKind, input: &CostModelInput) -> Result<f64> {
    input.validate()?;
    let n = input.gallery as f64;
    let nv = input.frames as f64;
    let nt = input.words as f64;
    let np = input.patches as f64;
    let nr = input.rerank as f64;
    let d = input.dim as f64;
    Ok(match kind {
        MethodKind::SingleVector => d,
        MethodKind::SegmentVector => nv * d,
        MethodKind::CrossGrained => (1.0 + nv * nt + nv + nt) * d,
        // word-frame similarities plus the word and frame weighting heads
        MethodKind::WordFrame => (nv * nt + nv + nt) * d,
        MethodKind::PooledAttention => (nv + d) * d,
        MethodKind::TwoStage => d + nr * (1.0 + nv + np) * d / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlopsRow {
    pub label: String,
    pub method: MethodKind,
    pub formula: &'static str,
    pub per_pair: f64,
    /// Cost relative to the cheapest row.
    pub ratio: f64,
}

/// Cost rows sorted ascending by per-pair cost (ties keep input order).
pub fn flops_table(entries: &[(String, MethodKind, CostModelInput)]) -> Result<Vec<FlopsRow>> {
    if entries.is_empty() {
        return Err(Error::EmptyInput("no methods to tabulate"));
    }
    let mut rows = entries
        .iter()
        .map(|(label, kind, input)| {
            Ok(FlopsRow {
                label: label.clone(),
                method: *kind,
                formula: kind.formula(),
                per_pair: flops_per_pair(*kind, input)?,
                ratio: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.per_pair.total_cmp(&b.per_pair));
    let cheapest = rows[0].per_pair;
    for r in &mut rows {
        r.ratio = r.per_pair / cheapest;
    }
    Ok(rows)
}

/// Benchmark configurations with the per-method rows usually compared on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Msrvtt1k,
    Msrvtt3k,
    Vatex,
    ActivityNet,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Msrvtt1k, Preset::Msrvtt3k, Preset::Vatex, Preset::ActivityNet];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Msrvtt1k => "msrvtt1k",
            Preset::Msrvtt3k => "msrvtt3k",
            Preset::Vatex => "vatex",
            Preset::ActivityNet => "activitynet",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name.to_ascii_lowercase())
    }

    /// ViT-B/32 at 224px gives 7×7 = 49 patches per frame; 50 rerank candidates.
    pub fn input(&self) -> CostModelInput {
        let short = |gallery| CostModelInput {
            gallery,
            frames: 12,
            words: 32,
            patches: 12 * 49,
            rerank: 50,
            dim: 512,
        };
        match self {
            Preset::Msrvtt1k => short(1000),
            Preset::Msrvtt3k => short(2990),
            Preset::Vatex => short(1500),
            Preset::ActivityNet => CostModelInput {
                gallery: 4917,
                frames: 64,
                words: 64,
                patches: 64 * 49,
                rerank: 50,
                dim: 512,
            },
        }
    }

    pub fn entries(&self) -> Vec<(String, MethodKind, CostModelInput)> {
        let input = self.input();
        [
            ("CLIP4Clip", MethodKind::SingleVector),
            ("TS2-Net", MethodKind::SegmentVector),
            ("X-CLIP", MethodKind::CrossGrained),
            ("DRL", MethodKind::WordFrame),
            ("X-Pool", MethodKind::PooledAttention),
            ("EERCF", MethodKind::TwoStage),
        ]
        .into_iter()
        .map(|(label, kind)| (label.to_owned(), kind, input))
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msrvtt() -> CostModelInput {
        Preset::Msrvtt1k.input()
    }

    #[test]
    fn single_vector_is_dim() {
        assert_eq!(flops_per_pair(MethodKind::SingleVector, &msrvtt()).unwrap(), 512.0);
    }

    #[test]
    fn two_stage_example() {
        let v = flops_per_pair(MethodKind::TwoStage, &msrvtt()).unwrap();
        assert!((v - 15_897.6).abs() < 1e-9);
    }

    #[test]
    fn cross_grained_example() {
        assert_eq!(flops_per_pair(MethodKind::CrossGrained, &msrvtt()).unwrap(), 219_648.0);
    }

    #[test]
    fn invalid_inputs() {
        let mut bad = msrvtt();
        bad.dim = 0;
        assert!(matches!(flops_per_pair(MethodKind::SingleVector, &bad), Err(Error::InvalidParams(_))));
        let mut bad = msrvtt();
        bad.rerank = 2000;
        assert!(flops_per_pair(MethodKind::TwoStage, &bad).is_err());
    }

    #[test]
    fn table_sorted_with_ratios() {
        let rows = flops_table(&Preset::Msrvtt1k.entries()).unwrap();
        assert_eq!(rows[0].label, "CLIP4Clip");
        assert_eq!(rows[0].ratio, 1.0);
        assert!(rows.windows(2).all(|w| w[0].per_pair <= w[1].per_pair));
        let eercf = rows.iter().find(|r| r.label == "EERCF").unwrap();
        assert!((31.0..=32.0).contains(&eercf.ratio));
        let single = flops_table(&Preset::Vatex.entries()[..1]).unwrap();
        assert_eq!(single[0].ratio, 1.0);
        assert!(flops_table(&[]).is_err());
    }

    #[test]
    fn two_stage_monotonicity() {
        let base = msrvtt();
        let cost = |f: &dyn Fn(&mut CostModelInput)| {
            let mut i = base;
            f(&mut i);
            flops_per_pair(MethodKind::TwoStage, &i).unwrap()
        };
        assert!(cost(&|i| i.rerank = 51) > cost(&|_| {}));
        assert!(cost(&|i| i.gallery = 1001) < cost(&|_| {}));
        // rerank everything: dearer than segment-level scoring
        let mut all = base;
        all.rerank = all.gallery;
        assert!(
            flops_per_pair(MethodKind::TwoStage, &all).unwrap()
                > flops_per_pair(MethodKind::SegmentVector, &all).unwrap()
        );
        // one candidate in a huge gallery approaches the single-vector cost
        let mut tiny = base;
        tiny.rerank = 1;
        tiny.gallery = 1_000_000_000;
        let gap = flops_per_pair(MethodKind::TwoStage, &tiny).unwrap() - 512.0;
        assert!(gap > 0.0 && gap < 1e-3);
    }

    #[test]
    fn linear_in_dim() {
        for kind in MethodKind::ALL {
            let mut a = msrvtt();
            let mut b = msrvtt();
            a.dim = 256;
            b.dim = 768;
            let ca = flops_per_pair(kind, &a).unwrap();
            let cb = flops_per_pair(kind, &b).unwrap();
            if kind == MethodKind::PooledAttention {
                // the projection term is quadratic in D; the frame term is linear
                assert_eq!(cb - 768.0 * 768.0, 3.0 * (ca - 256.0 * 256.0));
            } else {
                assert!((cb - 3.0 * ca).abs() < 1e-9 * cb);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in MethodKind::ALL {
            assert_eq!(MethodKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(MethodKind::from_name("X-CLIP"), Some(MethodKind::CrossGrained));
        assert_eq!(Preset::from_name("ActivityNet"), Some(Preset::ActivityNet));
    }
}
