//! Two-stage retrieval: exhaustive coarse recall followed by a fused
//! multi-granularity rerank of the surviving candidates, plus recall metrics.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{Gallery, Manifest, TextRecord, VideoRecord};
use crate::tib::{text_frame_feature, text_patch_feature, TibConfig};

pub const DEFAULT_TOP_K: usize = 50;

/// Non-negative weights of the coarse, text-frame and text-patch similarities,
/// normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights([f64; 3]);

impl FusionWeights {
    pub fn new(coarse: f64, frame: f64, patch: f64) -> Result<Self> {
        let w = [coarse, frame, patch];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParams(format!("fusion weights must be non-negative: {w:?}")));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParams("fusion weights sum to zero".into()));
        }
        Ok(Self(w.map(|x| x / total)))
    }

    /// Coarse similarity only; the rerank then preserves recall order.
    pub fn coarse_only() -> Self {
        Self([1.0, 0.0, 0.0])
    }

    pub fn coarse(&self) -> f64 {
        self.0[0]
    }

    pub fn frame(&self) -> f64 {
        self.0[1]
    }

    pub fn patch(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self([5.0 / 11.0, 5.0 / 11.0, 1.0 / 11.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub top_k: usize,
    pub fusion: FusionWeights,
    pub tib: TibConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { top_k: DEFAULT_TOP_K, fusion: FusionWeights::default(), tib: TibConfig::default() }
    }
}

impl SearchConfig {
    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn with_fusion(mut self, fusion: FusionWeights) -> Self {
        self.fusion = fusion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::InvalidParams("top_k must be at least 1".into()));
        }
        self.tib.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Recall,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub video_id: String,
    pub score: f64,
}

/// Videos in descending score order, ties broken by gallery position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub stage: Stage,
    pub hits: Vec<Hit>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.video_id.as_str())
    }

    /// 0-based rank of `video_id`, if present.
    pub fn rank_of(&self, video_id: &str) -> Option<usize> {
        self.hits.iter().position(|h| h.video_id == video_id)
    }
}

/// One line of the JSON-lines ranking export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub text_id: String,
    pub ranking: Vec<Hit>,
}

impl RankingRecord {
    pub fn new(text_id: &str, list: &RankedList) -> Self {
        Self { text_id: text_id.to_owned(), ranking: list.hits.clone() }
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Score plus gallery position, ordered so that "greater" means "ranks earlier".
#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f64,
    pos: usize,
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.pos.cmp(&self.pos))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

fn check_text(text: &TextRecord, gallery: &Gallery) -> Result<()> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if text.dim() != gallery.dim() {
        return Err(Error::ShapeMismatch(format!(
            "text {:?} has dimension {}, gallery has {}",
            text.id(),
            text.dim(),
            gallery.dim()
        )));
    }
    Ok(())
}

fn into_list(mut scored: Vec<Scored>, gallery: &Gallery, stage: Stage) -> RankedList {
    scored.sort_unstable_by(|a, b| b.cmp(a));
    let hits = scored
        .into_iter()
        .map(|s| Hit { video_id: gallery.videos()[s.pos].id().to_owned(), score: s.score })
        .collect();
    RankedList { stage, hits }
}

/// Exhaustive coarse scoring of the gallery, keeping the best `k` in a
/// bounded min-heap.
pub fn recall_topk(text: &TextRecord, gallery: &Gallery, k: usize) -> Result<RankedList> {
    check_text(text, gallery)?;
    if k == 0 {
        return Err(Error::InvalidParams("top_k must be at least 1".into()));
    }
    let k = k.min(gallery.len());
    let query = text.feature();
    let mut heap: BinaryHeap<Reverse<Scored>> = BinaryHeap::with_capacity(k + 1);
    for (pos, video) in gallery.iter().enumerate() {
        let cand = Scored { score: dot(query, video.coarse()), pos };
        if heap.len() < k {
            heap.push(Reverse(cand));
        } else if let Some(Reverse(worst)) = heap.peek() {
            if cand > *worst {
                heap.pop();
                heap.push(Reverse(cand));
            }
        }
    }
    let kept = heap.into_iter().map(|Reverse(s)| s).collect();
    Ok(into_list(kept, gallery, Stage::Recall))
}

/// The three similarities of one text-video pair and their fusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedScore {
    pub coarse: f64,
    pub frame: f64,
    pub patch: f64,
    pub total: f64,
}

/// Scores `video` against a unit text feature. Fine-grained features are only
/// computed when their fusion weight is non-zero.
pub fn fused_score(query: &[f32], video: &VideoRecord, cfg: &SearchConfig) -> Result<FusedScore> {
    let w = cfg.fusion;
    let coarse = dot(query, video.coarse());
    let frame = if w.frame() > 0.0 {
        dot(query, &text_frame_feature(video, query, &cfg.tib)?)
    } else {
        0.0
    };
    let patch = if w.patch() > 0.0 {
        dot(query, &text_patch_feature(video, query, &cfg.tib)?)
    } else {
        0.0
    };
    let total = w.coarse() * coarse + w.frame() * frame + w.patch() * patch;
    Ok(FusedScore { coarse, frame, patch, total })
}

/// Rescores `candidates` with the fused similarity and re-sorts them.
pub fn rerank(
    text: &TextRecord,
    candidates: &RankedList,
    gallery: &Gallery,
    cfg: &SearchConfig,
) -> Result<RankedList> {
    check_text(text, gallery)?;
    cfg.tib.validate()?;
    let scored = candidates
        .hits
        .iter()
        .map(|hit| {
            let pos = gallery
                .position(&hit.video_id)
                .ok_or_else(|| Error::UnknownId(hit.video_id.clone()))?;
            let s = fused_score(text.feature(), &gallery.videos()[pos], cfg)?;
            Ok(Scored { score: s.total, pos })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(into_list(scored, gallery, Stage::Final))
}

/// Recall `top_k` candidates by coarse similarity, then rerank them.
pub fn search(text: &TextRecord, gallery: &Gallery, cfg: &SearchConfig) -> Result<RankedList> {
    cfg.validate()?;
    let candidates = recall_topk(text, gallery, cfg.top_k)?;
    rerank(text, &candidates, gallery, cfg)
}

/// Recall@1/5/10 in percent and their mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r_at_1: f64,
    pub r_at_5: f64,
    pub r_at_10: f64,
    pub mean: f64,
    pub queries: usize,
}

impl Metrics {
    /// Builds metrics from the 0-based rank of each query's first relevant
    /// item, `None` when it is absent from the final list.
    pub fn from_ranks(ranks: &[Option<usize>]) -> Self {
        let n = ranks.len();
        let recall = |j: usize| {
            if n == 0 {
                return 0.0;
            }
            let hits = ranks.iter().filter(|r| matches!(r, Some(r) if *r < j)).count();
            100.0 * hits as f64 / n as f64
        };
        let (r1, r5, r10) = (recall(1), recall(5), recall(10));
        Self { r_at_1: r1, r_at_5: r5, r_at_10: r10, mean: (r1 + r5 + r10) / 3.0, queries: n }
    }
}

/// A text query with the gallery video it should retrieve.
#[derive(Debug, Clone, Copy)]
pub struct EvalQuery<'a> {
    pub text: &'a TextRecord,
    pub target: &'a str,
}

/// One query per manifest pair, in manifest order.
pub fn queries_from_manifest<'a>(
    manifest: &'a Manifest,
    texts: &'a [TextRecord],
    gallery: &Gallery,
) -> Result<Vec<EvalQuery<'a>>> {
    let by_id: std::collections::HashMap<&str, &TextRecord> =
        texts.iter().map(|t| (t.id(), t)).collect();
    manifest
        .pairs
        .iter()
        .map(|p| {
            let text = by_id
                .get(p.text_id.as_str())
                .ok_or_else(|| Error::MissingGroundTruth(format!("text {:?}", p.text_id)))?;
            if gallery.position(&p.video_id).is_none() {
                return Err(Error::MissingGroundTruth(format!("video {:?}", p.video_id)));
            }
            Ok(EvalQuery { text, target: p.video_id.as_str() })
        })
        .collect()
}

/// Runs `f` over `items` on a dedicated pool of `workers` threads, keeping
/// input order in the output.
pub(crate) fn fan_out<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}

/// Final ranked lists for a batch of texts, in input order.
pub fn search_batch(
    texts: &[&TextRecord],
    gallery: &Gallery,
    cfg: &SearchConfig,
    workers: usize,
) -> Result<Vec<RankedList>> {
    cfg.validate()?;
    fan_out(texts, workers, |t| search(t, gallery, cfg))
}

/// Final ranked lists for every query, in query order.
pub fn search_all(
    queries: &[EvalQuery<'_>],
    gallery: &Gallery,
    cfg: &SearchConfig,
    workers: usize,
) -> Result<Vec<RankedList>> {
    let texts: Vec<&TextRecord> = queries.iter().map(|q| q.text).collect();
    search_batch(&texts, gallery, cfg, workers)
}

/// Text-to-video recall metrics. Targets outside the final list (including
/// those cut by `top_k`) count as misses.
pub fn evaluate(
    queries: &[EvalQuery<'_>],
    gallery: &Gallery,
    cfg: &SearchConfig,
    workers: usize,
) -> Result<Metrics> {
    let lists = search_all(queries, gallery, cfg, workers)?;
    let ranks: Vec<Option<usize>> =
        lists.iter().zip(queries).map(|(l, q)| l.rank_of(q.target)).collect();
    Ok(Metrics::from_ranks(&ranks))
}

/// Video-to-text metrics over the transposed pairing: each video that has at
/// least one caption is a query; texts are recalled by coarse similarity and
/// reranked by the same fused score. A hit is any of the video's captions.
pub fn evaluate_video_to_text(
    manifest: &Manifest,
    texts: &[TextRecord],
    gallery: &Gallery,
    cfg: &SearchConfig,
    workers: usize,
) -> Result<Metrics> {
    cfg.validate()?;
    let text_pos: std::collections::HashMap<&str, usize> =
        texts.iter().enumerate().map(|(i, t)| (t.id(), i)).collect();
    let mut relevant: Vec<Vec<usize>> = vec![Vec::new(); gallery.len()];
    for p in &manifest.pairs {
        let t = *text_pos
            .get(p.text_id.as_str())
            .ok_or_else(|| Error::MissingGroundTruth(format!("text {:?}", p.text_id)))?;
        let v = gallery
            .position(&p.video_id)
            .ok_or_else(|| Error::MissingGroundTruth(format!("video {:?}", p.video_id)))?;
        relevant[v].push(t);
    }
    if texts.is_empty() {
        return Err(Error::EmptyInput("no texts to retrieve"));
    }
    let queries: Vec<usize> = (0..gallery.len()).filter(|&v| !relevant[v].is_empty()).collect();
    let ranks = fan_out(&queries, workers, |&v| {
        let video = &gallery.videos()[v];
        let k = cfg.top_k.min(texts.len());
        let mut recalled: Vec<Scored> = texts
            .iter()
            .enumerate()
            .map(|(pos, t)| Scored { score: dot(t.feature(), video.coarse()), pos })
            .collect();
        recalled.sort_unstable_by(|a, b| b.cmp(a));
        recalled.truncate(k);
        let mut reranked = recalled
            .into_iter()
            .map(|s| {
                let fused = fused_score(texts[s.pos].feature(), video, cfg)?;
                Ok(Scored { score: fused.total, pos: s.pos })
            })
            .collect::<Result<Vec<_>>>()?;
        reranked.sort_unstable_by(|a, b| b.cmp(a));
        Ok(reranked.iter().position(|s| relevant[v].contains(&s.pos)))
    })?;
    Ok(Metrics::from_ranks(&ranks))
}
