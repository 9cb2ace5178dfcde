//! Two-stage multi-granularity text-to-video retrieval.
//!
//! A gallery video is described at three granularities: a text-agnostic
//! coarse vector (mean of its frame features), and two text-conditioned
//! vectors produced at query time by softmax attention of the sentence
//! feature over frame rows and over patch rows. Retrieval recalls the top-k
//! videos by coarse similarity and reranks them by a weighted fusion of all
//! three similarities.
//!
//! Modules:
//! * [`store`]: data model, normalization, mean pooling, binary container;
//! * [`tib`]: the parameter-free text-gated attention pooling;
//! * [`ranking`]: recall, rerank, search and recall metrics;
//! * [`losses`]: InfoNCE and Pearson-constraint objectives with gradients;
//! * [`flops`]: analytic per-pair cost models;
//! * [`testkit`]: synthetic galleries and a brute-force reference ranker.

pub mod error;
pub mod flops;
pub mod losses;
pub mod ranking;
pub mod store;
pub mod testkit;
pub mod tib;

pub use error::{Error, Result};
pub use flops::{flops_per_pair, flops_table, CostModelInput, FlopsRow, MethodKind, Preset};
pub use losses::{BatchFeatures, LossConfig, LossGrad};
pub use ranking::{
    evaluate, recall_topk, rerank, search, EvalQuery, FusionWeights, Hit, Metrics, RankedList,
    SearchConfig, Stage,
};
pub use store::{Gallery, Manifest, Pair, TextRecord, VideoRecord};
pub use testkit::{DistractorMode, SynthConfig, SynthData};
pub use tib::TibConfig;
