//! Restoration-quality evaluation: PSNR/SSIM, per-component parsing
//! F-scores, identity distances over a pluggable embedding backend, and
//! grouped benchmark reports.

pub mod fscore;
pub mod identity;
pub mod metrics;
pub mod report;

pub use fscore::{component_fscore, FscoreReport};
pub use identity::{identity_distance, rank_topk, EmbeddingBackend, FrozenConvEmbedding};
pub use metrics::{psnr, ssim, ssim_reference, PSNR_CAP_DB};
pub use report::{benchmark_report, aggregate, GroupAggregate, MetricReport, SampleMetric};
