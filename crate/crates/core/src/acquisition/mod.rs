//! Streaming selection engine: Gram accumulation, posterior-variance
//! scoring, top-K shortlisting and batch selection.

mod linalg;

pub mod committee;
pub mod dense;
pub mod lcmd;
pub mod meter;
pub mod pipeline;
pub mod precision;
pub mod select;
pub mod shortlist;
pub mod source;

pub use committee::{committee_scores, CommitteeMode, CommitteeScores, Prediction};
pub use dense::dense_acquire;
pub use lcmd::{lcmd_select, LcmdPick, LcmdState};
pub use meter::ScratchMeter;
pub use pipeline::{
    acquire, build_precision, lcmd_over_shortlist, stream_shortlist, AcquisitionStats, BatchRule, PipelineConfig,
    DEFAULT_RIDGE,
};
pub use precision::PrecisionState;
pub use select::{greedy_pv_select, random_select, Pick, SelectionResult};
pub use shortlist::{top_k, Entry, Shortlist};
pub use source::{FeatureSource, GeneratedSource, PffmSource, SliceSource};
