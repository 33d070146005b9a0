//! Synthetic reaction-pathway benchmark, pool bias control, the offline
//! active-learning loop and its metrics.

pub mod al;
pub mod benchmark;
pub mod bias;
pub mod metrics;
pub mod pathways;

pub use al::{
    al_loop, family_fraction, mean_std, run_auc, write_round_csv, write_selection_csv, AlConfig, Method, RoundLog,
    ROUND_CSV_HEADER,
};
pub use benchmark::{Benchmark, BenchmarkSpec};
pub use bias::{biased_pool, BiasSpec};
pub use metrics::{auc, compute_metrics, Metrics};
pub use pathways::{generate_pathways, PathwaySpec, TaggedStructure};
