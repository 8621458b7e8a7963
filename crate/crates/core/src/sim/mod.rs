//! Discrete-event simulation: dataset generation, the market engine for
//! both mechanisms, metrics, and the price-dynamics study harness.

pub mod dataset;
pub mod engine;
pub mod event;
pub mod metrics;
pub mod price_study;

pub use dataset::{
    generate, generate_custom, inject_free_riders, Dataset, DatasetClass, DatasetError,
    ExperimentProfile, ProviderSpec, RequestorSpec,
};
pub use engine::{run, RunError, RunOptions, RunOutput};
pub use event::{EventKind, SimEvent};
pub use metrics::{
    compare, dataset_fingerprint, symmetric_pct_diff, ComparisonReport, Mechanism,
    MetricsError, MetricsReport, PriceCategory,
};
pub use price_study::{run_price_study, PriceStudyReport};
