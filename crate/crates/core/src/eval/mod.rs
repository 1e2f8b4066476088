mod bundle;
mod metrics;
mod overlap;
mod sweep;

pub use bundle::{BundleSource, ContextBundle, ContextSeries, FlowTrace, CONTEXT_FLOWS, DEFAULT_HALF_WINDOW};
pub use metrics::{matches, score_against_labels, DetectionMetrics, KindRecall};
pub use overlap::{overlap, overlap_matrix, OverlapMatrix};
pub use sweep::{budget_multiples, threshold_sweep, SweepPoint, SweepResult};
