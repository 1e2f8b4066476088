//! Traffic-matrix ingestion, normalization, windowing and synthetic data.

pub mod matrix;
pub mod normalize;
pub mod routing;
pub mod samples;
pub mod synthetic;

pub use matrix::{FlowId, MatrixFormat, MissingPolicy, TrafficMatrix, DEFAULT_INTERVAL_SECONDS, DEFAULT_MIN_MEAN_BPS};
pub use normalize::{denormalize, normalize, NormalizationParams};
pub use routing::{RoutingMatrix, Topology};
pub use samples::{make_graph_samples, GraphSample, TargetWindow};
pub use synthetic::{
    generate_synthetic, load_labels, save_labels, GroundTruth, Injection, InjectionKind, SyntheticData, SyntheticSpec,
};
