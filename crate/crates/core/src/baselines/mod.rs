//! Comparison detectors: the PCA subspace method on links or flows, EWMA and
//! a univariate recurrent forecaster. All of them emit [`ScoreSeries`] so the
//! detector's calibration and grouping apply unchanged.
//!
//! [`ScoreSeries`]: crate::detector::ScoreSeries

pub mod ewma;
pub mod pca;
pub mod rnn;

pub use ewma::{alpha_for_window, ewma_forecasts, ewma_score, ewma_series, EwmaState};
pub use pca::{pca_fit, pca_input, q_threshold, Components, PcaInput, PcaModel, DEFAULT_CONFIDENCE, DEFAULT_VARIANCE_FRACTION};
pub use rnn::{rnn_train, rnn_train_and_score, RnnArchitecture, RnnConfig, RnnModel};
