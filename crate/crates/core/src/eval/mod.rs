//! Metrics, trajectory prediction and plot-ready exports.

mod export;
mod metrics;
mod predict;

pub use export::{read_scatter, scatter_export, trajectory_export, write_json, write_scatter, write_trajectory};
pub use metrics::{mse, r_squared, roughness, ColumnMetrics, MetricReport};
pub use predict::{predict_trajectory, PredictedTrajectory, PredictionSource, Predictor};
