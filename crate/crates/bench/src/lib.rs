//! Shared fixtures for the benchmarks.

use ndarray::Array2;

/// Deterministic, well-spread batch of `rows` samples.
pub fn batch(rows: usize, inputs: usize, outputs: usize) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_fn((rows, inputs), |(i, j)| ((i * 7 + j * 13) as f64 * 0.37).sin());
    let y = Array2::from_shape_fn((rows, outputs), |(i, j)| ((i * 5 + j * 11) as f64 * 0.21).cos());
    (x, y)
}

/// Layer sizes of the published single-pendulum, double-pendulum and slider-crank networks.
pub const NETWORKS: [(&str, &[usize], usize); 3] = [
    ("single_2x128", &[4, 128, 128, 3], 64),
    ("double_4x64", &[5, 64, 64, 64, 64, 4], 1024),
    ("slider_2x128", &[4, 128, 128, 7], 64),
];
