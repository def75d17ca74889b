use serde::{Deserialize, Serialize};

/// Min-max statistics of one column. A degenerate column (`max == min`)
/// normalizes to 0 and inverts back to `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.max > self.min)
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    #[inline]
    pub fn invert(&self, z: f64) -> f64 {
        if self.is_degenerate() {
            self.min
        } else {
            self.min + z * (self.max - self.min)
        }
    }
}

/// Per-column min-max scaling to `[0, 1]` for inputs and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub inputs: Vec<ColumnStats>,
    pub labels: Vec<ColumnStats>,
}

fn fit_columns(flat: &[f64], width: usize) -> Vec<ColumnStats> {
    (0..width)
        .map(|c| ColumnStats::fit(flat.iter().skip(c).step_by(width.max(1)).copied()))
        .collect()
}

fn map_rows(flat: &mut [f64], stats: &[ColumnStats], f: impl Fn(&ColumnStats, f64) -> f64) {
    for row in flat.chunks_exact_mut(stats.len().max(1)) {
        for (x, s) in row.iter_mut().zip(stats) {
            *x = f(s, *x);
        }
    }
}

impl Normalization {
    /// Fits statistics to flat row-major input and label buffers.
    pub fn fit(inputs: &[f64], input_dim: usize, labels: &[f64], label_dim: usize) -> Self {
        Self {
            inputs: fit_columns(inputs, input_dim),
            labels: fit_columns(labels, label_dim),
        }
    }

    /// Statistics that leave every column unchanged.
    pub fn identity(input_dim: usize, label_dim: usize) -> Self {
        let unit = ColumnStats { min: 0.0, max: 1.0 };
        Self {
            inputs: vec![unit; input_dim],
            labels: vec![unit; label_dim],
        }
    }

    pub fn degenerate_columns(&self) -> Vec<usize> {
        self.inputs
            .iter()
            .chain(&self.labels)
            .enumerate()
            .filter(|(_, s)| s.is_degenerate())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn apply_inputs(&self, rows: &mut [f64]) {
        map_rows(rows, &self.inputs, ColumnStats::apply);
    }

    pub fn invert_inputs(&self, rows: &mut [f64]) {
        map_rows(rows, &self.inputs, ColumnStats::invert);
    }

    pub fn apply_labels(&self, rows: &mut [f64]) {
        map_rows(rows, &self.labels, ColumnStats::apply);
    }

    pub fn invert_labels(&self, rows: &mut [f64]) {
        map_rows(rows, &self.labels, ColumnStats::invert);
    }
}
