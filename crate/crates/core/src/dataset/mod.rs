//! Training lattices, random test sets, the two data layouts (time as an
//! input column, or one dataset per fixed instant), normalization and CSV
//! persistence.

mod builder;
mod csv_io;
mod lattice;
mod norm;

pub use builder::{build_sfixed, build_sfull, random_test_set, TrajectoryStore};
pub use csv_io::{meta_path, read_csv, write_csv, DatasetMeta};
pub use lattice::{build_lattice, sample_test_inputs, ParameterRange};
pub use norm::{ColumnStats, Normalization};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the time input column in time-as-input datasets.
pub const TIME_COLUMN: &str = "t";

/// How time enters the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case")]
pub enum Structure {
    /// Time is the last input column; one model covers every instant.
    Sfull,
    /// Time is fixed at `t` (grid instant `index`); one model per instant.
    Sfixed { t: f64, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub inputs: Vec<String>,
    pub labels: Vec<String>,
}

impl Schema {
    pub fn new<S: AsRef<str>>(inputs: &[S], labels: &[S]) -> Self {
        Self {
            inputs: inputs.iter().map(|s| s.as_ref().to_owned()).collect(),
            labels: labels.iter().map(|s| s.as_ref().to_owned()).collect(),
        }
    }

    pub fn has_time(&self) -> bool {
        self.inputs.last().map(String::as_str) == Some(TIME_COLUMN)
    }
}

/// One owned row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
}

/// Generation settings recorded alongside a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default)]
    pub ranges: Vec<ParameterRange>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dt: Option<f64>,
    /// Hash of the experiment configuration that produced the rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

/// Rows stored flat in row-major order, with the normalization statistics
/// that apply to them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub structure: Structure,
    inputs: Vec<f64>,
    labels: Vec<f64>,
    pub norm: Normalization,
    pub provenance: Provenance,
}

impl Dataset {
    /// Validates shapes and finiteness and fits normalization to the rows.
    pub fn new(schema: Schema, structure: Structure, inputs: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let (di, dl) = (schema.inputs.len(), schema.labels.len());
        if di == 0 || dl == 0 {
            return Err(Error::SchemaMismatch("schema needs inputs and labels".into()));
        }
        let time_ok = match structure {
            Structure::Sfull => schema.has_time(),
            Structure::Sfixed { .. } => !schema.inputs.iter().any(|c| c == TIME_COLUMN),
        };
        if !time_ok {
            return Err(Error::SchemaMismatch(format!(
                "{structure:?} layout does not match input columns {:?}",
                schema.inputs
            )));
        }
        if inputs.len() % di != 0 || labels.len() % dl != 0 || inputs.len() / di != labels.len() / dl {
            return Err(Error::shape(
                format!("rows of {di} inputs and {dl} labels"),
                format!("{} input values and {} label values", inputs.len(), labels.len()),
            ));
        }
        if let Some(pos) = inputs.iter().chain(&labels).position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value at flat position {pos}"
            )));
        }
        let norm = Normalization::fit(&inputs, di, &labels, dl);
        Ok(Self {
            schema,
            structure,
            inputs,
            labels,
            norm,
            provenance: Provenance::default(),
        })
    }

    pub fn with_norm(mut self, norm: Normalization) -> Result<Self> {
        if norm.inputs.len() != self.input_dim() || norm.labels.len() != self.label_dim() {
            return Err(Error::SchemaMismatch(
                "normalization does not cover every column".into(),
            ));
        }
        self.norm = norm;
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len() / self.label_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.schema.inputs.len()
    }

    pub fn label_dim(&self) -> usize {
        self.schema.labels.len()
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.inputs[i * d..(i + 1) * d]
    }

    pub fn label_row(&self, i: usize) -> &[f64] {
        let d = self.label_dim();
        &self.labels[i * d..(i + 1) * d]
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            inputs: self.input_row(i).to_vec(),
            labels: self.label_row(i).to_vec(),
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label_column(&self, col: usize) -> Vec<f64> {
        self.labels
            .iter()
            .skip(col)
            .step_by(self.label_dim())
            .copied()
            .collect()
    }

    pub fn normalized_inputs(&self) -> Vec<f64> {
        let mut x = self.inputs.clone();
        self.norm.apply_inputs(&mut x);
        x
    }

    pub fn normalized_labels(&self) -> Vec<f64> {
        let mut y = self.labels.clone();
        self.norm.apply_labels(&mut y);
        y
    }

    /// Rows at `indices`, keeping this dataset's normalization.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim());
        let mut labels = Vec::with_capacity(indices.len() * self.label_dim());
        for &i in indices {
            inputs.extend_from_slice(self.input_row(i));
            labels.extend_from_slice(self.label_row(i));
        }
        Dataset {
            schema: self.schema.clone(),
            structure: self.structure,
            inputs,
            labels,
            norm: self.norm.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Seeded shuffle, then `fraction` of the rows (at least one, at most
    /// `len - 1`) become the validation split. Both halves share this
    /// dataset's normalization.
    pub fn split_validation(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must be in [0, 1), got {fraction}"
            )));
        }
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidConfig("need at least two rows to split".into()));
        }
        let n_val = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (val, train) = order.split_at(n_val);
        let mut train = train.to_vec();
        let mut val = val.to_vec();
        train.sort_unstable();
        val.sort_unstable();
        Ok((self.subset(&train), self.subset(&val)))
    }
}
