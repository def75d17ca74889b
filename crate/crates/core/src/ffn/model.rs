use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Normalization;
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Tanh, Activation::Sigmoid, Activation::Relu];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `a = f(z)`.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

/// Dense layer computing `x W + b` for row-major batches `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Shape `(fan_in, fan_out)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnModel {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<Layer>,
    pub activation: Activation,
    /// Statistics mapping physical inputs/labels to the network's scale.
    pub norm: Option<Normalization>,
    pub config_fingerprint: Option<String>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "layer dims need at least input and output widths, all positive (got {dims:?})"
        )));
    }
    Ok(())
}

/// Glorot-uniform weights in `+-sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_model(dims: &[usize], activation: Activation, seed: u64) -> Result<FfnModel> {
    check_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit));
            Layer {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(FfnModel {
        layer_dims: dims.to_vec(),
        layers,
        activation,
        norm: None,
        config_fingerprint: None,
    })
}

impl FfnModel {
    /// All-zero parameters with the given architecture.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            layer_dims: dims.to_vec(),
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            activation,
            norm: None,
            config_fingerprint: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("at least two dims")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Parameter tensors in the fixed order `W1, b1, W2, b2, ...`.
    pub fn params(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weights.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    /// SHA-256 over the parameter bit patterns; equal iff parameters are bit-identical.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in self.params() {
            for v in p {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        crate::digest::hex(&h.finalize())
    }

    /// Network output for a `(batch, input_dim)` matrix on the normalized scale.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape(
                format!("{} input columns", self.input_dim()),
                inputs.ncols(),
            ));
        }
        let last = self.layers.len() - 1;
        let mut a = inputs.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias.view().insert_axis(Axis(0));
            if i < last {
                let act = self.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Hidden-layer activations for a batch (used to inspect saturation).
    pub fn hidden_activations(&self, inputs: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape(
                format!("{} input columns", self.input_dim()),
                inputs.ncols(),
            ));
        }
        let mut out = Vec::new();
        let mut a = inputs.to_owned();
        for layer in &self.layers[..self.layers.len() - 1] {
            let mut z = a.dot(&layer.weights);
            z += &layer.bias.view().insert_axis(Axis(0));
            let act = self.activation;
            z.mapv_inplace(|v| act.apply(v));
            out.push(z.clone());
            a = z;
        }
        Ok(out)
    }

    /// Predictions in physical units for flat row-major physical inputs.
    pub fn predict(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if rows.len() % d != 0 {
            return Err(Error::shape(format!("multiple of {d} values"), rows.len()));
        }
        let mut x = rows.to_vec();
        if let Some(norm) = &self.norm {
            norm.apply_inputs(&mut x);
        }
        let x = Array2::from_shape_vec((rows.len() / d, d), x).expect("shape checked");
        let y = self.forward(x.view())?;
        let mut y = y.into_raw_vec_and_offset().0;
        if let Some(norm) = &self.norm {
            norm.invert_labels(&mut y);
        }
        Ok(y)
    }
}
