use std::time::Instant;

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::{backprop, mse_chunked, Gradients, Workspace};
use super::model::{init_model, Activation, FfnModel};
use super::optim::{Optimizer, OptimizerConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Rows per chunk when evaluating validation loss.
const EVAL_CHUNK: usize = 1024;

/// One point of the hyper-parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub hidden_layers: usize,
    /// Width of every hidden layer.
    pub nodes: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub activation: Activation,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
}

impl HyperConfig {
    pub fn new(hidden_layers: usize, nodes: usize, batch_size: usize, epochs: usize) -> Self {
        Self {
            hidden_layers,
            nodes,
            batch_size,
            epochs,
            activation: Activation::Tanh,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerConfig) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.hidden_layers > 0 && self.nodes == 0 {
            return Err(Error::InvalidConfig("hidden layers need at least one node".into()));
        }
        self.optimizer.validate()
    }

    pub fn layer_dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 2);
        dims.push(input);
        dims.extend(std::iter::repeat_n(self.nodes, self.hidden_layers));
        dims.push(output);
        dims
    }

    pub fn param_count(&self, input: usize, output: usize) -> usize {
        self.layer_dims(input, output)
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::digest::sha256_hex(json.as_bytes())
    }

    /// The configuration without its seed, used to group repeated runs.
    pub fn unseeded(&self) -> Self {
        Self {
            seed: 0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub seconds: f64,
    pub checksum: String,
}

impl TrainReport {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_loss.last().copied()
    }

    pub fn final_val_loss(&self) -> Option<f64> {
        self.val_loss.last().copied()
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.val_loss.iter().copied().reduce(f64::min)
    }
}

fn as_matrix(values: Vec<f64>, cols: usize) -> Array2<f64> {
    Array2::from_shape_vec((values.len() / cols, cols), values).expect("flat rows")
}

/// Minibatch training on already-normalized matrices. Rows are reshuffled
/// every epoch from a generator seeded with `config.seed`.
pub fn train_arrays(
    model: &mut FfnModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    val_x: ArrayView2<'_, f64>,
    val_y: ArrayView2<'_, f64>,
    config: &HyperConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if x.nrows() == 0 || val_x.nrows() == 0 {
        return Err(Error::InvalidConfig(
            "training and validation sets must be non-empty".into(),
        ));
    }
    for (what, cols, want) in [
        ("training inputs", x.ncols(), model.input_dim()),
        ("training labels", y.ncols(), model.output_dim()),
        ("validation inputs", val_x.ncols(), model.input_dim()),
        ("validation labels", val_y.ncols(), model.output_dim()),
    ] {
        if cols != want {
            return Err(Error::shape(format!("{want} columns of {what}"), cols));
        }
    }
    if x.nrows() != y.nrows() || val_x.nrows() != val_y.nrows() {
        return Err(Error::shape("matching input and label rows", "different counts"));
    }

    let start = Instant::now();
    let n = x.nrows();
    let batch = config.batch_size.min(n);
    let mut ws = Workspace::new(model, batch);
    let mut eval_ws = Workspace::new(model, EVAL_CHUNK.min(val_x.nrows()));
    let mut grads = Gradients::zeros_like(model);
    let mut opt = Optimizer::new(config.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut xb = Array2::zeros((batch, x.ncols()));
    let mut yb = Array2::zeros((batch, y.ncols()));
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        seconds: 0.0,
        checksum: String::new(),
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(batch) {
            let b = chunk.len();
            for (r, &i) in chunk.iter().enumerate() {
                xb.row_mut(r).assign(&x.row(i));
                yb.row_mut(r).assign(&y.row(i));
            }
            let loss = backprop(model, xb.slice(s![..b, ..]), yb.slice(s![..b, ..]), &mut ws, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::DivergedLoss { epoch });
            }
            weighted += loss * b as f64;
            opt.step(model, &grads);
        }
        let train_loss = weighted / n as f64;
        let val_loss = mse_chunked(model, val_x, val_y, &mut eval_ws)?;
        if !val_loss.is_finite() || !model.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        log::debug!("epoch {epoch}: train {train_loss:.3e} val {val_loss:.3e}");
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
    }
    report.seconds = start.elapsed().as_secs_f64();
    report.checksum = model.checksum();
    Ok(report)
}

/// Trains `model` on `train`, scoring `val` after every epoch. Both sets are
/// scaled with the training set's normalization, which the returned model
/// carries for prediction in physical units.
pub fn train(
    mut model: FfnModel,
    train: &Dataset,
    val: &Dataset,
    config: &HyperConfig,
) -> Result<(FfnModel, TrainReport)> {
    if train.schema != val.schema {
        return Err(Error::SchemaMismatch("training and validation columns differ".into()));
    }
    let norm = train.norm.clone();
    let x = as_matrix(train.normalized_inputs(), train.input_dim());
    let y = as_matrix(train.normalized_labels(), train.label_dim());
    let mut vx = val.inputs().to_vec();
    let mut vy = val.labels().to_vec();
    norm.apply_inputs(&mut vx);
    norm.apply_labels(&mut vy);
    let vx = as_matrix(vx, val.input_dim());
    let vy = as_matrix(vy, val.label_dim());

    let report = train_arrays(&mut model, x.view(), y.view(), vx.view(), vy.view(), config)?;
    model.norm = Some(norm);
    model.config_fingerprint = Some(config.fingerprint());
    Ok((model, report))
}

/// Fresh initialization (seeded by `config.seed`) followed by [`train`].
pub fn fit(train_set: &Dataset, val: &Dataset, config: &HyperConfig) -> Result<(FfnModel, TrainReport)> {
    config.validate()?;
    let dims = config.layer_dims(train_set.input_dim(), train_set.label_dim());
    let model = init_model(&dims, config.activation, config.seed)?;
    train(model, train_set, val, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Schema, Structure};
    use rand::Rng;

    fn random_rows(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.0..1.0))
    }

    #[test]
    fn memorizes_a_small_batch() {
        let x = random_rows(32, 3, 1);
        let y = random_rows(32, 2, 2);
        let cfg = HyperConfig::new(2, 64, 32, 2000).with_optimizer(OptimizerConfig::adam(3e-3));
        let mut m = init_model(&cfg.layer_dims(3, 2), cfg.activation, 0).unwrap();
        let r = train_arrays(&mut m, x.view(), y.view(), x.view(), y.view(), &cfg).unwrap();
        assert!(r.final_val_loss().unwrap() <= 1e-6, "{:?}", r.final_val_loss());
    }

    #[test]
    fn full_batch_sgd_descends_on_a_linear_target() {
        let x = random_rows(50, 2, 3);
        let y = x.dot(&ndarray::array![[0.5], [-0.3]]) + 0.1;
        let cfg = HyperConfig::new(0, 0, 50, 100).with_optimizer(OptimizerConfig::sgd(0.05));
        let mut m = init_model(&cfg.layer_dims(2, 1), cfg.activation, 4).unwrap();
        let r = train_arrays(&mut m, x.view(), y.view(), x.view(), y.view(), &cfg).unwrap();
        for w in r.train_loss.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let x = random_rows(100, 3, 5);
        let y = random_rows(100, 2, 6);
        let cfg = HyperConfig::new(2, 16, 8, 5).with_seed(9);
        let run = || {
            let mut m = init_model(&cfg.layer_dims(3, 2), cfg.activation, cfg.seed).unwrap();
            train_arrays(&mut m, x.view(), y.view(), x.view(), y.view(), &cfg).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.checksum, b.checksum);
        assert_eq!(a.train_loss, b.train_loss);
    }

    #[test]
    fn zero_epochs_leaves_model_untouched() {
        let x = random_rows(10, 3, 5);
        let y = random_rows(10, 1, 6);
        let cfg = HyperConfig::new(1, 4, 4, 0);
        let mut m = init_model(&cfg.layer_dims(3, 1), cfg.activation, 1).unwrap();
        let before = m.clone();
        let r = train_arrays(&mut m, x.view(), y.view(), x.view(), y.view(), &cfg).unwrap();
        assert_eq!(m, before);
        assert!(r.train_loss.is_empty());
        assert_eq!(r.checksum, before.checksum());
    }

    #[test]
    fn divergence_is_reported() {
        let x = random_rows(20, 2, 1) * 100.0;
        let y = random_rows(20, 1, 2) * 1e6;
        let cfg = HyperConfig::new(1, 8, 4, 50)
            .with_activation(Activation::Relu)
            .with_optimizer(OptimizerConfig::sgd(1e3));
        let mut m = init_model(&cfg.layer_dims(2, 1), cfg.activation, 1).unwrap();
        let err = train_arrays(&mut m, x.view(), y.view(), x.view(), y.view(), &cfg).unwrap_err();
        assert!(matches!(err, Error::DivergedLoss { .. }), "{err}");
    }

    #[test]
    fn fit_attaches_normalization() {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let a = i as f64 * 0.5;
            let t = (i % 5) as f64;
            inputs.extend([a, t]);
            labels.push(3.0 * a + t + 100.0);
        }
        let ds = Dataset::new(Schema::new(&["a", "t"], &["y"]), Structure::Sfull, inputs, labels).unwrap();
        let (tr, va) = ds.split_validation(0.1, 0).unwrap();
        let cfg = HyperConfig::new(1, 16, 8, 300).with_optimizer(OptimizerConfig::adam(1e-2));
        let (m, r) = fit(&tr, &va, &cfg).unwrap();
        assert_eq!(m.norm.as_ref(), Some(&ds.norm));
        assert_eq!(m.config_fingerprint.as_deref(), Some(cfg.fingerprint().as_str()));
        assert_eq!(r.val_loss.len(), 300);
        let pred = m.predict(&[10.0, 2.0]).unwrap();
        assert!((pred[0] - 132.0).abs() < 1.0, "{pred:?}");
    }

    #[test]
    fn config_helpers() {
        let cfg = HyperConfig::new(2, 128, 64, 400);
        assert_eq!(cfg.layer_dims(4, 3), vec![4, 128, 128, 3]);
        assert_eq!(cfg.param_count(3, 3), 17_411);
        assert_eq!(cfg.fingerprint(), cfg.clone().fingerprint());
        assert_ne!(cfg.fingerprint(), cfg.clone().with_seed(1).fingerprint());
        assert!(HyperConfig::new(2, 128, 0, 1).validate().is_err());
    }
}
