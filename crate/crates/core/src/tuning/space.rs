use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffn::{Activation, HyperConfig, OptimizerConfig};

/// Candidate values per hyper-parameter; the grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub hidden_layers: Vec<usize>,
    pub nodes: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub epochs: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Optimizer names (`adam`, `rmsprop`, `sgd`) with default moment settings.
    pub optimizers: Vec<String>,
    pub learning_rates: Vec<f64>,
}

impl SearchSpace {
    /// A space containing only `base`.
    pub fn singleton(base: &HyperConfig) -> Self {
        Self {
            hidden_layers: vec![base.hidden_layers],
            nodes: vec![base.nodes],
            batch_sizes: vec![base.batch_size],
            epochs: vec![base.epochs],
            activations: vec![base.activation],
            optimizers: vec![base.optimizer.name().to_owned()],
            learning_rates: vec![base.optimizer.lr()],
        }
    }

    /// Layers, nodes and batch size varied; everything else fixed at `base`.
    pub fn architecture(base: &HyperConfig, layers: &[usize], nodes: &[usize], batches: &[usize]) -> Self {
        Self {
            hidden_layers: layers.to_vec(),
            nodes: nodes.to_vec(),
            batch_sizes: batches.to_vec(),
            ..Self::singleton(base)
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = vec![epochs];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("hidden_layers", self.hidden_layers.len()),
            ("nodes", self.nodes.len()),
            ("batch_sizes", self.batch_sizes.len()),
            ("epochs", self.epochs.len()),
            ("activations", self.activations.len()),
            ("optimizers", self.optimizers.len()),
            ("learning_rates", self.learning_rates.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidConfig(format!("search axis `{name}` is empty")));
        }
        for cfg in self.configs()? {
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.hidden_layers.len()
            * self.nodes.len()
            * self.batch_sizes.len()
            * self.epochs.len()
            * self.activations.len()
            * self.optimizers.len()
            * self.learning_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every configuration in listing order, learning rate varying fastest.
    pub fn configs(&self) -> Result<Vec<HyperConfig>> {
        let mut out = Vec::with_capacity(self.len());
        for &layers in &self.hidden_layers {
            for &nodes in &self.nodes {
                for &batch in &self.batch_sizes {
                    for &epochs in &self.epochs {
                        for &act in &self.activations {
                            for opt in &self.optimizers {
                                for &lr in &self.learning_rates {
                                    out.push(
                                        HyperConfig::new(layers, nodes, batch, epochs)
                                            .with_activation(act)
                                            .with_optimizer(OptimizerConfig::by_name(opt, lr)?),
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Inclusive integer interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: usize,
    pub hi: usize,
}

impl IntRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        rng.random_range(self.lo..=self.hi)
    }
}

/// Per-axis ranges for random search; each axis is drawn uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRanges {
    pub hidden_layers: IntRange,
    pub nodes: IntRange,
    pub batch_size: IntRange,
    pub epochs: IntRange,
    pub activations: Vec<Activation>,
    pub optimizers: Vec<String>,
    /// Inclusive learning-rate interval.
    pub learning_rate: (f64, f64),
}

impl SearchRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("hidden_layers", self.hidden_layers),
            ("nodes", self.nodes),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ] {
            if r.lo > r.hi {
                return Err(Error::InvalidConfig(format!("range `{name}` has lo > hi")));
            }
        }
        if self.activations.is_empty() || self.optimizers.is_empty() {
            return Err(Error::InvalidConfig(
                "activation and optimizer lists must be non-empty".into(),
            ));
        }
        let (lo, hi) = self.learning_rate;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid learning-rate range [{lo}, {hi}]"
            )));
        }
        for o in &self.optimizers {
            OptimizerConfig::by_name(o, lo)?;
        }
        Ok(())
    }

    /// `n` independent draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<HyperConfig>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let layers = self.hidden_layers.draw(&mut rng);
                let nodes = self.nodes.draw(&mut rng);
                let batch = self.batch_size.draw(&mut rng);
                let epochs = self.epochs.draw(&mut rng);
                let act = self.activations[rng.random_range(0..self.activations.len())];
                let opt = &self.optimizers[rng.random_range(0..self.optimizers.len())];
                let (lo, hi) = self.learning_rate;
                let lr = if lo == hi { lo } else { rng.random_range(lo..=hi) };
                let cfg = HyperConfig::new(layers, nodes, batch, epochs)
                    .with_activation(act)
                    .with_optimizer(OptimizerConfig::by_name(opt, lr)?);
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}
