use std::fmt;

use serde::{Deserialize, Serialize};

use super::grad::Gradients;
use super::model::FfnModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    RmsProp { lr: f64, rho: f64, eps: f64 },
    Sgd { lr: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn rmsprop(lr: f64) -> Self {
        Self::RmsProp {
            lr,
            rho: 0.9,
            eps: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::Sgd { lr }
    }

    /// Default-hyperparameter optimizer by name (`adam`, `rmsprop`, `sgd`).
    pub fn by_name(name: &str, lr: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "adam" => Ok(Self::adam(lr)),
            "rmsprop" | "rms_prop" => Ok(Self::rmsprop(lr)),
            "sgd" => Ok(Self::sgd(lr)),
            other => Err(Error::InvalidConfig(format!("unknown optimizer `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Adam { .. } => "adam",
            Self::RmsProp { .. } => "rmsprop",
            Self::Sgd { .. } => "sgd",
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Adam { lr, .. } | Self::RmsProp { lr, .. } | Self::Sgd { lr } => lr,
        }
    }

    pub fn with_lr(mut self, new: f64) -> Self {
        match &mut self {
            Self::Adam { lr, .. } | Self::RmsProp { lr, .. } | Self::Sgd { lr } => *lr = new,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Adam { lr, beta1, beta2, eps } => {
                (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0 && lr > 0.0
            }
            Self::RmsProp { lr, rho, eps } => (0.0..1.0).contains(&rho) && eps > 0.0 && lr > 0.0,
            Self::Sgd { lr } => lr > 0.0,
        };
        if ok && self.lr().is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")))
        }
    }
}

impl fmt::Display for OptimizerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(lr={})", self.name(), self.lr())
    }
}

/// Optimizer with per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of `params` from `grads`, tensor by tensor in matching order.
    pub fn update<'a, 'b>(
        &mut self,
        params: impl Iterator<Item = &'a mut [f64]>,
        grads: impl Iterator<Item = &'b [f64]>,
    ) {
        self.step += 1;
        let t = self.step as i32;
        for (k, (p, g)) in params.zip(grads).enumerate() {
            debug_assert_eq!(p.len(), g.len());
            if self.first.len() <= k {
                self.first.push(vec![0.0; p.len()]);
                self.second.push(vec![0.0; p.len()]);
            }
            match self.config {
                OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                    let c1 = 1.0 / (1.0 - beta1.powi(t));
                    let c2 = 1.0 / (1.0 - beta2.powi(t));
                    let (m, v) = (&mut self.first[k], &mut self.second[k]);
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                        p[i] -= lr * (m[i] * c1) / ((v[i] * c2).sqrt() + eps);
                    }
                }
                OptimizerConfig::RmsProp { lr, rho, eps } => {
                    let v = &mut self.second[k];
                    for i in 0..p.len() {
                        let gi = g[i];
                        v[i] = rho * v[i] + (1.0 - rho) * gi * gi;
                        p[i] -= lr * gi / (v[i].sqrt() + eps);
                    }
                }
                OptimizerConfig::Sgd { lr } => {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= lr * gi;
                    }
                }
            }
        }
    }

    pub fn step(&mut self, model: &mut FfnModel, grads: &Gradients) {
        self.update(model.params_mut(), grads.params());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimize_square(config: OptimizerConfig, w0: f64, steps: usize) -> f64 {
        let mut opt = Optimizer::new(config);
        let mut w = [w0];
        for _ in 0..steps {
            let g = [2.0 * w[0]];
            opt.update(std::iter::once(&mut w[..]), std::iter::once(&g[..]));
        }
        w[0]
    }

    #[test]
    fn adam_first_step_is_normalized() {
        for g in [3.0, -0.02, 1e3] {
            let mut opt = Optimizer::new(OptimizerConfig::adam(1e-3));
            let mut w = [0.0];
            opt.update(std::iter::once(&mut w[..]), std::iter::once(&[g][..]));
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            assert!(
                (w[0] - expected).abs() <= 1e-12 * expected.abs(),
                "{} vs {expected}",
                w[0]
            );
            assert!((w[0] + 1e-3 * g.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let w = minimize_square(OptimizerConfig::adam(0.1), 1.0, 200);
        assert!(w.abs() < 0.01, "{w}");
    }

    #[test]
    fn sgd_and_rmsprop_converge() {
        assert!(minimize_square(OptimizerConfig::sgd(0.1), 1.0, 100).abs() < 1e-8);
        assert!(minimize_square(OptimizerConfig::rmsprop(0.01), 1.0, 500).abs() < 0.02);
    }

    #[test]
    fn sgd_step_by_hand() {
        let mut opt = Optimizer::new(OptimizerConfig::sgd(0.5));
        let mut w = [1.0, 2.0];
        opt.update(std::iter::once(&mut w[..]), std::iter::once(&[0.2, -4.0][..]));
        assert_eq!(w, [0.9, 4.0]);
        assert_eq!(opt.steps_taken(), 1);
    }

    #[test]
    fn config_json_and_validation() {
        let c = OptimizerConfig::adam(3e-4);
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"kind\":\"adam\""));
        assert_eq!(serde_json::from_str::<OptimizerConfig>(&s).unwrap(), c);
        assert!(OptimizerConfig::sgd(-1.0).validate().is_err());
        assert!(OptimizerConfig::by_name("nadam", 1e-3).is_err());
        assert_eq!(OptimizerConfig::by_name("RMSprop", 0.1).unwrap().lr(), 0.1);
    }
}
