use std::cmp::Ordering;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{SearchRanges, SearchSpace};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::MetricReport;
use crate::ffn::{fit, FfnModel, HyperConfig, TrainReport};

/// Seed for one configuration, independent of evaluation order.
pub fn derive_seed(master: u64, tag: &str, config: &HyperConfig) -> u64 {
    let json = serde_json::to_string(&config.unseeded()).expect("config serializes");
    let text = format!("{master}|{tag}|{json}");
    let digest = crate::digest::sha256_hex(text.as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    /// Position of the configuration in the evaluated list.
    pub order: usize,
    pub config: HyperConfig,
    pub params: usize,
    /// Final-epoch validation MSE on the normalized scale; `+inf` (JSON `null`) for failures.
    #[serde(with = "inf_as_null")]
    pub val_mse: f64,
    /// Mean per-column validation R² in physical units.
    pub val_r2: Option<f64>,
    pub seconds: f64,
    pub seed: u64,
    #[serde(default)]
    pub failed: Option<String>,
}

impl LeaderboardEntry {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.val_mse
            .total_cmp(&other.val_mse)
            .then(self.params.cmp(&other.params))
            .then(self.config.batch_size.cmp(&other.config.batch_size))
            .then(self.order.cmp(&other.order))
    }
}

/// Evaluated configurations, best first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub entries: Vec<LeaderboardEntry>,
}

impl Leaderboard {
    pub fn from_entries(mut entries: Vec<LeaderboardEntry>) -> Self {
        entries.sort_by(LeaderboardEntry::rank_cmp);
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> Option<&LeaderboardEntry> {
        self.entries.first().filter(|e| e.failed.is_none())
    }

    pub fn total_seconds(&self) -> f64 {
        self.entries.iter().map(|e| e.seconds).sum()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self).map_err(|e| Error::io(path, e.into()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(f));
        let io = |e: csv::Error| Error::io(path, e.into());
        w.write_record([
            "rank",
            "hidden_layers",
            "nodes",
            "batch_size",
            "epochs",
            "activation",
            "optimizer",
            "lr",
            "params",
            "val_mse",
            "val_r2",
            "seconds",
            "seed",
            "failed",
        ])
        .map_err(io)?;
        for (rank, e) in self.entries.iter().enumerate() {
            let c = &e.config;
            w.write_record([
                (rank + 1).to_string(),
                c.hidden_layers.to_string(),
                c.nodes.to_string(),
                c.batch_size.to_string(),
                c.epochs.to_string(),
                c.activation.to_string(),
                c.optimizer.name().to_owned(),
                c.optimizer.lr().to_string(),
                e.params.to_string(),
                e.val_mse.to_string(),
                e.val_r2.map_or_else(String::new, |r| r.to_string()),
                e.seconds.to_string(),
                e.seed.to_string(),
                e.failed.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Result of a search: the winning configuration, its trained model and the full ranking.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: HyperConfig,
    pub model: FfnModel,
    pub report: TrainReport,
    pub leaderboard: Leaderboard,
    /// Wall-clock time of the whole search.
    pub seconds: f64,
}

fn validation_r2(model: &FfnModel, val: &Dataset) -> Option<f64> {
    let pred = model.predict(val.inputs()).ok()?;
    MetricReport::compute(&val.schema.labels, val.labels(), &pred)
        .ok()?
        .mean_r2()
}

/// Trains every configuration (seeded from `master_seed`) and ranks them.
pub fn evaluate_configs(
    configs: Vec<HyperConfig>,
    train: &Dataset,
    val: &Dataset,
    master_seed: u64,
) -> Result<SearchOutcome> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("nothing to search".into()));
    }
    for c in &configs {
        c.validate()?;
    }
    let start = Instant::now();
    let (di, dl) = (train.input_dim(), train.label_dim());
    let results: Vec<(LeaderboardEntry, Option<(FfnModel, TrainReport)>)> = configs
        .into_par_iter()
        .enumerate()
        .map(|(order, cfg)| {
            let seed = derive_seed(master_seed, "config", &cfg);
            let cfg = cfg.with_seed(seed);
            let params = cfg.param_count(di, dl);
            let t0 = Instant::now();
            match fit(train, val, &cfg) {
                Ok((model, report)) => {
                    let entry = LeaderboardEntry {
                        order,
                        params,
                        val_mse: report.final_val_loss().unwrap_or(f64::INFINITY),
                        val_r2: validation_r2(&model, val),
                        seconds: t0.elapsed().as_secs_f64(),
                        seed,
                        failed: None,
                        config: cfg,
                    };
                    Ok((entry, Some((model, report))))
                }
                Err(e) if e.is_numeric() => {
                    log::warn!("configuration {order} failed: {e}");
                    let entry = LeaderboardEntry {
                        order,
                        params,
                        val_mse: f64::INFINITY,
                        val_r2: None,
                        seconds: t0.elapsed().as_secs_f64(),
                        seed,
                        failed: Some(e.to_string()),
                        config: cfg,
                    };
                    Ok((entry, None))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(&LeaderboardEntry, &(FfnModel, TrainReport))> = None;
    for (entry, trained) in &results {
        if let Some(t) = trained {
            if best.is_none_or(|(b, _)| entry.rank_cmp(b) == Ordering::Less) {
                best = Some((entry, t));
            }
        }
    }
    let Some((best_entry, (model, report))) = best else {
        return Err(Error::DivergedLoss { epoch: 0 });
    };
    let (best_cfg, model, report) = (best_entry.config.clone(), model.clone(), report.clone());
    let leaderboard = Leaderboard::from_entries(results.into_iter().map(|(e, _)| e).collect());
    Ok(SearchOutcome {
        best: best_cfg,
        model,
        report,
        leaderboard,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Exhaustive search over the Cartesian product of `space`.
pub fn grid_search(space: &SearchSpace, train: &Dataset, val: &Dataset, master_seed: u64) -> Result<SearchOutcome> {
    space.validate()?;
    evaluate_configs(space.configs()?, train, val, master_seed)
}

/// `n_draws` configurations drawn from `ranges` with `seed`, evaluated like [`grid_search`].
pub fn random_search(
    ranges: &SearchRanges,
    n_draws: usize,
    train: &Dataset,
    val: &Dataset,
    seed: u64,
) -> Result<SearchOutcome> {
    if n_draws == 0 {
        return Err(Error::InvalidConfig("random search needs at least one draw".into()));
    }
    evaluate_configs(ranges.sample(n_draws, seed)?, train, val, seed)
}
