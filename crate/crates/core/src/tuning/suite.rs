use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{derive_seed, grid_search, Leaderboard};
use super::space::SearchSpace;
use crate::dataset::{Dataset, Structure};
use crate::error::{Error, Result};
use crate::ffn::{fit, load_model, save_model, FfnModel, HyperConfig, TrainReport};

/// Where each per-instant model gets its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ConfigSource {
    /// One configuration for every instant.
    Shared { config: HyperConfig },
    /// An independent grid search at every instant.
    PerModel { space: SearchSpace },
}

impl ConfigSource {
    pub fn name(&self) -> &'static str {
        match self {
            ConfigSource::Shared { .. } => "shared",
            ConfigSource::PerModel { .. } => "per_model",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteMember {
    pub t: f64,
    pub index: usize,
    /// Chosen configuration, including its seed.
    pub config: HyperConfig,
    pub model: Option<FfnModel>,
    pub report: Option<TrainReport>,
    pub leaderboard: Option<Leaderboard>,
    pub error: Option<String>,
    pub seconds: f64,
}

/// One model per fixed time instant, ordered by instant.
#[derive(Debug, Clone)]
pub struct SfixedSuite {
    pub members: Vec<SuiteMember>,
}

/// Wall-clock accounting for building a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCost {
    pub mode: String,
    pub models: usize,
    pub trainings: usize,
    pub failures: usize,
    pub total_seconds: f64,
    pub per_model_seconds: Vec<f64>,
}

/// Instants closer than this (seconds) are treated as equal.
const TIME_TOL: f64 = 1e-9;

impl SfixedSuite {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.t).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.members.iter().all(|m| m.model.is_some())
    }

    /// Instants whose model failed to train.
    pub fn gaps(&self) -> Vec<f64> {
        self.members.iter().filter(|m| m.model.is_none()).map(|m| m.t).collect()
    }

    pub fn model_at_time(&self, t: f64) -> Result<&FfnModel> {
        self.members
            .iter()
            .find(|m| (m.t - t).abs() <= TIME_TOL)
            .and_then(|m| m.model.as_ref())
            .ok_or(Error::MissingModel(t))
    }

    /// Prediction of the model for instant `t` at the given design points.
    pub fn predict_at(&self, t: f64, designs: &[f64]) -> Result<Vec<f64>> {
        self.model_at_time(t)?.predict(designs)
    }

    /// Writes `suite.json` plus one model file per trained instant.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut index = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let file = m.model.as_ref().map(|_| format!("model_{:04}.json", m.index));
            if let (Some(model), Some(name)) = (&m.model, &file) {
                save_model(model, &dir.join(name))?;
            }
            index.push(SuiteIndexEntry {
                t: m.t,
                index: m.index,
                config: m.config.clone(),
                model: file,
                error: m.error.clone(),
                report: m.report.clone(),
            });
        }
        let path = dir.join(SUITE_FILE);
        let json = serde_json::to_string_pretty(&SuiteIndex {
            format: SUITE_FORMAT.into(),
            version: SUITE_VERSION,
            members: index,
        })
        .expect("suite index serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUITE_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let idx: SuiteIndex = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })?;
        if idx.format != SUITE_FORMAT {
            return Err(Error::SchemaMismatch(format!("not a suite index: {}", idx.format)));
        }
        if idx.version != SUITE_VERSION {
            return Err(Error::VersionMismatch {
                found: idx.version,
                expected: SUITE_VERSION,
            });
        }
        let members = idx
            .members
            .into_iter()
            .map(|e| {
                let model = e.model.as_ref().map(|f| load_model(&dir.join(f))).transpose()?;
                Ok(SuiteMember {
                    t: e.t,
                    index: e.index,
                    config: e.config,
                    model,
                    report: e.report,
                    leaderboard: None,
                    error: e.error,
                    seconds: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { members })
    }
}

pub const SUITE_FILE: &str = "suite.json";
const SUITE_FORMAT: &str = "mbdnn-sfixed-suite";
const SUITE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SuiteIndexEntry {
    t: f64,
    index: usize,
    config: HyperConfig,
    model: Option<String>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    report: Option<TrainReport>,
}

#[derive(Serialize, Deserialize)]
struct SuiteIndex {
    format: String,
    version: u32,
    members: Vec<SuiteIndexEntry>,
}

/// Trains one model per fixed-instant dataset. Each dataset is split with
/// `val_fraction` held out; seeds derive from `master_seed` and the instant.
pub fn train_sfixed_suite(
    datasets: &[Dataset],
    source: &ConfigSource,
    val_fraction: f64,
    master_seed: u64,
) -> Result<(SfixedSuite, SuiteCost)> {
    if datasets.is_empty() {
        return Err(Error::InvalidConfig("no fixed-instant datasets".into()));
    }
    let mut seen = Vec::with_capacity(datasets.len());
    for ds in datasets {
        match ds.structure {
            Structure::Sfixed { index, .. } if !seen.contains(&index) => seen.push(index),
            Structure::Sfixed { index, .. } => {
                return Err(Error::InvalidConfig(format!("duplicate time index {index}")))
            }
            Structure::Sfull => return Err(Error::SchemaMismatch("suite datasets must have fixed time".into())),
        }
    }
    match source {
        ConfigSource::Shared { config } => config.validate()?,
        ConfigSource::PerModel { space } => space.validate()?,
    }

    let start = Instant::now();
    let mut members = datasets
        .par_iter()
        .map(|ds| {
            let Structure::Sfixed { t, index } = ds.structure else {
                unreachable!("checked above")
            };
            let t0 = Instant::now();
            let (train, val) = ds.split_validation(val_fraction, master_seed)?;
            let instant_seed = master_seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let result = match source {
                ConfigSource::Shared { config } => {
                    let cfg = config.clone().with_seed(derive_seed(instant_seed, "sfixed", config));
                    fit(&train, &val, &cfg).map(|(m, r)| (cfg, m, r, None))
                }
                ConfigSource::PerModel { space } => grid_search(space, &train, &val, instant_seed)
                    .map(|o| (o.best, o.model, o.report, Some(o.leaderboard))),
            };
            let seconds = t0.elapsed().as_secs_f64();
            Ok(match result {
                Ok((config, model, report, leaderboard)) => SuiteMember {
                    t,
                    index,
                    config,
                    model: Some(model),
                    report: Some(report),
                    leaderboard,
                    error: None,
                    seconds,
                },
                Err(e) if e.is_numeric() => {
                    log::warn!("model for t = {t} failed: {e}");
                    SuiteMember {
                        t,
                        index,
                        config: match source {
                            ConfigSource::Shared { config } => config.clone(),
                            ConfigSource::PerModel { .. } => HyperConfig::new(0, 0, 1, 0),
                        },
                        model: None,
                        report: None,
                        leaderboard: None,
                        error: Some(e.to_string()),
                        seconds,
                    }
                }
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    members.sort_by_key(|m| m.index);

    let trainings = match source {
        ConfigSource::Shared { .. } => members.len(),
        ConfigSource::PerModel { space } => members.len() * space.len(),
    };
    let cost = SuiteCost {
        mode: source.name().into(),
        models: members.len(),
        trainings,
        failures: members.iter().filter(|m| m.model.is_none()).count(),
        total_seconds: start.elapsed().as_secs_f64(),
        per_model_seconds: members.iter().map(|m| m.seconds).collect(),
    };
    Ok((SfixedSuite { members }, cost))
}
