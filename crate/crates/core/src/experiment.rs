//! End-to-end experiment definitions: configuration files with per-system
//! defaults, desk-scale shrinking, and the generate/train/evaluate pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{random_test_set, write_csv, Dataset, ParameterRange, TrajectoryStore};
use crate::error::{Error, Result};
use crate::eval::{predict_trajectory, scatter_export, trajectory_export, write_json, MetricReport, Predictor};
use crate::ffn::{fit, save_model, Activation, FfnModel, HyperConfig, OptimizerConfig, TrainReport};
use crate::mbd::TimeGrid;
use crate::system::{SystemKind, SystemModel, SystemSpec};
use crate::tuning::{grid_search, train_sfixed_suite, ConfigSource, Leaderboard, SearchSpace, SfixedSuite, SuiteCost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Sfull,
    Sfixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfixedMode {
    #[default]
    Shared,
    PerModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Validation splits.
    pub data: u64,
    /// Weight initialization and shuffling.
    pub train: u64,
    /// Random test points.
    pub test: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemKind,
    pub model: SystemModel,
    pub ranges: Vec<ParameterRange>,
    pub t_final: f64,
    pub dt: f64,
    pub structure: StructureKind,
    pub hyper: HyperConfig,
    /// Grid searched before training when present.
    #[serde(default)]
    pub search: Option<SearchSpace>,
    #[serde(default)]
    pub sfixed_mode: SfixedMode,
    pub val_fraction: f64,
    pub test_points: usize,
    /// Latest instant drawn for test points (defaults to `t_final`).
    #[serde(default)]
    pub test_max_time: Option<f64>,
    /// Design points whose full trajectories are exported.
    #[serde(default)]
    pub showcase: Vec<Vec<f64>>,
    pub seeds: Seeds,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_err(e: serde_json::Error) -> Error {
    if e.is_data() {
        Error::InvalidConfig(e.to_string())
    } else {
        Error::Parse {
            line: e.line(),
            message: e.to_string(),
        }
    }
}

impl ExperimentConfig {
    /// Published settings for `kind`, time as an input column.
    pub fn preset(kind: SystemKind) -> Self {
        let spec = SystemSpec::for_kind(kind);
        let (hyper, showcase) = match kind {
            SystemKind::Single => (
                HyperConfig::new(2, 128, 64, 400),
                vec![
                    vec![0.1911, 0.055, 3.78],
                    vec![0.123, 0.055, 2.53],
                    vec![0.1583, 0.055, 0.52],
                    vec![0.1758, 0.109, 0.52],
                    vec![0.1911, 0.109, 4.52],
                ],
            ),
            SystemKind::Double => (
                HyperConfig::new(4, 64, 1024, 400),
                vec![
                    vec![1.010, 2.130, 0.00, 0.300],
                    vec![1.500, 2.410, 0.03, 0.330],
                    vec![1.620, 2.560, 0.044, 0.384],
                    vec![1.330, 2.820, 0.062, 0.412],
                    vec![1.980, 2.940, 0.087, 0.470],
                ],
            ),
            SystemKind::Slider => (HyperConfig::new(2, 128, 64, 200), vec![vec![1.78, 1.36, 3.05]]),
        };
        Self {
            name: kind.to_string(),
            system: kind,
            model: spec.model,
            ranges: spec.ranges,
            t_final: spec.time.t_final(),
            dt: spec.time.dt,
            structure: StructureKind::Sfull,
            hyper: hyper
                .with_activation(Activation::Tanh)
                .with_optimizer(OptimizerConfig::adam(1e-3)),
            search: None,
            sfixed_mode: SfixedMode::Shared,
            val_fraction: 0.1,
            test_points: 1000,
            test_max_time: None,
            showcase,
            seeds: Seeds {
                data: 1,
                train: 2,
                test: 3,
            },
            output_dir: None,
        }
    }

    /// Parses a JSON config. Missing fields take the preset values of the
    /// config's `system`; unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text).map_err(parse_err)?;
        let kind: SystemKind = user
            .get("system")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::InvalidConfig("config needs a string `system` field".into()))?
            .parse()?;
        let mut merged = serde_json::to_value(Self::preset(kind)).expect("preset serializes");
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged).map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::spanning(self.t_final, self.dt)
    }

    pub fn spec(&self) -> Result<SystemSpec> {
        Ok(SystemSpec {
            model: self.model,
            ranges: self.ranges.clone(),
            time: self.grid()?,
        })
    }

    /// Hyper-parameter space for per-instant searches: the configured space,
    /// or layers {2, 3, 4} x nodes {128, 256} x batch {64, 128} around `hyper`.
    pub fn per_model_space(&self) -> SearchSpace {
        self.search
            .clone()
            .unwrap_or_else(|| SearchSpace::architecture(&self.hyper, &[2, 3, 4], &[128, 256], &[64, 128]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.kind() != self.system {
            return Err(Error::InvalidConfig(format!(
                "model constants are for {}, system is {}",
                self.model.kind(),
                self.system
            )));
        }
        let names = self.model.design_names();
        let given: Vec<&str> = self.ranges.iter().map(|r| r.name.as_str()).collect();
        if given != names {
            return Err(Error::InvalidConfig(format!(
                "{} ranges must be named {names:?} in order, got {given:?}",
                self.system
            )));
        }
        self.spec()?.validate()?;
        self.hyper.validate()?;
        if let Some(space) = &self.search {
            space.validate()?;
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.test_points < 2 {
            return Err(Error::InvalidConfig("test_points must be at least 2".into()));
        }
        if let Some(t) = self.test_max_time {
            if !(0.0..=self.t_final).contains(&t) {
                return Err(Error::InvalidConfig(format!("test_max_time {t} outside [0, t_final]")));
            }
        }
        if let Some(bad) = self.showcase.iter().find(|d| d.len() != names.len()) {
            return Err(Error::InvalidConfig(format!(
                "showcase point {bad:?} needs {} values",
                names.len()
            )));
        }
        Ok(())
    }

    /// Shrinks every lattice dimension to `round((count - 1) * scale) + 1`
    /// points (at least 2) and optionally overrides the epoch count.
    pub fn desk_scale(mut self, scale: Option<f64>, epochs: Option<usize>) -> Result<Self> {
        if let Some(s) = scale {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidConfig(format!("scale must lie in (0, 1], got {s}")));
            }
            for r in &mut self.ranges {
                if r.count > 1 {
                    r.count = ((((r.count - 1) as f64) * s).round() as usize + 1).max(2);
                }
            }
        }
        if let Some(e) = epochs {
            self.hyper.epochs = e;
            if let Some(space) = &mut self.search {
                space.epochs = vec![e];
            }
        }
        Ok(self)
    }

    /// SHA-256 of the canonical JSON, ignoring the output directory.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        crate::digest::sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    pub fn lattice_size(&self) -> usize {
        self.ranges.iter().map(|r| r.count).product()
    }
}

/// Trajectory store over the configured lattice and grid.
pub fn generate_store(cfg: &ExperimentConfig) -> Result<TrajectoryStore> {
    let spec = cfg.spec()?;
    let lattice = crate::dataset::build_lattice(&spec.ranges)?;
    Ok(TrajectoryStore::generate(&spec.model, lattice, spec.time)?.with_ranges(spec.ranges))
}

fn stamp(ds: Dataset, cfg: &ExperimentConfig) -> Dataset {
    let mut p = ds.provenance.clone();
    p.fingerprint = Some(cfg.fingerprint());
    ds.with_provenance(p)
}

pub fn sfixed_file_name(index: usize) -> String {
    format!("t_{index:04}.csv")
}

/// Writes the configured layout under `dir`: `sfull.csv`, or `sfixed/t_NNNN.csv`
/// per instant. Returns the written CSV paths.
pub fn write_datasets(cfg: &ExperimentConfig, store: &TrajectoryStore, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match cfg.structure {
        StructureKind::Sfull => {
            let path = dir.join("sfull.csv");
            write_csv(&stamp(store.sfull()?, cfg), &path)?;
            Ok(vec![path])
        }
        StructureKind::Sfixed => {
            let sub = dir.join("sfixed");
            fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            (0..store.grid.len())
                .map(|i| {
                    let path = sub.join(sfixed_file_name(i));
                    write_csv(&stamp(store.sfixed_at(i)?, cfg), &path)?;
                    Ok(path)
                })
                .collect()
        }
    }
}

/// A trained meta-model of either layout.
#[derive(Debug, Clone)]
pub enum Trained {
    Sfull {
        model: FfnModel,
        report: TrainReport,
        leaderboard: Option<Leaderboard>,
    },
    Sfixed {
        suite: SfixedSuite,
        cost: SuiteCost,
    },
}

impl Trained {
    pub fn predictor(&self) -> Predictor<'_> {
        match self {
            Trained::Sfull { model, .. } => Predictor::Sfull(model),
            Trained::Sfixed { suite, .. } => Predictor::Sfixed(suite),
        }
    }

    /// `model.json` (+ report, leaderboard) or a suite directory under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        match self {
            Trained::Sfull {
                model,
                report,
                leaderboard,
            } => {
                save_model(model, &dir.join("model.json"))?;
                write_json(&LossHistory::from(report), &dir.join("train_report.json"))?;
                if let Some(lb) = leaderboard {
                    lb.write_json(&dir.join("leaderboard.json"))?;
                    lb.write_csv(&dir.join("leaderboard.csv"))?;
                }
                Ok(())
            }
            Trained::Sfixed { suite, .. } => suite.save(&dir.join("suite")),
        }
    }
}

/// Deterministic part of a [`TrainReport`]: losses and final checksum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub checksum: String,
}

impl From<&TrainReport> for LossHistory {
    fn from(r: &TrainReport) -> Self {
        Self {
            train_loss: r.train_loss.clone(),
            val_loss: r.val_loss.clone(),
            checksum: r.checksum.clone(),
        }
    }
}

/// Trains a time-as-input model (after a grid search when `cfg.search` is set).
pub fn train_sfull(cfg: &ExperimentConfig, data: &Dataset) -> Result<Trained> {
    let (train, val) = data.split_validation(cfg.val_fraction, cfg.seeds.data)?;
    match &cfg.search {
        Some(space) => {
            let out = grid_search(space, &train, &val, cfg.seeds.train)?;
            Ok(Trained::Sfull {
                model: out.model,
                report: out.report,
                leaderboard: Some(out.leaderboard),
            })
        }
        None => {
            let hyper = cfg.hyper.clone().with_seed(cfg.seeds.train);
            let (model, report) = fit(&train, &val, &hyper)?;
            Ok(Trained::Sfull {
                model,
                report,
                leaderboard: None,
            })
        }
    }
}

pub fn train_sfixed(cfg: &ExperimentConfig, datasets: &[Dataset]) -> Result<Trained> {
    let source = match cfg.sfixed_mode {
        SfixedMode::Shared => ConfigSource::Shared {
            config: cfg.hyper.clone(),
        },
        SfixedMode::PerModel => ConfigSource::PerModel {
            space: cfg.per_model_space(),
        },
    };
    let (suite, cost) = train_sfixed_suite(datasets, &source, cfg.val_fraction, cfg.seeds.train)?;
    Ok(Trained::Sfixed { suite, cost })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub design: Vec<f64>,
    pub file: String,
    pub extrapolated: bool,
    pub metrics: MetricReport,
    /// Residual roughness per output column.
    pub residual_roughness: Vec<Option<f64>>,
}

/// Everything needed to audit and regenerate an experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub system: SystemKind,
    pub structure: StructureKind,
    pub config_fingerprint: String,
    pub seeds: Seeds,
    pub lattice_points: usize,
    pub time_instants: usize,
    pub test_metrics: MetricReport,
    pub trajectories: Vec<TrajectorySummary>,
    /// Checksums of the trained parameters (one per model).
    pub model_checksums: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generate_seconds: f64,
    pub train_seconds: f64,
    pub evaluate_seconds: f64,
    #[serde(default)]
    pub suite_cost: Option<SuiteCost>,
}

/// Scores `trained` on random unseen points and the showcase trajectories,
/// writing `scatter.csv`, `trajectory_NN.csv` and returning the summary.
pub fn evaluate(cfg: &ExperimentConfig, predictor: Predictor<'_>, dir: &Path) -> Result<ExperimentSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let spec = cfg.spec()?;
    let max_t = cfg.test_max_time;
    let test = random_test_set(
        &spec.model,
        &spec.ranges,
        &spec.time,
        cfg.test_points,
        max_t,
        cfg.seeds.test,
    )?;
    let test_metrics = scatter_export(predictor, &test, &dir.join("scatter.csv"))?;

    let mut trajectories = Vec::with_capacity(cfg.showcase.len());
    for (k, design) in cfg.showcase.iter().enumerate() {
        let pt = predict_trajectory(predictor, &spec.model, &spec.ranges, design, &spec.time)?;
        let file = format!("trajectory_{k:02}.csv");
        trajectory_export(&pt, &dir.join(&file))?;
        trajectories.push(TrajectorySummary {
            design: design.clone(),
            file,
            extrapolated: pt.extrapolated,
            metrics: pt.metrics()?,
            residual_roughness: (0..pt.width()).map(|c| pt.residual_roughness(c).ok()).collect(),
        });
    }
    let model_checksums = match predictor {
        Predictor::Sfull(model) => vec![model.checksum()],
        Predictor::Sfixed(suite) => suite
            .members
            .iter()
            .map(|m| m.model.as_ref().map_or_else(String::new, FfnModel::checksum))
            .collect(),
    };
    Ok(ExperimentSummary {
        name: cfg.name.clone(),
        system: cfg.system,
        structure: cfg.structure,
        config_fingerprint: cfg.fingerprint(),
        seeds: cfg.seeds,
        lattice_points: cfg.lattice_size(),
        time_instants: spec.time.len(),
        test_metrics,
        trajectories,
        model_checksums,
    })
}

/// Generate, train, evaluate and write every artifact under `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentSummary> {
    cfg.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    fs::write(dir.join("config.json"), cfg.to_json() + "\n").map_err(|e| Error::io(dir, e))?;

    let t0 = Instant::now();
    let store = generate_store(cfg)?;
    let generate_seconds = t0.elapsed().as_secs_f64();
    log::info!(
        "{}: {} lattice points x {} instants",
        cfg.name,
        store.lattice.len(),
        store.grid.len()
    );

    let t1 = Instant::now();
    let trained = match cfg.structure {
        StructureKind::Sfull => train_sfull(cfg, &stamp(store.sfull()?, cfg))?,
        StructureKind::Sfixed => train_sfixed(cfg, &store.sfixed()?)?,
    };
    let train_seconds = t1.elapsed().as_secs_f64();
    trained.save(dir)?;

    let t2 = Instant::now();
    let summary = evaluate(cfg, trained.predictor(), dir)?;
    write_json(&summary, &dir.join("summary.json"))?;
    let timings = Timings {
        generate_seconds,
        train_seconds,
        evaluate_seconds: t2.elapsed().as_secs_f64(),
        suite_cost: match &trained {
            Trained::Sfixed { cost, .. } => Some(cost.clone()),
            Trained::Sfull { .. } => None,
        },
    };
    write_json(&timings, &dir.join("timings.json"))?;
    Ok(summary)
}
