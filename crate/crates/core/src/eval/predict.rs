use serde::{Deserialize, Serialize};

use super::metrics::{roughness, MetricReport};
use crate::dataset::{Dataset, ParameterRange};
use crate::error::{Error, Result};
use crate::ffn::FfnModel;
use crate::mbd::TimeGrid;
use crate::system::SystemModel;
use crate::tuning::SfixedSuite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSource {
    Sfull,
    Sfixed,
}

/// A trained meta-model: one network with time as input, or one per instant.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Sfull(&'a FfnModel),
    Sfixed(&'a SfixedSuite),
}

impl Predictor<'_> {
    pub fn source(&self) -> PredictionSource {
        match self {
            Predictor::Sfull(_) => PredictionSource::Sfull,
            Predictor::Sfixed(_) => PredictionSource::Sfixed,
        }
    }

    /// Physical-unit predictions for one design point at instant `t`.
    pub fn predict_point(&self, design: &[f64], t: f64) -> Result<Vec<f64>> {
        match self {
            Predictor::Sfull(m) => {
                let mut row = design.to_vec();
                row.push(t);
                m.predict(&row)
            }
            Predictor::Sfixed(s) => s.predict_at(t, design),
        }
    }

    /// Predictions for every row of a time-as-input dataset.
    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<f64>> {
        if !ds.schema.has_time() {
            return Err(Error::SchemaMismatch("test rows need a time column".into()));
        }
        match self {
            Predictor::Sfull(m) => m.predict(ds.inputs()),
            Predictor::Sfixed(_) => {
                let mut out = Vec::with_capacity(ds.len() * ds.label_dim());
                for i in 0..ds.len() {
                    let row = ds.input_row(i);
                    let (design, t) = row.split_at(row.len() - 1);
                    out.extend(self.predict_point(design, t[0])?);
                }
                Ok(out)
            }
        }
    }
}

/// Exact labels and meta-model predictions along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTrajectory {
    pub design: Vec<f64>,
    pub times: Vec<f64>,
    pub label_names: Vec<String>,
    /// Row-major, one row per instant.
    pub labels: Vec<f64>,
    pub predictions: Vec<f64>,
    pub source: PredictionSource,
    /// Set when the design point lies outside the training ranges.
    pub extrapolated: bool,
}

impl PredictedTrajectory {
    pub fn width(&self) -> usize {
        self.label_names.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn column_of(&self, values: &[f64], col: usize) -> Vec<f64> {
        values.iter().skip(col).step_by(self.width()).copied().collect()
    }

    pub fn label_column(&self, col: usize) -> Vec<f64> {
        self.column_of(&self.labels, col)
    }

    pub fn prediction_column(&self, col: usize) -> Vec<f64> {
        self.column_of(&self.predictions, col)
    }

    /// Prediction minus label for one output.
    pub fn residual(&self, col: usize) -> Vec<f64> {
        self.prediction_column(col)
            .iter()
            .zip(self.label_column(col))
            .map(|(p, l)| p - l)
            .collect()
    }

    pub fn residual_roughness(&self, col: usize) -> Result<f64> {
        roughness(&self.residual(col))
    }

    pub fn metrics(&self) -> Result<MetricReport> {
        MetricReport::compute(&self.label_names, &self.labels, &self.predictions)
    }
}

/// Labels from the simulator and predictions from `predictor` at every grid instant.
pub fn predict_trajectory(
    predictor: Predictor<'_>,
    system: &SystemModel,
    ranges: &[ParameterRange],
    design: &[f64],
    grid: &TimeGrid,
) -> Result<PredictedTrajectory> {
    let extrapolated = ranges.len() != design.len() || ranges.iter().zip(design).any(|(r, &x)| !r.contains(x));
    if extrapolated {
        log::warn!("design point {design:?} lies outside the training ranges");
    }
    let traj = system.simulate(design, grid)?;
    let mut predictions = Vec::with_capacity(traj.values.len());
    for &t in &traj.times {
        predictions.extend(predictor.predict_point(design, t)?);
    }
    if predictions.len() != traj.values.len() {
        return Err(Error::shape(
            format!("{} predicted values", traj.values.len()),
            predictions.len(),
        ));
    }
    Ok(PredictedTrajectory {
        design: design.to_vec(),
        times: traj.times.clone(),
        label_names: system.label_names().iter().map(|s| s.to_string()).collect(),
        labels: traj.values,
        predictions,
        source: predictor.source(),
        extrapolated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_lattice, TrajectoryStore};
    use crate::ffn::{fit, HyperConfig, OptimizerConfig};
    use crate::system::SystemSpec;
    use crate::tuning::{train_sfixed_suite, ConfigSource};

    fn setup() -> (SystemSpec, TrajectoryStore) {
        let spec = SystemSpec::single_pendulum().with_lattice_count(3);
        let grid = TimeGrid { dt: 0.1, steps: 3 };
        let store = TrajectoryStore::generate(&spec.model, build_lattice(&spec.ranges).unwrap(), grid).unwrap();
        (spec, store)
    }

    fn cfg() -> HyperConfig {
        HyperConfig::new(1, 8, 8, 3).with_optimizer(OptimizerConfig::adam(1e-2))
    }

    #[test]
    fn sfull_trajectory_shape_and_labels() {
        let (spec, store) = setup();
        let full = store.sfull().unwrap();
        let (tr, va) = full.split_validation(0.1, 0).unwrap();
        let (model, _) = fit(&tr, &va, &cfg()).unwrap();
        let design = store.lattice[4].clone();
        let pt = predict_trajectory(
            Predictor::Sfull(&model),
            &spec.model,
            &spec.ranges,
            &design,
            &store.grid,
        )
        .unwrap();
        assert_eq!(pt.len(), 4);
        assert!(!pt.extrapolated);
        assert_eq!(pt.labels, store.trajectories[4].values);
        let row = [design.clone(), vec![0.2]].concat();
        assert_eq!(&pt.predictions[6..9], model.predict(&row).unwrap().as_slice());
    }

    #[test]
    fn sfixed_single_instant_and_missing_model() {
        let (spec, store) = setup();
        let sets = store.sfixed().unwrap();
        let (suite, _) = train_sfixed_suite(&sets[..1], &ConfigSource::Shared { config: cfg() }, 0.1, 0).unwrap();
        let design = [0.12, 0.05, 1.0];
        let one = TimeGrid { dt: 0.1, steps: 0 };
        let pt = predict_trajectory(Predictor::Sfixed(&suite), &spec.model, &spec.ranges, &design, &one).unwrap();
        assert_eq!(pt.len(), 1);
        assert_eq!(pt.predictions, suite.predict_at(0.0, &design).unwrap());
        let err = predict_trajectory(
            Predictor::Sfixed(&suite),
            &spec.model,
            &spec.ranges,
            &design,
            &store.grid,
        );
        assert!(matches!(err, Err(Error::MissingModel(_))));
    }

    #[test]
    fn extrapolation_is_flagged_not_fatal() {
        let (spec, store) = setup();
        let full = store.sfull().unwrap();
        let (tr, va) = full.split_validation(0.1, 0).unwrap();
        let (model, _) = fit(&tr, &va, &cfg()).unwrap();
        let pt = predict_trajectory(
            Predictor::Sfull(&model),
            &spec.model,
            &spec.ranges,
            &[0.3, 0.05, 1.0],
            &store.grid,
        )
        .unwrap();
        assert!(pt.extrapolated);
    }

    #[test]
    fn residual_helpers() {
        let pt = PredictedTrajectory {
            design: vec![],
            times: vec![0.0, 0.1, 0.2],
            label_names: vec!["a".into(), "b".into()],
            labels: vec![1.0, 0.0, 2.0, 0.0, 3.0, 0.0],
            predictions: vec![1.0, 0.0, 3.0, 0.0, 3.0, 0.0],
            source: PredictionSource::Sfull,
            extrapolated: false,
        };
        assert_eq!(pt.residual(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(pt.residual_roughness(0).unwrap(), 4.0);
        assert_eq!(pt.residual_roughness(1).unwrap(), 0.0);
    }
}
