use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sample_test_inputs, Dataset, ParameterRange, Provenance, Schema, Structure, TIME_COLUMN};
use crate::error::{Error, Result};
use crate::mbd::{TimeGrid, Trajectory};
use crate::system::SystemModel;

/// Exact trajectories for every lattice point, computed once. Both data
/// layouts are slices of the same store, so their labels agree bit for bit.
#[derive(Debug, Clone)]
pub struct TrajectoryStore {
    pub model: SystemModel,
    pub lattice: Vec<Vec<f64>>,
    pub grid: TimeGrid,
    pub trajectories: Vec<Trajectory>,
    pub ranges: Vec<ParameterRange>,
}

impl TrajectoryStore {
    pub fn generate(model: &SystemModel, lattice: Vec<Vec<f64>>, grid: TimeGrid) -> Result<Self> {
        if lattice.is_empty() {
            return Err(Error::InvalidConfig("lattice is empty".into()));
        }
        let trajectories = lattice
            .par_iter()
            .map(|point| {
                model.simulate(point, &grid).map_err(|e| Error::Simulation {
                    point: point.clone(),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model: *model,
            lattice,
            grid,
            trajectories,
            ranges: Vec::new(),
        })
    }

    pub fn with_ranges(mut self, ranges: Vec<ParameterRange>) -> Self {
        self.ranges = ranges;
        self
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            ranges: self.ranges.clone(),
            seed: None,
            dt: Some(self.grid.dt),
            fingerprint: None,
        }
    }

    pub fn sfull_schema(&self) -> Schema {
        let mut inputs: Vec<&str> = self.model.design_names().to_vec();
        inputs.push(TIME_COLUMN);
        Schema::new(&inputs, self.model.label_names())
    }

    pub fn sfixed_schema(&self) -> Schema {
        Schema::new(self.model.design_names(), self.model.label_names())
    }

    /// One row per (lattice point, instant), lattice-major.
    pub fn sfull(&self) -> Result<Dataset> {
        let di = self.model.design_names().len() + 1;
        let dl = self.model.label_names().len();
        let rows = self.lattice.len() * self.grid.len();
        let mut inputs = Vec::with_capacity(rows * di);
        let mut labels = Vec::with_capacity(rows * dl);
        for (point, traj) in self.lattice.iter().zip(&self.trajectories) {
            for (t, row) in traj.times.iter().zip(traj.rows()) {
                inputs.extend_from_slice(point);
                inputs.push(*t);
                labels.extend_from_slice(row);
            }
        }
        Ok(Dataset::new(self.sfull_schema(), Structure::Sfull, inputs, labels)?.with_provenance(self.provenance()))
    }

    /// The dataset of every lattice point at grid instant `index`.
    pub fn sfixed_at(&self, index: usize) -> Result<Dataset> {
        if index >= self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "time index {index} outside grid of {} instants",
                self.grid.len()
            )));
        }
        let mut inputs = Vec::with_capacity(self.lattice.len() * self.lattice[0].len());
        let mut labels = Vec::new();
        for (point, traj) in self.lattice.iter().zip(&self.trajectories) {
            inputs.extend_from_slice(point);
            labels.extend_from_slice(traj.row(index));
        }
        let structure = Structure::Sfixed {
            t: self.grid.time(index),
            index,
        };
        Ok(Dataset::new(self.sfixed_schema(), structure, inputs, labels)?.with_provenance(self.provenance()))
    }

    pub fn sfixed(&self) -> Result<Vec<Dataset>> {
        (0..self.grid.len()).map(|i| self.sfixed_at(i)).collect()
    }
}

pub fn build_sfull(model: &SystemModel, lattice: Vec<Vec<f64>>, grid: TimeGrid) -> Result<Dataset> {
    TrajectoryStore::generate(model, lattice, grid)?.sfull()
}

pub fn build_sfixed(model: &SystemModel, lattice: Vec<Vec<f64>>, grid: TimeGrid) -> Result<Vec<Dataset>> {
    TrajectoryStore::generate(model, lattice, grid)?.sfixed()
}

/// `n` unseen rows in the time-as-input layout: design points uniform over the
/// box, each paired with a uniformly drawn grid instant no later than
/// `max_time` (or the end of the grid).
pub fn random_test_set(
    model: &SystemModel,
    ranges: &[ParameterRange],
    grid: &TimeGrid,
    n: usize,
    max_time: Option<f64>,
    seed: u64,
) -> Result<Dataset> {
    let last = match max_time {
        Some(t) => ((t / grid.dt + 1e-9).floor() as usize).min(grid.steps),
        None => grid.steps,
    };
    let designs = sample_test_inputs(ranges, n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..=last)).collect();

    let rows = designs
        .par_iter()
        .zip(indices.par_iter())
        .map(|(design, &idx)| {
            let sub = TimeGrid {
                dt: grid.dt,
                steps: idx,
            };
            let traj = model.simulate(design, &sub).map_err(|e| Error::Simulation {
                point: design.clone(),
                source: Box::new(e),
            })?;
            Ok(traj.row(idx).to_vec())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut names: Vec<&str> = model.design_names().to_vec();
    names.push(TIME_COLUMN);
    let mut inputs = Vec::with_capacity(n * names.len());
    for (design, &idx) in designs.iter().zip(&indices) {
        inputs.extend_from_slice(design);
        inputs.push(grid.time(idx));
    }
    let ds = Dataset::new(
        Schema::new(&names, model.label_names()),
        Structure::Sfull,
        inputs,
        rows.concat(),
    )?;
    Ok(ds.with_provenance(Provenance {
        ranges: ranges.to_vec(),
        seed: Some(seed),
        dt: Some(grid.dt),
        fingerprint: None,
    }))
}
