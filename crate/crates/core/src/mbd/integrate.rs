use serde::{Deserialize, Serialize};

use super::State;
use crate::error::{Error, Result};

/// A mechanical system written as `qddot = f(t, q, qdot)`.
pub trait SecondOrderSystem {
    fn dof(&self) -> usize;

    fn acceleration(&self, t: f64, q: &[f64], qdot: &[f64], qddot: &mut [f64]) -> Result<()>;
}

/// Uniform instants `t_i = i * dt` for `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { dt, steps })
    }

    /// Grid over `[0, t_final]`; `t_final` must be a whole multiple of `dt`.
    pub fn spanning(t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_final must be >= 0, got {t_final}")));
        }
        let steps = (t_final / dt).round();
        if ((steps * dt) - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_final = {t_final} is not a multiple of dt = {dt}"
            )));
        }
        Self::new(dt, steps as usize)
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.steps)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the grid instant closest to `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        if k < 0.0 || k as usize > self.steps {
            return None;
        }
        ((k * self.dt - t).abs() <= 1e-9 * self.dt).then_some(k as usize)
    }
}

/// Uniformly sampled output rows, stored flat in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn with_capacity(width: usize, rows: usize) -> Self {
        Self {
            times: Vec::with_capacity(rows),
            width,
            values: Vec::with_capacity(rows * width),
        }
    }

    pub fn push(&mut self, t: f64, row: &[f64]) {
        debug_assert_eq!(row.len(), self.width);
        self.times.push(t);
        self.values.extend_from_slice(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index * self.width..(index + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width.max(1))
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }
}

/// Classical RK4 over `grid`, starting from `init` at `t = 0`.
///
/// Rows are `[q, qdot, qddot]`, with `qddot` re-evaluated from the system at
/// each grid instant.
pub fn integrate<S: SecondOrderSystem + ?Sized>(system: &S, init: &State, grid: &TimeGrid) -> Result<Trajectory> {
    integrate_substeps(system, init, grid, 1)
}

/// RK4 with `substeps` equal steps per grid interval; rows only at grid instants.
pub fn integrate_substeps<S: SecondOrderSystem + ?Sized>(
    system: &S,
    init: &State,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<Trajectory> {
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be positive".into()));
    }
    let n = system.dof();
    if init.q.len() != n || init.qdot.len() != n {
        return Err(Error::shape(format!("state of {n} coordinates"), init.q.len()));
    }
    let dt = grid.dt / substeps as f64;
    let mut traj = Trajectory::with_capacity(3 * n, grid.len());

    // y = [q, qdot]; k* hold [qdot, qddot] at the RK stages.
    let mut y = [init.q.as_slice(), init.qdot.as_slice()].concat();
    let mut stage = vec![0.0; 2 * n];
    let mut k = [vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n]];
    let mut row = vec![0.0; 3 * n];

    let eval = |t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        let (q, qdot) = y.split_at(n);
        let (vel, acc) = out.split_at_mut(n);
        vel.copy_from_slice(qdot);
        system.acceleration(t, q, qdot, acc)
    };

    for i in 0..grid.len() {
        let t = grid.time(i);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        row[..2 * n].copy_from_slice(&y);
        {
            let (q, qdot) = y.split_at(n);
            system.acceleration(t, q, qdot, &mut row[2 * n..])?;
        }
        if row[2 * n..].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        traj.push(t, &row);

        if i == grid.steps {
            break;
        }

        for sub in 0..substeps {
            let t = t + sub as f64 * dt;
            eval(t, &y, &mut k[0])?;
            for j in 0..2 * n {
                stage[j] = y[j] + 0.5 * dt * k[0][j];
            }
            eval(t + 0.5 * dt, &stage, &mut k[1])?;
            for j in 0..2 * n {
                stage[j] = y[j] + 0.5 * dt * k[1][j];
            }
            eval(t + 0.5 * dt, &stage, &mut k[2])?;
            for j in 0..2 * n {
                stage[j] = y[j] + dt * k[2][j];
            }
            eval(t + dt, &stage, &mut k[3])?;
            for j in 0..2 * n {
                y[j] += dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
            }
        }
    }
    Ok(traj)
}
