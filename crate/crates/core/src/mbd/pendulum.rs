use serde::{Deserialize, Serialize};

use super::integrate::SecondOrderSystem;
use super::{State, StateDerivative};
use crate::error::{Error, Result};

/// Determinant magnitude below which the double-pendulum mass matrix is
/// treated as singular.
const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePendulumParams {
    pub g: f64,
    pub length: f64,
    pub mass: f64,
    pub damping: f64,
    pub theta0: f64,
    pub omega0: f64,
}

impl SinglePendulumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.mass > 0.0 && self.damping >= 0.0 && self.g > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "single pendulum requires L > 0, m > 0, c >= 0, g > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> State {
        State::new(vec![self.theta0], vec![self.omega0], 0.0)
    }

    #[inline]
    pub fn angular_acceleration(&self, theta: f64, omega: f64) -> f64 {
        -(self.g / self.length) * theta.sin() - self.damping / (self.mass * self.length) * omega
    }

    /// Kinetic plus potential energy, with the pivot as potential reference.
    pub fn energy(&self, theta: f64, omega: f64) -> f64 {
        let (m, l) = (self.mass, self.length);
        0.5 * m * l * l * omega * omega - m * self.g * l * theta.cos()
    }
}

impl SecondOrderSystem for SinglePendulumParams {
    fn dof(&self) -> usize {
        1
    }

    fn acceleration(&self, _t: f64, q: &[f64], qdot: &[f64], qddot: &mut [f64]) -> Result<()> {
        qddot[0] = self.angular_acceleration(q[0], qdot[0]);
        Ok(())
    }
}

pub fn single_pendulum_rhs(params: &SinglePendulumParams, state: &State) -> StateDerivative {
    StateDerivative {
        qdot: vec![state.qdot[0]],
        qddot: vec![params.angular_acceleration(state.q[0], state.qdot[0])],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoublePendulumParams {
    pub g: f64,
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    pub theta0_1: f64,
    pub theta0_2: f64,
    pub omega0_1: f64,
    pub omega0_2: f64,
}

impl DoublePendulumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0 && self.m1 > 0.0 && self.m2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "double pendulum requires positive lengths and masses (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> State {
        State::new(
            vec![self.theta0_1, self.theta0_2],
            vec![self.omega0_1, self.omega0_2],
            0.0,
        )
    }

    /// Solves the 2x2 coupled equations of motion for both angular
    /// accelerations by Cramer's rule.
    pub fn angular_accelerations(&self, theta: [f64; 2], omega: [f64; 2]) -> Result<[f64; 2]> {
        let Self { g, l1, l2, m1, m2, .. } = *self;
        let (sin_d, cos_d) = (theta[0] - theta[1]).sin_cos();
        let total = m1 + m2;

        let a11 = total * l1;
        let a12 = m2 * l2 * cos_d;
        let a21 = m2 * l1 * cos_d;
        let a22 = m2 * l2;
        let b1 = -m2 * l2 * omega[1] * omega[1] * sin_d - total * g * theta[0].sin();
        let b2 = m2 * l1 * omega[0] * omega[0] * sin_d - m2 * g * theta[1].sin();

        let det = a11 * a22 - a12 * a21;
        if det.abs() < SINGULAR_DET {
            return Err(Error::SingularMassMatrix { det });
        }
        Ok([(b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det])
    }

    pub fn energy(&self, theta: [f64; 2], omega: [f64; 2]) -> f64 {
        let Self { g, l1, l2, m1, m2, .. } = *self;
        let total = m1 + m2;
        0.5 * total * l1 * l1 * omega[0] * omega[0]
            + 0.5 * m2 * l2 * l2 * omega[1] * omega[1]
            + m2 * l1 * l2 * omega[0] * omega[1] * (theta[0] - theta[1]).cos()
            - total * g * l1 * theta[0].cos()
            - m2 * g * l2 * theta[1].cos()
    }
}

impl SecondOrderSystem for DoublePendulumParams {
    fn dof(&self) -> usize {
        2
    }

    fn acceleration(&self, _t: f64, q: &[f64], qdot: &[f64], qddot: &mut [f64]) -> Result<()> {
        let acc = self.angular_accelerations([q[0], q[1]], [qdot[0], qdot[1]])?;
        qddot.copy_from_slice(&acc);
        Ok(())
    }
}

pub fn double_pendulum_rhs(params: &DoublePendulumParams, state: &State) -> Result<StateDerivative> {
    let acc = params.angular_accelerations([state.q[0], state.q[1]], [state.qdot[0], state.qdot[1]])?;
    Ok(StateDerivative {
        qdot: state.qdot.clone(),
        qddot: acc.to_vec(),
    })
}
