//! Exact dynamics of the case-study mechanisms.
//!
//! Pendulum systems are integrated with fixed-step RK4; the slider crank is
//! evaluated in closed form. [`augmented`] holds the Lagrange-multiplier
//! formulation and its embedded reduction, used to cross-check the pendulum
//! right-hand sides.

pub mod augmented;
pub mod integrate;
pub mod pendulum;
pub mod slider_crank;

pub use augmented::{
    embed_reduce, solve_augmented, AugmentedSolution, AugmentedSystem, CartesianPendulum, EmbeddedSolution,
};
pub use integrate::{integrate, integrate_substeps, SecondOrderSystem, TimeGrid, Trajectory};
pub use pendulum::{double_pendulum_rhs, single_pendulum_rhs, DoublePendulumParams, SinglePendulumParams};
pub use slider_crank::{slider_crank_kinematics, KinematicOutputs, SliderCrankParams};

/// Generalized coordinates and velocities at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>, t: f64) -> Self {
        assert_eq!(q.len(), qdot.len(), "q and qdot must have equal length");
        Self { q, qdot, t }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }
}

/// Time derivative of a [`State`]: `(qdot, qddot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
}
