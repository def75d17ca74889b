//! The three case-study systems: fixed constants, design inputs, output
//! labels, and the exact simulator that produces those labels.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ParameterRange;
use crate::error::{Error, Result};
use crate::mbd::{
    integrate_substeps, slider_crank_kinematics, DoublePendulumParams, SinglePendulumParams, SliderCrankParams,
    TimeGrid, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Single,
    Double,
    Slider,
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SystemKind::Single => "single",
            SystemKind::Double => "double",
            SystemKind::Slider => "slider",
        })
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SystemKind::Single),
            "double" => Ok(SystemKind::Double),
            "slider" => Ok(SystemKind::Slider),
            other => Err(Error::InvalidConfig(format!(
                "unknown system `{other}` (expected single, double or slider)"
            ))),
        }
    }
}

/// A system's fixed constants. Design inputs are supplied per simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemModel {
    /// Design inputs `(L, c, omega0)`.
    Single { g: f64, mass: f64, theta0: f64 },
    /// Design inputs `(L1, L2, omega0_1, omega0_2)`.
    Double {
        g: f64,
        m1: f64,
        m2: f64,
        theta0_1: f64,
        theta0_2: f64,
    },
    /// Design inputs `(tau, r, L/r)`.
    Slider,
}

impl SystemModel {
    pub fn single_pendulum() -> Self {
        SystemModel::Single {
            g: 9.81,
            mass: 0.3,
            theta0: FRAC_PI_2,
        }
    }

    pub fn double_pendulum() -> Self {
        SystemModel::Double {
            g: 9.81,
            m1: 2.0,
            m2: 1.0,
            theta0_1: 1.6,
            theta0_2: 1.6,
        }
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            SystemModel::Single { .. } => SystemKind::Single,
            SystemModel::Double { .. } => SystemKind::Double,
            SystemModel::Slider => SystemKind::Slider,
        }
    }

    pub fn design_names(&self) -> &'static [&'static str] {
        match self {
            SystemModel::Single { .. } => &["L", "c", "omega0"],
            SystemModel::Double { .. } => &["L1", "L2", "omega0_1", "omega0_2"],
            SystemModel::Slider => &["tau", "r", "L_over_r"],
        }
    }

    pub fn label_names(&self) -> &'static [&'static str] {
        match self {
            SystemModel::Single { .. } => &["theta", "theta_dot", "theta_ddot"],
            SystemModel::Double { .. } => &["theta1", "theta2", "theta1_dot", "theta2_dot"],
            SystemModel::Slider => &["theta", "phi", "phi_dot", "phi_ddot", "x_b", "x_b_dot", "x_b_ddot"],
        }
    }

    pub fn single_params(&self, design: &[f64]) -> Option<SinglePendulumParams> {
        match *self {
            SystemModel::Single { g, mass, theta0 } => Some(SinglePendulumParams {
                g,
                length: design[0],
                mass,
                damping: design[1],
                theta0,
                omega0: design[2],
            }),
            _ => None,
        }
    }

    pub fn double_params(&self, design: &[f64]) -> Option<DoublePendulumParams> {
        match *self {
            SystemModel::Double {
                g,
                m1,
                m2,
                theta0_1,
                theta0_2,
            } => Some(DoublePendulumParams {
                g,
                l1: design[0],
                l2: design[1],
                m1,
                m2,
                theta0_1,
                theta0_2,
                omega0_1: design[2],
                omega0_2: design[3],
            }),
            _ => None,
        }
    }

    pub fn slider_params(&self, design: &[f64]) -> Option<SliderCrankParams> {
        match self {
            SystemModel::Slider => Some(SliderCrankParams {
                tau: design[0],
                crank: design[1],
                ratio: design[2],
            }),
            _ => None,
        }
    }

    /// Exact label rows at every instant of `grid` for one design point.
    /// Integration never steps further than [`MAX_STEP`]; coarser grids are
    /// reached by substepping.
    pub fn simulate(&self, design: &[f64], grid: &TimeGrid) -> Result<Trajectory> {
        let expected = self.design_names().len();
        if design.len() != expected {
            return Err(Error::shape(format!("{expected} design inputs"), design.len()));
        }
        match self {
            SystemModel::Single { .. } => {
                let p = self.single_params(design).expect("single");
                p.validate()?;
                integrate_substeps(&p, &p.initial_state(), grid, substeps(grid))
            }
            SystemModel::Double { .. } => {
                let p = self.double_params(design).expect("double");
                p.validate()?;
                let full = integrate_substeps(&p, &p.initial_state(), grid, substeps(grid))?;
                let mut out = Trajectory::with_capacity(4, full.len());
                for (t, row) in full.times.iter().zip(full.rows()) {
                    out.push(*t, &row[..4]);
                }
                Ok(out)
            }
            SystemModel::Slider => {
                let p = self.slider_params(design).expect("slider");
                p.validate()?;
                let mut out = Trajectory::with_capacity(7, grid.len());
                for i in 0..grid.len() {
                    let t = grid.time(i);
                    let k = slider_crank_kinematics(&p, t)?;
                    out.push(
                        t,
                        &[k.theta, k.phi, k.phi_dot, k.phi_ddot, k.x_b, k.x_b_dot, k.x_b_ddot],
                    );
                }
                Ok(out)
            }
        }
    }
}

/// Largest integration step used for the pendulum systems (seconds).
pub const MAX_STEP: f64 = 0.01;

fn substeps(grid: &TimeGrid) -> usize {
    ((grid.dt / MAX_STEP) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// A system together with its design ranges and time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub model: SystemModel,
    pub ranges: Vec<ParameterRange>,
    pub time: TimeGrid,
}

impl SystemSpec {
    /// `L in [0.1, 0.2]`, `c in [0, 0.15]`, `omega0 in [0, 5]`, 11 points each, `t in [0, 2]`.
    pub fn single_pendulum() -> Self {
        Self {
            model: SystemModel::single_pendulum(),
            ranges: vec![
                ParameterRange::new("L", 0.1, 0.2, 11),
                ParameterRange::new("c", 0.0, 0.15, 11),
                ParameterRange::new("omega0", 0.0, 5.0, 11),
            ],
            time: TimeGrid { dt: 0.01, steps: 200 },
        }
    }

    /// `L1 in [1, 2]`, `L2 in [2, 3]`, `omega0_1 in [0, 0.1]`, `omega0_2 in [0.3, 0.5]`, `t in [0, 5]`.
    pub fn double_pendulum() -> Self {
        Self {
            model: SystemModel::double_pendulum(),
            ranges: vec![
                ParameterRange::new("L1", 1.0, 2.0, 11),
                ParameterRange::new("L2", 2.0, 3.0, 11),
                ParameterRange::new("omega0_1", 0.0, 0.1, 11),
                ParameterRange::new("omega0_2", 0.3, 0.5, 11),
            ],
            time: TimeGrid { dt: 0.01, steps: 500 },
        }
    }

    /// `tau in [1, 2]`, `r in [1, 3]`, `L/r in [2.5, 3.5]`, `t in [0, 5]`.
    pub fn slider_crank() -> Self {
        Self {
            model: SystemModel::Slider,
            ranges: vec![
                ParameterRange::new("tau", 1.0, 2.0, 11),
                ParameterRange::new("r", 1.0, 3.0, 11),
                ParameterRange::new("L_over_r", 2.5, 3.5, 11),
            ],
            time: TimeGrid { dt: 0.01, steps: 500 },
        }
    }

    pub fn for_kind(kind: SystemKind) -> Self {
        match kind {
            SystemKind::Single => Self::single_pendulum(),
            SystemKind::Double => Self::double_pendulum(),
            SystemKind::Slider => Self::slider_crank(),
        }
    }

    pub fn kind(&self) -> SystemKind {
        self.model.kind()
    }

    /// Same ranges with every lattice count replaced by `count`.
    pub fn with_lattice_count(mut self, count: usize) -> Self {
        for r in &mut self.ranges {
            r.count = count;
        }
        self
    }

    pub fn with_time(mut self, time: TimeGrid) -> Self {
        self.time = time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.model.design_names();
        if self.ranges.len() != names.len() {
            return Err(Error::InvalidConfig(format!(
                "{} system needs {} ranges ({}), got {}",
                self.kind(),
                names.len(),
                names.join(", "),
                self.ranges.len()
            )));
        }
        for r in &self.ranges {
            r.validate()?;
        }
        // Every corner of the design box must be simulable.
        for corner in 0..(1usize << names.len()) {
            let design: Vec<f64> = self
                .ranges
                .iter()
                .enumerate()
                .map(|(i, r)| if corner >> i & 1 == 1 { r.hi } else { r.lo })
                .collect();
            match self.model {
                SystemModel::Single { .. } => self.model.single_params(&design).unwrap().validate()?,
                SystemModel::Double { .. } => self.model.double_params(&design).unwrap().validate()?,
                SystemModel::Slider => self.model.slider_params(&design).unwrap().validate()?,
            }
        }
        Ok(())
    }

    pub fn lattice_size(&self) -> usize {
        self.ranges.iter().map(|r| r.count).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_grids_match_fine_grid_states() {
        let model = SystemModel::single_pendulum();
        let design = [0.1, 0.15, 5.0];
        let fine = model.simulate(&design, &TimeGrid { dt: 0.01, steps: 200 }).unwrap();
        let coarse = model.simulate(&design, &TimeGrid { dt: 0.1, steps: 20 }).unwrap();
        for i in 0..=20 {
            for (a, b) in coarse.row(i).iter().zip(fine.row(10 * i)) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{i}: {a} vs {b}");
            }
        }
        assert_eq!(substeps(&TimeGrid { dt: 0.01, steps: 1 }), 1);
        assert_eq!(substeps(&TimeGrid { dt: 0.005, steps: 1 }), 1);
        assert_eq!(substeps(&TimeGrid { dt: 0.1, steps: 1 }), 10);
    }

    #[test]
    fn presets_are_valid() {
        for kind in [SystemKind::Single, SystemKind::Double, SystemKind::Slider] {
            let spec = SystemSpec::for_kind(kind);
            spec.validate().unwrap();
            assert_eq!(spec.kind(), kind);
            assert_eq!(spec.model.design_names().len(), spec.ranges.len());
        }
        assert_eq!(SystemSpec::single_pendulum().lattice_size(), 1331);
        assert_eq!(SystemSpec::double_pendulum().lattice_size(), 14_641);
        assert_eq!(SystemSpec::single_pendulum().time.len(), 201);
        assert_eq!(SystemSpec::slider_crank().time.len(), 501);
    }

    #[test]
    fn simulate_starts_from_initial_conditions() {
        let grid = TimeGrid { dt: 0.01, steps: 10 };
        let single = SystemModel::single_pendulum()
            .simulate(&[0.15, 0.05, 2.5], &grid)
            .unwrap();
        assert_eq!(&single.row(0)[..2], &[FRAC_PI_2, 2.5]);
        let double = SystemModel::double_pendulum()
            .simulate(&[1.5, 2.41, 0.03, 0.33], &grid)
            .unwrap();
        assert_eq!(double.row(0), &[1.6, 1.6, 0.03, 0.33]);
        assert_eq!(double.width, 4);
        let slider = SystemModel::Slider.simulate(&[1.78, 1.36, 3.05], &grid).unwrap();
        assert_eq!(slider.width, 7);
        assert_eq!(slider.len(), 11);
    }

    #[test]
    fn simulate_rejects_wrong_arity_and_bad_params() {
        let grid = TimeGrid { dt: 0.01, steps: 10 };
        assert!(SystemModel::Slider.simulate(&[1.0, 1.0], &grid).is_err());
        assert!(SystemModel::single_pendulum()
            .simulate(&[-0.1, 0.0, 0.0], &grid)
            .is_err());
    }

    #[test]
    fn validate_checks_range_count_and_corners() {
        let mut spec = SystemSpec::slider_crank();
        spec.ranges[2].lo = 0.5;
        assert!(spec.validate().is_err());
        let mut spec = SystemSpec::single_pendulum();
        spec.ranges.pop();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn kind_parses() {
        assert_eq!("double".parse::<SystemKind>().unwrap(), SystemKind::Double);
        assert!("triple".parse::<SystemKind>().is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn damped_single_pendulum_dissipates(l in 0.1f64..0.2, c in 1e-3f64..0.15, w in 0.0f64..5.0) {
            let model = SystemModel::single_pendulum();
            let p = model.single_params(&[l, c, w]).unwrap();
            let traj = model.simulate(&[l, c, w], &TimeGrid { dt: 0.01, steps: 200 }).unwrap();
            let e: Vec<f64> = traj.rows().map(|r| p.energy(r[0], r[1])).collect();
            for pair in e.windows(2) {
                proptest::prop_assert!(pair[1] - pair[0] <= 1e-8);
            }
        }

        #[test]
        fn double_pendulum_conserves_energy(
            l1 in 1.0f64..2.0, l2 in 2.0f64..3.0, w1 in 0.0f64..0.1, w2 in 0.3f64..0.5,
        ) {
            let spec = SystemSpec::double_pendulum();
            let design = [l1, l2, w1, w2];
            proptest::prop_assume!(spec.ranges.iter().zip(&design).all(|(r, &x)| r.contains(x)));
            let p = spec.model.double_params(&design).unwrap();
            let traj = spec.model.simulate(&design, &spec.time).unwrap();
            let e: Vec<f64> = traj.rows().map(|r| p.energy([r[0], r[1]], [r[2], r[3]])).collect();
            let drift = e.iter().map(|v| (v - e[0]).abs()).fold(0.0, f64::max) / e[0].abs();
            proptest::prop_assert!(drift <= 1e-4, "drift {}", drift);
        }
    }
}
