use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slider crank driven by a prescribed crank acceleration `sin(tau t)`,
/// starting at rest with the crank aligned with the slider axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderCrankParams {
    pub tau: f64,
    pub crank: f64,
    /// Connecting-rod length over crank length.
    pub ratio: f64,
}

impl SliderCrankParams {
    pub fn rod(&self) -> f64 {
        self.ratio * self.crank
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau == 0.0 || !self.tau.is_finite() {
            return Err(Error::InvalidParameter("slider crank requires tau != 0".into()));
        }
        if !(self.crank > 0.0) || !(self.ratio > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "slider crank requires r > 0 and L/r > 1 (got r = {}, L/r = {})",
                self.crank, self.ratio
            )));
        }
        Ok(())
    }

    /// Crank angle, rate and acceleration in closed form.
    pub fn crank_motion(&self, t: f64) -> (f64, f64, f64) {
        let tau = self.tau;
        let (s, c) = (tau * t).sin_cos();
        (-s / (tau * tau) + t / tau, (1.0 - c) / tau, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicOutputs {
    pub theta: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub phi_ddot: f64,
    pub x_b: f64,
    pub x_b_dot: f64,
    pub x_b_ddot: f64,
}

/// Solves `[L sin(phi), 1; -L cos(phi), 0] [a; b] = rhs`.
fn solve_loop_jacobian(rod: f64, sin_phi: f64, cos_phi: f64, rhs: [f64; 2]) -> (f64, f64) {
    // det = L cos(phi), nonzero whenever |phi| < pi/2.
    let a = -rhs[1] / (rod * cos_phi);
    let b = rhs[0] - rod * sin_phi * a;
    (a, b)
}

pub fn slider_crank_kinematics(params: &SliderCrankParams, t: f64) -> Result<KinematicOutputs> {
    let (r, rod) = (params.crank, params.rod());
    let (theta, theta_dot, theta_ddot) = params.crank_motion(t);
    let (sin_t, cos_t) = theta.sin_cos();

    let arg = -(r / rod) * sin_t;
    if !(arg.abs() < 1.0) {
        return Err(Error::DomainError(format!(
            "|(r/L) sin(theta)| = {} >= 1 at t = {t}",
            arg.abs()
        )));
    }
    let phi = arg.asin();
    let (sin_p, cos_p) = phi.sin_cos();
    let x_b = r * cos_t + rod * cos_p;

    let (phi_dot, x_b_dot) = solve_loop_jacobian(rod, sin_p, cos_p, [-r * theta_dot * sin_t, r * theta_dot * cos_t]);

    let w2 = theta_dot * theta_dot;
    let rhs = [
        -rod * phi_dot * cos_p * phi_dot - r * w2 * cos_t - r * theta_ddot * sin_t,
        -rod * phi_dot * sin_p * phi_dot - r * w2 * sin_t + r * theta_ddot * cos_t,
    ];
    let (phi_ddot, x_b_ddot) = solve_loop_jacobian(rod, sin_p, cos_p, rhs);

    Ok(KinematicOutputs {
        theta,
        theta_dot,
        theta_ddot,
        phi,
        phi_dot,
        phi_ddot,
        x_b,
        x_b_dot,
        x_b_ddot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params(tau: f64, crank: f64, ratio: f64) -> SliderCrankParams {
        SliderCrankParams { tau, crank, ratio }
    }

    #[test]
    fn initial_configuration_is_at_rest() {
        let p = params(1.78, 1.36, 3.05);
        let k = slider_crank_kinematics(&p, 0.0).unwrap();
        assert_eq!((k.theta, k.theta_dot, k.theta_ddot), (0.0, 0.0, 0.0));
        assert_eq!(k.phi, 0.0);
        assert!((k.x_b - (1.36 + 1.36 * 3.05)).abs() < 1e-14);
        for v in [k.phi_dot, k.phi_ddot, k.x_b_dot, k.x_b_ddot] {
            assert_eq!(v.abs(), 0.0);
        }
    }

    #[test]
    fn closed_form_reference_point() {
        // 40-digit evaluation of the closed forms at tau = 1, r = 1, L/r = 3, t = pi/2.
        let k = slider_crank_kinematics(&params(1.0, 1.0, 3.0), FRAC_PI_2).unwrap();
        assert!((k.theta - 0.570_796_326_794_896_6).abs() < 1e-14);
        assert!((k.phi - (-0.181_088_894_052_223_2)).abs() < 1e-14);
        assert!((k.x_b - 3.792_415_480_774_158).abs() < 1e-13);
    }

    #[test]
    fn loop_closure_holds() {
        let p = params(1.3, 2.2, 2.7);
        for i in 0..500 {
            let t = i as f64 * 0.01;
            let k = slider_crank_kinematics(&p, t).unwrap();
            let rod = p.rod();
            assert!((p.crank * k.theta.sin() + rod * k.phi.sin()).abs() < 1e-12);
            assert!((k.x_b - (p.crank * k.theta.cos() + rod * k.phi.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn velocities_match_central_differences() {
        let p = params(1.9, 1.1, 2.5);
        let h = 1e-5;
        for t in [0.3, 1.7, 3.2, 4.9] {
            let k = slider_crank_kinematics(&p, t).unwrap();
            let kp = slider_crank_kinematics(&p, t + h).unwrap();
            let km = slider_crank_kinematics(&p, t - h).unwrap();
            let d = |f: fn(&KinematicOutputs) -> f64| (f(&kp) - f(&km)) / (2.0 * h);
            assert!((k.theta_dot - d(|k| k.theta)).abs() < 1e-7);
            assert!((k.phi_dot - d(|k| k.phi)).abs() < 1e-7);
            assert!((k.x_b_dot - d(|k| k.x_b)).abs() < 1e-7);
            assert!((k.phi_ddot - d(|k| k.phi_dot)).abs() < 1e-6);
            assert!((k.x_b_ddot - d(|k| k.x_b_dot)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_invalid_geometry() {
        assert!(params(0.0, 1.0, 3.0).validate().is_err());
        assert!(params(1.0, 1.0, 0.9).validate().is_err());
        assert!(params(1.0, -1.0, 3.0).validate().is_err());
        // Ratio below one makes asin undefined somewhere along the motion.
        let bad = params(1.0, 1.0, 0.5);
        let err = (0..400)
            .map(|i| slider_crank_kinematics(&bad, i as f64 * 0.01))
            .find_map(|r| r.err());
        assert!(matches!(err, Some(Error::DomainError(_))));
    }
}
