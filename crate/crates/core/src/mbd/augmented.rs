//! Constrained equations of motion in augmented (Lagrange multiplier) form,
//! and their reduction to independent coordinates by embedding.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the Schur complement `Cq M^-1 Cq^T`.
const RANK_TOL: f64 = 1e-12;
/// Tolerance on `T^T Cq^T` relative to `|T| |Cq|`.
const EMBEDDING_TOL: f64 = 1e-10;

/// `[M Cq^T; Cq 0] [qddot; lambda] = [Fa; Fc]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub mass: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
    pub applied: DVector<f64>,
    pub constraint_rhs: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSolution {
    pub qddot: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl AugmentedSystem {
    pub fn coordinates(&self) -> usize {
        self.mass.nrows()
    }

    pub fn constraints(&self) -> usize {
        self.jacobian.nrows()
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.coordinates();
        let m = self.constraints();
        if self.mass.ncols() != n
            || (m > 0 && self.jacobian.ncols() != n)
            || self.applied.len() != n
            || self.constraint_rhs.len() != m
        {
            return Err(Error::shape(
                format!("M {n}x{n}, Cq {m}x{n}, Fa {n}, Fc {m}"),
                format!(
                    "M {}x{}, Cq {}x{}, Fa {}, Fc {}",
                    self.mass.nrows(),
                    self.mass.ncols(),
                    self.jacobian.nrows(),
                    self.jacobian.ncols(),
                    self.applied.len(),
                    self.constraint_rhs.len()
                ),
            ));
        }
        let asym = (&self.mass - self.mass.transpose()).amax();
        if asym > 1e-12 * self.mass.amax().max(1.0) {
            return Err(Error::InvalidParameter("mass matrix is not symmetric".into()));
        }
        Ok(())
    }

    /// Residual of the saddle-point system, relative to the right-hand side.
    pub fn relative_residual(&self, sol: &AugmentedSolution) -> f64 {
        let r1 = &self.mass * &sol.qddot + self.jacobian.transpose() * &sol.lambda - &self.applied;
        let r2 = &self.jacobian * &sol.qddot - &self.constraint_rhs;
        let num = (r1.norm_squared() + r2.norm_squared()).sqrt();
        let den = (self.applied.norm_squared() + self.constraint_rhs.norm_squared()).sqrt();
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// Solves the full saddle-point system with a partially pivoted LU.
pub fn solve_augmented(sys: &AugmentedSystem) -> Result<AugmentedSolution> {
    sys.check_shapes()?;
    let n = sys.coordinates();
    let m = sys.constraints();

    let chol = sys
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("mass matrix is not positive definite".into()))?;

    if m > 0 {
        let minv_ct = chol.solve(&sys.jacobian.transpose());
        let schur = &sys.jacobian * minv_ct;
        let eig = schur.symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
        if !(lo > RANK_TOL * hi.max(f64::MIN_POSITIVE)) {
            return Err(Error::RankDeficientConstraint { pivot: lo });
        }
    }

    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&sys.mass);
    if m > 0 {
        kkt.view_mut((0, n), (n, m)).copy_from(&sys.jacobian.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&sys.jacobian);
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&sys.applied);
    rhs.rows_mut(n, m).copy_from(&sys.constraint_rhs);

    let x = kkt
        .lu()
        .solve(&rhs)
        .ok_or(Error::RankDeficientConstraint { pivot: 0.0 })?;
    Ok(AugmentedSolution {
        qddot: x.rows(0, n).into_owned(),
        lambda: x.rows(n, m).into_owned(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSolution {
    pub qddot_ind: DVector<f64>,
    /// Reconstructed `T qddot_ind + r`.
    pub qddot: DVector<f64>,
}

/// Reduces the augmented system with `qddot = T qddot_ind + r` and solves
/// `T^T M T qddot_ind = T^T Fa - T^T M r`.
pub fn embed_reduce(
    sys: &AugmentedSystem,
    transform: &DMatrix<f64>,
    remainder: &DVector<f64>,
) -> Result<EmbeddedSolution> {
    sys.check_shapes()?;
    let n = sys.coordinates();
    if transform.nrows() != n || remainder.len() != n {
        return Err(Error::shape(
            format!("T with {n} rows, r of length {n}"),
            format!("T {}x{}, r {}", transform.nrows(), transform.ncols(), remainder.len()),
        ));
    }

    if sys.constraints() > 0 {
        let identity = transform.transpose() * sys.jacobian.transpose();
        let scale = (transform.norm() * sys.jacobian.norm()).max(1.0);
        let norm = identity.norm();
        if norm > EMBEDDING_TOL * scale {
            return Err(Error::IdentityViolation { norm });
        }
    }

    let tt = transform.transpose();
    let reduced_mass = &tt * &sys.mass * transform;
    let reduced_force = &tt * &sys.applied - &tt * (&sys.mass * remainder);
    let qddot_ind = reduced_mass
        .cholesky()
        .ok_or(Error::SingularReducedMass)?
        .solve(&reduced_force);
    let qddot = transform * &qddot_ind + remainder;
    Ok(EmbeddedSolution { qddot_ind, qddot })
}

/// Planar point-mass pendulum in Cartesian coordinates `q = (x, y)` with
/// `x = L sin(theta)`, `y = -L cos(theta)` and constraint
/// `C = (x^2 + y^2 - L^2) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianPendulum {
    pub mass: f64,
    pub g: f64,
    pub length: f64,
}

impl CartesianPendulum {
    pub fn position(&self, theta: f64) -> [f64; 2] {
        [self.length * theta.sin(), -self.length * theta.cos()]
    }

    pub fn velocity(&self, theta: f64, omega: f64) -> [f64; 2] {
        [self.length * theta.cos() * omega, self.length * theta.sin() * omega]
    }

    pub fn augmented(&self, theta: f64, omega: f64) -> AugmentedSystem {
        let [x, y] = self.position(theta);
        let [vx, vy] = self.velocity(theta, omega);
        AugmentedSystem {
            mass: DMatrix::from_diagonal_element(2, 2, self.mass),
            jacobian: DMatrix::from_row_slice(1, 2, &[x, y]),
            applied: DVector::from_column_slice(&[0.0, -self.mass * self.g]),
            constraint_rhs: DVector::from_element(1, -(vx * vx + vy * vy)),
        }
    }

    /// `T = dq/dtheta` and the velocity-dependent remainder `r`.
    pub fn embedding(&self, theta: f64, omega: f64) -> (DMatrix<f64>, DVector<f64>) {
        let (s, c) = theta.sin_cos();
        let l = self.length;
        (
            DMatrix::from_column_slice(2, 1, &[l * c, l * s]),
            DVector::from_column_slice(&[-l * s * omega * omega, l * c * omega * omega]),
        )
    }

    /// Cartesian acceleration for a given angular acceleration.
    pub fn map_acceleration(&self, theta: f64, omega: f64, alpha: f64) -> [f64; 2] {
        let (s, c) = theta.sin_cos();
        let l = self.length;
        [l * (c * alpha - s * omega * omega), l * (s * alpha + c * omega * omega)]
    }
}
