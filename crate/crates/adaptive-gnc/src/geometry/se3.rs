//! Rigid-body transforms as rotation matrix plus translation, with the
//! exponential and logarithm maps of SE(3).
//!
//! Convention: a twist stacks the rotational part first, `xi = (phi, rho)`,
//! and pose updates compose on the left, `T <- exp(xi^) * T`.

use super::GeomError;
use nalgebra::{Matrix3, Vector3};

/// Element of SE(3): orthonormal rotation (det +1) and translation in
/// meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Element of se(3): rotation vector `phi` (radians) and translation part
/// `rho` (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub phi: Vector3<f64>,
    pub rho: Vector3<f64>,
}

impl Twist {
    pub fn new(phi: Vector3<f64>, rho: Vector3<f64>) -> Self {
        Twist { phi, rho }
    }

    pub fn zero() -> Self {
        Twist {
            phi: Vector3::zeros(),
            rho: Vector3::zeros(),
        }
    }
}

/// Skew-symmetric (cross-product) matrix of `v`.
pub(crate) fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build from parts, checking orthonormality to 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        let drift = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if drift > 1e-9 || rotation.determinant() <= 0.0 {
            return Err(GeomError::NotOrthonormal { drift });
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Frobenius distance of `R^T R` from the identity.
    pub fn orthonormality_drift(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    /// Snap the rotation back onto SO(3) via SVD (`R <- U V^T` with a
    /// determinant fix). Called after every solver update so drift never
    /// accumulates.
    pub fn reorthonormalize(&mut self) {
        let svd = self.rotation.svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u_fixed = u;
            u_fixed.column_mut(2).neg_mut();
            r = u_fixed * v_t;
        }
        self.rotation = r;
    }
}

/// Exponential map of SE(3): Rodrigues rotation plus the left Jacobian
/// acting on the translation part.
pub fn se3_exp(xi: &Twist) -> Pose {
    let theta = xi.phi.norm();
    let phi_hat = hat(&xi.phi);
    let phi_hat2 = phi_hat * phi_hat;

    let (sin_c, one_minus_cos_c, jac_c) = if theta < 1e-6 {
        // Taylor expansions of sin(t)/t, (1-cos t)/t^2, (t - sin t)/t^3.
        let t2 = theta * theta;
        (
            1.0 - t2 / 6.0,
            0.5 - t2 / 24.0,
            1.0 / 6.0 - t2 / 120.0,
        )
    } else {
        let t2 = theta * theta;
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / t2,
            (theta - theta.sin()) / (t2 * theta),
        )
    };

    let rotation = Matrix3::identity() + phi_hat * sin_c + phi_hat2 * one_minus_cos_c;
    let left_jacobian = Matrix3::identity() + phi_hat * one_minus_cos_c + phi_hat2 * jac_c;
    Pose {
        rotation,
        translation: left_jacobian * xi.rho,
    }
}

/// Logarithm map of SE(3). Errors when the rotation angle is within 1e-6
/// of pi, where the axis is not unique.
pub fn se3_log(pose: &Pose) -> Result<Twist, GeomError> {
    let theta = pose.angle();
    if theta > std::f64::consts::PI - 1e-6 {
        return Err(GeomError::AngleAtPi);
    }
    let skew = (pose.rotation - pose.rotation.transpose()) * 0.5;
    let axis_vec = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
    // axis_vec = sin(theta) * axis; phi = theta * axis.
    let phi = if theta < 1e-6 {
        // sin(t)/t ~ 1 - t^2/6
        axis_vec * (1.0 + theta * theta / 6.0)
    } else {
        axis_vec * (theta / theta.sin())
    };

    let phi_hat = hat(&phi);
    let phi_hat2 = phi_hat * phi_hat;
    let inv_jac = if theta < 1e-6 {
        Matrix3::identity() - phi_hat * 0.5 + phi_hat2 * (1.0 / 12.0)
    } else {
        let coeff =
            (1.0 / (theta * theta)) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
        Matrix3::identity() - phi_hat * 0.5 + phi_hat2 * coeff
    };
    Ok(Twist {
        phi,
        rho: inv_jac * pose.translation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn exp_of_zero_is_identity() {
        let pose = se3_exp(&Twist::zero());
        assert_relative_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-15);
        assert_relative_eq!(pose.translation, Vector3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_about_z() {
        let xi = Twist::new(
            Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            Vector3::zeros(),
        );
        let pose = se3_exp(&xi);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(pose.rotation, expected, epsilon = 1e-12);
    }

    #[test]
    fn exp_log_round_trip_over_random_twists() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let phi_dir = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            )
            .normalize();
            let phi = phi_dir * (rng.random::<f64>() * 3.0);
            let rho = Vector3::new(
                4.0 * (rng.random::<f64>() - 0.5),
                4.0 * (rng.random::<f64>() - 0.5),
                4.0 * (rng.random::<f64>() - 0.5),
            );
            let xi = Twist::new(phi, rho);
            let back = se3_log(&se3_exp(&xi)).unwrap();
            assert!(
                (back.phi - xi.phi).norm() < 1e-9,
                "phi {:?} vs {:?}",
                back.phi,
                xi.phi
            );
            assert!(
                (back.rho - xi.rho).norm() < 1e-9,
                "rho {:?} vs {:?}",
                back.rho,
                xi.rho
            );
        }
    }

    #[test]
    fn log_exp_round_trip_pose_metric() {
        let xi = Twist::new(Vector3::new(0.3, -0.8, 1.1), Vector3::new(2.0, 0.5, -1.0));
        let pose = se3_exp(&xi);
        let again = se3_exp(&se3_log(&pose).unwrap());
        assert!((again.rotation - pose.rotation).norm() < 1e-9);
        assert!((again.translation - pose.translation).norm() < 1e-9);
    }

    #[test]
    fn log_rejects_angle_at_pi() {
        let xi = Twist::new(
            Vector3::new(std::f64::consts::PI, 0.0, 0.0),
            Vector3::zeros(),
        );
        let pose = se3_exp(&xi);
        assert!(matches!(se3_log(&pose), Err(GeomError::AngleAtPi)));
    }

    #[test]
    fn compose_inverse_is_identity() {
        let pose = se3_exp(&Twist::new(
            Vector3::new(0.1, 0.2, -0.3),
            Vector3::new(1.0, -2.0, 0.5),
        ));
        let eye = pose.compose(&pose.inverse());
        assert!((eye.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(eye.translation.norm() < 1e-12);
    }

    #[test]
    fn reorthonormalize_removes_drift() {
        let mut pose = se3_exp(&Twist::new(
            Vector3::new(0.4, -0.1, 0.9),
            Vector3::zeros(),
        ));
        // Inject drift well above the invariant threshold.
        pose.rotation[(0, 0)] += 1e-6;
        assert!(pose.orthonormality_drift() > 1e-9);
        pose.reorthonormalize();
        assert!(pose.orthonormality_drift() < 1e-12);
        assert!(pose.rotation.determinant() > 0.0);
    }

    #[test]
    fn pose_new_validates_rotation() {
        let mut bad = Matrix3::identity();
        bad[(0, 1)] = 0.01;
        assert!(matches!(
            Pose::new(bad, Vector3::zeros()),
            Err(GeomError::NotOrthonormal { .. })
        ));
        assert!(Pose::new(Matrix3::identity(), Vector3::zeros()).is_ok());
    }
}
