//! Rigid transformations in SE(3).

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Tolerance used when validating a user supplied rotation matrix.
pub const ROTATION_TOL: f64 = 1e-10;

/// A proper rigid motion `x ↦ R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a transform from a raw 3×3 matrix, rejecting anything that is not
    /// in SO(3) to within [`ROTATION_TOL`].
    pub fn from_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if !ortho.is_finite() || ortho > ROTATION_TOL {
            return Err(Error::InvalidInput("rotation matrix is not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidInput("rotation matrix has determinant != 1"));
        }
        Ok(Self::new(
            Rotation3::from_matrix_unchecked(rotation),
            translation,
        ))
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// Unit quaternion `[w, x, y, z]` with `w >= 0`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&self.rotation);
        let q = q.quaternion();
        let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
        [sign * q.w, sign * q.i, sign * q.j, sign * q.k]
    }
}

/// Geodesic angle (radians) of a rotation, accurate near zero.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    // atan2 of the skew and symmetric parts avoids the acos loss of precision
    // for small angles.
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = 0.5 * skew.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    libm::atan2(sin, cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::new(
            Rotation3::from_euler_angles(0.3, -0.2, 1.1),
            Vector3::new(1.0, -2.0, 3.0),
        );
        let id = t.compose(&t.inverse());
        assert_relative_eq!(*id.rotation_matrix(), Matrix3::identity(), epsilon = 1e-14);
        assert_relative_eq!(*id.translation(), Vector3::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn quaternion_has_nonnegative_scalar() {
        let t = RigidTransform::from_rotation(Rotation3::from_axis_angle(&Vector3::z_axis(), 3.0));
        let q = t.quaternion_wxyz();
        assert!(q[0] >= 0.0);
        let t = RigidTransform::from_rotation(Rotation3::from_axis_angle(&Vector3::z_axis(), -3.0));
        assert!(t.quaternion_wxyz()[0] >= 0.0);
    }

    #[test]
    fn rejects_reflections() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::from_matrix(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn small_rotation_angles_are_exact() {
        let r = Rotation3::from_axis_angle(&Vector3::x_axis(), 1e-9);
        assert_relative_eq!(rotation_angle(r.matrix()), 1e-9, max_relative = 1e-6);
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2);
        assert_relative_eq!(rotation_angle(r.matrix()), FRAC_PI_2, epsilon = 1e-14);
    }
}
