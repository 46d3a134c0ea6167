//! Rigid motions on SO(3) x R^3 and pose-error metrics.

#[allow(unused_imports)]
use num_traits::Float;

use crate::math::{Mat3, Quat, Vec3};

/// A proper rigid motion `p -> R p + t`.
///
/// Every construction path re-orthonormalizes the rotation, so poses
/// stay on SO(3) through long composition chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Mat3::IDENTITY,
            translation: Vec3::ZERO,
        }
    }

    /// Builds a pose, snapping the rotation back onto SO(3).
    pub fn from_parts(rotation: Mat3, translation: Vec3) -> Self {
        RigidTransform {
            rotation: rotation.orthonormalized(),
            translation,
        }
    }

    /// Rotation by `angle` about a unit `axis` through the point
    /// `center`, i.e. `p -> R (p - center) + center`.
    pub fn rotation_about(axis: Vec3, angle: f64, center: Vec3) -> Self {
        let rotation = Mat3::from_axis_angle(axis, angle);
        let translation = center - rotation.mul_vec(center);
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        RigidTransform {
            rotation: Mat3::IDENTITY,
            translation: t,
        }
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    /// Composition applying `other` first: `(self ∘ other)(p) =
    /// self(other(p))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::from_parts(
            self.rotation.mul_mat(&other.rotation),
            self.rotation.mul_vec(other.translation) + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::from_parts(rt, -rt.mul_vec(self.translation))
    }

    pub fn rotation_quaternion(&self) -> Quat {
        Quat::from_matrix(&self.rotation)
    }
}

/// Angle in degrees between two rotations:
/// `(180/pi) * arccos((trace(R_gt R_est^-1) - 1) / 2)`, with the arccos
/// argument clamped against floating-point overshoot. Result in
/// `[0, 180]`.
///
/// Evaluated through `atan2` of the skew part against the clamped
/// cosine; same function, but conditioned well enough near 0 and 180
/// degrees that equal rotations report (numerically) zero.
pub fn rotation_error_deg(r_gt: &RigidTransform, r_est: &RigidTransform) -> f64 {
    let rel = r_gt.rotation.mul_mat(&r_est.rotation.transpose());
    let r = &rel.rows;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin = 0.5
        * Vec3::new(
            r[2][1] - r[1][2],
            r[0][2] - r[2][0],
            r[1][0] - r[0][1],
        )
        .norm();
    sin.atan2(cos).to_degrees()
}

/// Euclidean distance between two translation vectors.
pub fn translation_error(t_gt: Vec3, t_est: Vec3) -> f64 {
    (t_gt - t_est).norm()
}
