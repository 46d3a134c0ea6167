//! The physics core: softened inverse-square attraction between the
//! template and the reference, its aggregation into a gravitational
//! vector and a rotational torque, the system potential energy, and
//! the robust per-pair residual.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::nn::NnIndex;
use crate::NEAR_ZERO;

/// Field parameters: softening length and global strength constant.
///
/// Per-point weights on the clouds act as particle masses; `strength`
/// scales every pair interaction uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceParams {
    /// Softening length epsilon (normalized units). Bounds the force by
    /// `strength / softening^2` and removes the zero-distance
    /// singularity.
    pub softening: f64,
    /// Global weight constant K.
    pub strength: f64,
}

impl Default for ForceParams {
    fn default() -> Self {
        // The softening sets the resolution of the coarse field. 0.05
        // of the unit diagonal keeps the field smooth at the sample
        // sizes the pipeline feeds the solver (one to two hundred
        // points); much smaller values make the sparse field spiky and
        // the step-halving walk freeze early.
        ForceParams {
            softening: 0.05,
            strength: 1.0,
        }
    }
}

impl ForceParams {
    pub fn validate(&self) -> Result<()> {
        if !self.softening.is_finite() || self.softening <= 0.0 {
            return Err(Error::Config("softening must be positive"));
        }
        if !self.strength.is_finite() || self.strength <= 0.0 {
            return Err(Error::Config("strength must be positive"));
        }
        Ok(())
    }

    fn softening_sq(&self) -> f64 {
        self.softening * self.softening
    }
}

/// Force field summary for one pose of the template.
#[derive(Debug, Clone)]
pub struct ForceState {
    /// Attractive force on each template point.
    pub per_point_forces: Vec<Vec3>,
    /// Sum of the radial force components along the center-to-point
    /// directions; drives translation.
    pub gravitational_vector: Vec3,
    /// Sum of the moments of the tangential force components; drives
    /// rotation.
    pub torque: Vec3,
    /// All-pairs softened potential energy (always <= 0).
    pub potential_energy: f64,
    /// Nearest-correspondence robust energy (always <= 0).
    pub p2_energy: f64,
}

/// Total attraction exerted on one template point by the whole
/// reference cloud:
/// `F = sum_j w_j K / (|y_j - x|^2 + eps^2) * u_j`
/// with `u_j` the unit vector from `x` toward `y_j`. Coincident pairs
/// contribute nothing (their direction is undefined).
pub fn point_force(template_point: Point3, reference: &PointCloud, params: &ForceParams) -> Vec3 {
    let eps_sq = params.softening_sq();
    let mut force = Vec3::ZERO;
    for (j, &y) in reference.points().iter().enumerate() {
        let delta = y - template_point;
        let d_sq = delta.norm_squared();
        let d = d_sq.sqrt();
        if d < NEAR_ZERO {
            continue;
        }
        let magnitude = reference.weight(j) * params.strength / (d_sq + eps_sq);
        force += delta * (magnitude / d);
    }
    force
}

/// Evaluates the whole field at one pose: per-point forces, the
/// gravitational vector `S`, the torque `T` (both reduced about
/// `center`), the all-pairs potential energy and the
/// nearest-correspondence energy.
///
/// Builds a fresh nearest-neighbor index over the reference; loops that
/// evaluate many poses against a fixed reference should build the index
/// once and call [`system_state_with_index`].
pub fn system_state(
    template: &PointCloud,
    reference: &PointCloud,
    center: Point3,
    params: &ForceParams,
) -> Result<ForceState> {
    let index = NnIndex::build(reference);
    system_state_with_index(template, reference, &index, center, params)
}

/// [`system_state`] against a prebuilt reference index.
pub fn system_state_with_index(
    template: &PointCloud,
    reference: &PointCloud,
    index: &NnIndex,
    center: Point3,
    params: &ForceParams,
) -> Result<ForceState> {
    params.validate()?;
    let eps_sq = params.softening_sq();
    let k = params.strength;

    let mut per_point_forces = Vec::with_capacity(template.len());
    let mut potential_energy = 0.0;
    for (i, &x) in template.points().iter().enumerate() {
        let w_i = template.weight(i);
        let mut force = Vec3::ZERO;
        for (j, &y) in reference.points().iter().enumerate() {
            let w_j = reference.weight(j);
            let delta = y - x;
            let d_sq = delta.norm_squared();
            let inv = k / (d_sq + eps_sq);
            potential_energy -= w_i * w_j * inv;
            let d = d_sq.sqrt();
            if d < NEAR_ZERO {
                continue;
            }
            force += delta * (w_j * inv / d);
        }
        per_point_forces.push(force);
    }

    let mut gravitational_vector = Vec3::ZERO;
    let mut torque = Vec3::ZERO;
    let mut any_lever = false;
    for (i, &x) in template.points().iter().enumerate() {
        let lever = x - center;
        let Some(v) = lever.normalized(NEAR_ZERO) else {
            continue;
        };
        any_lever = true;
        let f = per_point_forces[i];
        let radial = v * f.dot(v);
        gravitational_vector += radial;
        torque += v.cross(f - radial);
    }
    if !any_lever {
        return Err(Error::DegenerateCenter);
    }

    let mut p2_energy = 0.0;
    for &x in template.points() {
        let (_, d_sq) = index.nearest(x);
        p2_energy -= k / (d_sq + eps_sq);
    }

    Ok(ForceState {
        per_point_forces,
        gravitational_vector,
        torque,
        potential_energy,
        p2_energy,
    })
}

/// Robust per-pair residual `-K / (d^2 + eps^2)`: bounded below by
/// `-K/eps^2`, strictly increasing in distance, and vanishing for far
/// (outlier) pairs.
pub fn p2_residual(pair_distance_sq: f64, params: &ForceParams) -> f64 {
    -params.strength / (pair_distance_sq + params.softening_sq())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(eps: f64, k: f64) -> ForceParams {
        ForceParams {
            softening: eps,
            strength: k,
        }
    }

    #[test]
    fn single_pair_closed_form() {
        // one reference point at distance d along +x, K=1, w=1
        let d = 0.7;
        let reference = PointCloud::new(vec![Vec3::new(d, 0.0, 0.0)]).unwrap();
        let p = params(0.01, 1.0);
        let f = point_force(Vec3::ZERO, &reference, &p);
        let expected = 1.0 / (d * d + 0.01 * 0.01);
        assert!((f.x - expected).abs() < 1e-15);
        assert_eq!((f.y, f.z), (0.0, 0.0));
    }

    #[test]
    fn midpoint_between_two_references_feels_nothing() {
        let reference = PointCloud::new(vec![
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ])
        .unwrap();
        let f = point_force(Vec3::ZERO, &reference, &ForceParams::default());
        assert!(f.norm() < 1e-15);
    }

    #[test]
    fn coincident_pair_contributes_zero() {
        let x = Vec3::new(0.25, 0.5, 0.75);
        let reference = PointCloud::new(vec![x, Vec3::new(1.25, 0.5, 0.75)]).unwrap();
        let p = params(0.1, 1.0);
        let f = point_force(x, &reference, &p);
        // only the non-coincident point pulls
        assert!((f.x - 1.0 / (1.0 + 0.01)).abs() < 1e-12);
        // magnitude stays below the softening bound in any case
        assert!(f.norm() <= p.strength / (p.softening * p.softening));
    }

    #[test]
    fn p2_residual_bounds_and_hand_value() {
        let p = params(0.1, 1.0);
        assert!((p2_residual(0.0, &p) - (-1.0 / 0.01)).abs() < 1e-12);
        // vanishing tail: distance 1e6 (squared 1e12)
        assert!(p2_residual(1e12, &p).abs() < 1.0 / 1e12 + 1e-24);
        // K=1, eps=0.1, distance 1
        assert!((p2_residual(1.0, &p) - (-1.0 / 1.01)).abs() < 1e-12);
    }

    #[test]
    fn single_point_system_projects_by_cosine() {
        // one template point, one reference point at distance d, center
        // offset from the template point: |S| = K/(d^2+eps^2) * |cos|
        let d = 2.0;
        let template = PointCloud::new(vec![Vec3::ZERO]).unwrap();
        let reference = PointCloud::new(vec![Vec3::new(d, 0.0, 0.0)]).unwrap();
        let p = params(0.01, 1.0);
        let center = Vec3::new(0.5, 1.0, 0.0);
        let state = system_state(&template, &reference, center, &p).unwrap();
        let force_mag = 1.0 / (d * d + 0.01 * 0.01);
        let v = (Vec3::ZERO - center).normalized(0.0).unwrap();
        let cos = state.per_point_forces[0].dot(v) / state.per_point_forces[0].norm();
        assert!(
            (state.gravitational_vector.norm() - force_mag * cos.abs()).abs() < 1e-12
        );
    }

    #[test]
    fn single_pair_gravitational_vector_projection() {
        // template point at origin, center offset along +y, reference at
        // distance d along +x: S = (F.v)v with v = -y_hat.
        let d = 2.0;
        let template = PointCloud::new(vec![Vec3::ZERO, Vec3::new(0.0, 2.0, 0.0)]).unwrap();
        let reference = PointCloud::new(vec![Vec3::new(d, 0.0, 0.0)]).unwrap();
        let p = params(0.01, 1.0);
        let center = Vec3::new(0.0, 1.0, 0.0);
        let state = system_state(&template, &reference, center, &p).unwrap();

        // hand computation for the first template point
        let f0 = state.per_point_forces[0];
        let v0 = Vec3::new(0.0, -1.0, 0.0);
        let expected0 = v0 * f0.dot(v0);
        // and the second
        let f1 = state.per_point_forces[1];
        let v1 = Vec3::new(0.0, 1.0, 0.0);
        let expected1 = v1 * f1.dot(v1);
        assert!((state.gravitational_vector - (expected0 + expected1)).norm() < 1e-12);

        // |S_i| = |F| * |cos(theta)| per point
        let cos0 = f0.dot(v0) / f0.norm();
        assert!((expected0.norm() - f0.norm() * cos0.abs()).abs() < 1e-12);
    }

    #[test]
    fn all_points_on_center_is_degenerate() {
        let x = Vec3::new(1.0, 2.0, 3.0);
        let template = PointCloud::new(vec![x, x]).unwrap();
        let reference = PointCloud::new(vec![Vec3::ZERO]).unwrap();
        let err = system_state(&template, &reference, x, &ForceParams::default()).unwrap_err();
        assert_eq!(err, Error::DegenerateCenter);
    }

    #[test]
    fn energies_are_nonpositive() {
        let template = PointCloud::new(vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        let reference = PointCloud::new(vec![Vec3::new(0.3, 0.2, 0.1)]).unwrap();
        let state = system_state(
            &template,
            &reference,
            template.centroid(),
            &ForceParams::default(),
        )
        .unwrap();
        assert!(state.potential_energy <= 0.0);
        assert!(state.p2_energy <= 0.0);
    }
}
