//! Point clouds, correspondences and unit normalization.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::transform::RigidTransform;

/// Points are plain 3-vectors; the alias marks positional use.
pub type Point3 = Vec3;

/// An ordered set of 3D points with optional per-point positive
/// weights (particle masses). Weights default to 1 when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    /// Builds an unweighted cloud. Fails on empty input or non-finite
    /// coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        Self::with_weights(points, None)
    }

    /// Builds a cloud with optional weights. Weights must match the
    /// point count and be finite and strictly positive.
    pub fn with_weights(points: Vec<Point3>, weights: Option<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidCloud("empty point set"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidCloud("non-finite coordinate"));
        }
        if let Some(w) = &weights {
            if w.len() != points.len() {
                return Err(Error::InvalidCloud("weight count differs from point count"));
            }
            if w.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(Error::InvalidCloud("weights must be finite and positive"));
            }
        }
        Ok(PointCloud { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty clouds
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of point `i`, defaulting to 1.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights
            .as_ref()
            .map_or(self.points.len() as f64, |w| w.iter().sum())
    }

    /// Weighted mean of the points, with weights acting as masses.
    pub fn centroid(&self) -> Point3 {
        let mut sum = Vec3::ZERO;
        for (i, p) in self.points.iter().enumerate() {
            sum += *p * self.weight(i);
        }
        sum * (1.0 / self.total_weight())
    }

    /// Axis-aligned bounding box as `(min, max)` corners.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            lo.z = lo.z.min(p.z);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
            hi.z = hi.z.max(p.z);
        }
        (lo, hi)
    }

    /// Length of the bounding-box diagonal.
    pub fn bounding_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Returns the cloud with `pose` applied to every point; weights
    /// are copied unchanged.
    pub fn transformed(&self, pose: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|&p| pose.apply(p)).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Subset of the cloud by point indices; weights follow.
    pub(crate) fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }
}

/// Applies a rigid transform to a whole cloud.
pub fn apply_transform(cloud: &PointCloud, pose: &RigidTransform) -> PointCloud {
    cloud.transformed(pose)
}

/// A matched pair of points: template index, reference index and their
/// squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub template_index: usize,
    pub reference_index: usize,
    pub squared_distance: f64,
}

/// The shift and scale that mapped a cloud pair into normalized units
/// (reference centroid at the origin, reference bounding diagonal 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationRecord {
    pub centroid: Point3,
    pub diagonal: f64,
}

impl NormalizationRecord {
    pub fn normalize_point(&self, p: Point3) -> Point3 {
        (p - self.centroid) * (1.0 / self.diagonal)
    }

    pub fn denormalize_point(&self, p: Point3) -> Point3 {
        p * self.diagonal + self.centroid
    }

    /// Maps a pose acting on normalized clouds to the equivalent pose
    /// in original units. The rotation part is untouched.
    pub fn denormalize_pose(&self, pose: &RigidTransform) -> RigidTransform {
        let c = self.centroid;
        RigidTransform {
            rotation: pose.rotation,
            translation: pose.translation * self.diagonal + c - pose.rotation.mul_vec(c),
        }
    }

    /// Inverse of [`denormalize_pose`](Self::denormalize_pose).
    pub fn normalize_pose(&self, pose: &RigidTransform) -> RigidTransform {
        let c = self.centroid;
        RigidTransform {
            rotation: pose.rotation,
            translation: (pose.translation + pose.rotation.mul_vec(c) - c)
                * (1.0 / self.diagonal),
        }
    }
}

/// Shifts both clouds by the reference centroid and scales by the
/// reference bounding-box diagonal, so that step sizes, softening and
/// noise levels are dimensionless.
pub fn normalize_clouds(
    template: &PointCloud,
    reference: &PointCloud,
) -> Result<(PointCloud, PointCloud, NormalizationRecord)> {
    let record = NormalizationRecord {
        centroid: reference.centroid(),
        diagonal: reference.bounding_diagonal(),
    };
    if record.diagonal <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let map = |c: &PointCloud| PointCloud {
        points: c.points.iter().map(|&p| record.normalize_point(p)).collect(),
        weights: c.weights.clone(),
    };
    Ok((map(template), map(reference), record))
}
