//! Coarse global alignment by force traction.
//!
//! Each iteration evaluates the force field at the current pose,
//! rotates the template about the torque axis and translates it along
//! the gravitational vector by fixed step sizes. A step is halved
//! whenever the corresponding vector reverses direction (negative dot
//! product with its previous value), which marks a crossing of the
//! force mutation point. The walk stops once both steps drop below
//! their thresholds.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::force::{system_state_with_index, ForceParams};
use crate::math::Vec3;
use crate::nn::NnIndex;
use crate::transform::RigidTransform;
use crate::NEAR_ZERO;

/// Where the lever arms and the rotation axis are anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CenterPolicy {
    /// Recompute the (weighted) template centroid every iteration.
    TemplateCentroid,
    /// Keep a fixed anchor point. Only affects convergence speed, not
    /// the fixed point of the walk.
    Fixed(Point3),
}

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpeConfig {
    /// Initial rotation step, radians.
    pub initial_rot_step: f64,
    /// Initial translation step, normalized length.
    pub initial_trans_step: f64,
    /// Rotation step threshold, radians.
    pub rot_threshold: f64,
    /// Translation step threshold, normalized length.
    pub trans_threshold: f64,
    pub max_iterations: usize,
    pub force_params: ForceParams,
    pub center_policy: CenterPolicy,
}

impl Default for MpeConfig {
    fn default() -> Self {
        MpeConfig {
            initial_rot_step: 0.2,
            initial_trans_step: 0.1,
            rot_threshold: 1e-3,
            trans_threshold: 1e-3,
            max_iterations: 5000,
            force_params: ForceParams::default(),
            center_policy: CenterPolicy::TemplateCentroid,
        }
    }
}

impl MpeConfig {
    pub fn validate(&self) -> Result<()> {
        self.force_params.validate()?;
        let positive = [
            self.initial_rot_step,
            self.initial_trans_step,
            self.rot_threshold,
            self.trans_threshold,
        ];
        if positive.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::Config("steps and thresholds must be positive"));
        }
        if self.rot_threshold >= self.initial_rot_step
            || self.trans_threshold >= self.initial_trans_step
        {
            return Err(Error::Config("thresholds must be below initial steps"));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpeStatus {
    /// Both steps fell below their thresholds.
    Converged,
    /// Torque and gravitational vector both vanished.
    ForcesVanished,
    /// Iteration budget exhausted; the pose is partial, not an error.
    MaxIterations,
}

/// One solver iteration, as recorded for convergence inspection.
///
/// Steps are the values in effect after this iteration's halving test;
/// the pose is the value after this iteration's update.
#[derive(Debug, Clone, Copy)]
pub struct MpeIteration {
    pub iteration: usize,
    pub rot_step: f64,
    pub trans_step: f64,
    /// Dot product of the current and previous torque.
    pub rot_flag: f64,
    /// Dot product of the current and previous gravitational vector.
    pub trans_flag: f64,
    pub pose: RigidTransform,
    pub p2_energy: f64,
}

/// Full per-iteration record of a solve.
#[derive(Debug, Clone)]
pub struct MpeTrace {
    pub iterations: Vec<MpeIteration>,
    pub status: MpeStatus,
}

impl MpeTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// Runs the coarse alignment and returns the accumulated rigid
/// transform mapping the original template toward the reference,
/// together with the full trace.
///
/// Both clouds are expected in normalized units (see
/// [`normalize_clouds`](crate::cloud::normalize_clouds)).
pub fn mpe_align(
    template: &PointCloud,
    reference: &PointCloud,
    config: &MpeConfig,
) -> Result<(RigidTransform, MpeTrace)> {
    config.validate()?;
    let index = NnIndex::build(reference);
    mpe_align_with_index(template, reference, &index, config)
}

pub(crate) fn mpe_align_with_index(
    template: &PointCloud,
    reference: &PointCloud,
    index: &NnIndex,
    config: &MpeConfig,
) -> Result<(RigidTransform, MpeTrace)> {
    let mut pose = RigidTransform::identity();
    let mut rot_step = config.initial_rot_step;
    let mut trans_step = config.initial_trans_step;
    let mut prev_torque = Vec3::ZERO;
    let mut prev_grav = Vec3::ZERO;
    let mut iterations = Vec::new();
    let mut status = MpeStatus::MaxIterations;

    for k in 1..=config.max_iterations {
        let current = template.transformed(&pose);
        let center = match config.center_policy {
            CenterPolicy::TemplateCentroid => current.centroid(),
            CenterPolicy::Fixed(p) => p,
        };
        let state =
            system_state_with_index(&current, reference, index, center, &config.force_params)?;
        let torque = state.torque;
        let grav = state.gravitational_vector;

        // First iteration: previous vectors are zero, flags are 0 and
        // nothing halves.
        let rot_flag = torque.dot(prev_torque);
        let trans_flag = grav.dot(prev_grav);
        if rot_flag < 0.0 {
            rot_step /= 2.0;
        }
        if trans_flag < 0.0 {
            trans_step /= 2.0;
        }
        prev_torque = torque;
        prev_grav = grav;

        let vanished = torque.norm() < NEAR_ZERO && grav.norm() < NEAR_ZERO;
        let settled = rot_step <= config.rot_threshold && trans_step <= config.trans_threshold;
        if vanished || settled {
            iterations.push(MpeIteration {
                iteration: k,
                rot_step,
                trans_step,
                rot_flag,
                trans_flag,
                pose,
                p2_energy: state.p2_energy,
            });
            status = if vanished {
                MpeStatus::ForcesVanished
            } else {
                MpeStatus::Converged
            };
            break;
        }

        // Rotation first, then translation; both skipped when the
        // driving vector has no direction.
        let mut step = RigidTransform::identity();
        if let Some(axis) = torque.normalized(NEAR_ZERO) {
            step = RigidTransform::rotation_about(axis, rot_step, center);
        }
        if let Some(dir) = grav.normalized(NEAR_ZERO) {
            step = RigidTransform::from_translation(dir * trans_step).compose(&step);
        }
        pose = step.compose(&pose);

        iterations.push(MpeIteration {
            iteration: k,
            rot_step,
            trans_step,
            rot_flag,
            trans_flag,
            pose,
            p2_energy: state.p2_energy,
        });
    }

    Ok((pose, MpeTrace { iterations, status }))
}
