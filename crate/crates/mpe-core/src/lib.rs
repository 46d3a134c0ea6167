//! Rigid 3D point-cloud registration driven by a softened gravitational
//! force field.
//!
//! The library aligns a moving *template* cloud to a fixed *reference*
//! cloud in two stages. A coarse global stage treats every reference
//! point as an attracting particle, sums the induced forces on the
//! template into a gravitational vector and a rotational torque, and
//! walks the template along both until the force direction reverses,
//! halving the step each time it does. A fine stage then runs trimmed
//! ICP from the coarse pose. Random downsampling keeps the coarse stage
//! cheap on large clouds without changing the shape of the force field.
//!
//! The crate is `no_std`-compatible (with `alloc`); disabling the
//! default `std` feature only removes wall-clock stage timings from
//! pipeline reports.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cloud;
pub mod error;
pub mod force;
pub mod icp;
pub mod math;
pub mod mpe;
pub mod nn;
pub mod pipeline;
pub mod transform;

pub use cloud::{
    apply_transform, normalize_clouds, Correspondence, NormalizationRecord, Point3, PointCloud,
};
pub use error::{Error, Result};
pub use force::{p2_residual, point_force, system_state, ForceParams, ForceState};
pub use icp::{best_rigid_fit, icp_align, IcpConfig, IcpResult};
pub use math::{Mat3, Quat, Vec3};
pub use mpe::{mpe_align, CenterPolicy, MpeConfig, MpeIteration, MpeStatus, MpeTrace};
pub use nn::NnIndex;
pub use pipeline::{
    derive_seed, mpl_register, random_downsample, MplConfig, RegistrationReport, SampleSpec,
};
pub use transform::{rotation_error_deg, translation_error, RigidTransform};

/// Norms below this are treated as directionless when normalizing
/// force, torque and lever-arm vectors.
pub const NEAR_ZERO: f64 = 1e-12;
