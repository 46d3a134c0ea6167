//! Shared generators for integration tests.
#![allow(dead_code)] // each test binary uses a subset

use mpe_core::{Mat3, PointCloud, RigidTransform, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Mat3 {
    let axis = random_unit_vector(rng);
    let angle = rng.gen_range(0.0..max_angle);
    Mat3::from_axis_angle(axis, angle)
}

pub fn random_pose(rng: &mut ChaCha8Rng, max_angle: f64, max_translation: f64) -> RigidTransform {
    let rotation = random_rotation(rng, max_angle);
    let translation = if max_translation > 0.0 {
        random_unit_vector(rng) * rng.gen_range(0.0..max_translation)
    } else {
        Vec3::ZERO
    };
    RigidTransform::from_parts(rotation, translation)
}

/// Uniform points in a cube of the given half-extent.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, half_extent: f64) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Vec3::new(
                rng.gen_range(-half_extent..half_extent),
                rng.gen_range(-half_extent..half_extent),
                rng.gen_range(-half_extent..half_extent),
            )
        })
        .collect();
    PointCloud::new(points).unwrap()
}

/// A scan-like cloud without rotational symmetry: a deformed ellipsoid
/// shell with asymmetric bumps, bounding diagonal close to 1.
pub fn asymmetric_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let u = random_unit_vector(rng);
        let (x, y, z) = (u.x, u.y, u.z);
        let bump = 1.0
            + 0.24 * x
            + 0.18 * y
            + 0.12 * z
            + 0.15 * (2.0 * x + 3.0 * y).sin()
            + 0.10 * (2.0 * z - y).cos();
        let p = Vec3::new(0.50 * x * bump, 0.36 * y * bump, 0.27 * z * bump);
        let jitter = Vec3::new(
            rng.gen_range(-0.004..0.004),
            rng.gen_range(-0.004..0.004),
            rng.gen_range(-0.004..0.004),
        );
        points.push(p + jitter);
    }
    PointCloud::new(points).unwrap()
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
}
