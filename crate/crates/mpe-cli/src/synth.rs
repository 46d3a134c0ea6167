//! Synthetic benchmark clouds.

use mpe_core::{PointCloud, Vec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

/// A scan-like benchmark cloud: a closed surface (deformed ellipsoid
/// shell) with asymmetric bumps so that no rotation maps it onto
/// itself. Centered on its centroid and scaled to bounding diagonal 1,
/// so sigma and translation settings read as fractions of the object
/// size.
pub fn asymmetric_shell(n: usize, seed: u64) -> PointCloud {
    assert!(n >= 4, "need at least 4 points");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let [x, y, z]: [f64; 3] = UnitSphere.sample(&mut rng);
        // the linear terms break every 180-degree near-symmetry of the
        // base ellipsoid, so no flipped pose looks registered
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
    let cloud = PointCloud::new(points).unwrap();
    let centroid = cloud.centroid();
    let scale = 1.0 / cloud.bounding_diagonal();
    let centered: Vec<Vec3> = cloud
        .points()
        .iter()
        .map(|&p| (p - centroid) * scale)
        .collect();
    PointCloud::new(centered).unwrap()
}
