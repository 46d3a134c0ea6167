//! Classic and trimmed iterative closest point, plus the closed-form
//! least-squares rigid fit it alternates with.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::cloud::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::math::{jacobi_eigen, Quat, Vec3};
use crate::nn::NnIndex;
use crate::transform::RigidTransform;

/// Fine-registration configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iterations: usize,
    /// Stop when the trimmed MSE improves by less than this.
    pub mse_tolerance: f64,
    /// Fraction of template points retained per iteration; 1 is
    /// classic ICP.
    pub trim_ratio: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iterations: 100,
            mse_tolerance: 1e-9,
            trim_ratio: 0.7,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.trim_ratio.is_finite() || self.trim_ratio <= 0.0 || self.trim_ratio > 1.0 {
            return Err(Error::Config("trim_ratio must be in (0, 1]"));
        }
        if !self.mse_tolerance.is_finite() || self.mse_tolerance <= 0.0 {
            return Err(Error::Config("mse_tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of [`icp_align`].
#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Accumulated pose, composed with the initial guess.
    pub pose: RigidTransform,
    /// Trimmed mean squared correspondence distance at the last
    /// matching step.
    pub final_trimmed_mse: f64,
    pub iterations: usize,
    /// True when the tolerance test stopped the loop before the
    /// iteration budget ran out.
    pub converged: bool,
    /// Trimmed MSE observed at each matching step.
    pub mse_history: Vec<f64>,
}

/// Least-squares rigid motion for known pairs: the `(R, t)` minimizing
/// `sum_i |b_i - (R a_i + t)|^2`.
///
/// Solved in closed form by aligning centroids and extracting the
/// rotation as the dominant eigenvector of the quaternion form of the
/// 3x3 cross-covariance, which yields a proper rotation (det +1)
/// directly.
pub fn best_rigid_fit(pairs: &[(Point3, Point3)]) -> Result<RigidTransform> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateCorrespondences);
    }
    let n = pairs.len() as f64;
    let mut a_mean = Vec3::ZERO;
    let mut b_mean = Vec3::ZERO;
    for (a, b) in pairs {
        a_mean += *a;
        b_mean += *b;
    }
    a_mean = a_mean * (1.0 / n);
    b_mean = b_mean * (1.0 / n);

    // cross-covariance and the source scatter used for the degeneracy test
    let mut cov = [[0.0f64; 3]; 3];
    let mut scatter = [[0.0f64; 3]; 3];
    for (a, b) in pairs {
        let da = *a - a_mean;
        let db = *b - b_mean;
        let da_arr = [da.x, da.y, da.z];
        let db_arr = [db.x, db.y, db.z];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += da_arr[i] * db_arr[j];
                scatter[i][j] += da_arr[i] * da_arr[j];
            }
        }
    }

    // A collinear source leaves rotation about its axis free: the two
    // smallest scatter eigenvalues vanish.
    let (mut eig, _) = jacobi_eigen(scatter);
    eig.sort_unstable_by(f64::total_cmp);
    if eig[1] <= 1e-12 * eig[2].max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateCorrespondences);
    }

    let (sxx, sxy, sxz) = (cov[0][0], cov[0][1], cov[0][2]);
    let (syx, syy, syz) = (cov[1][0], cov[1][1], cov[1][2]);
    let (szx, szy, szz) = (cov[2][0], cov[2][1], cov[2][2]);
    let k = [
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ];
    let (values, vectors) = jacobi_eigen(k);
    let mut top = 0;
    for i in 1..4 {
        if values[i] > values[top] {
            top = i;
        }
    }
    let q = Quat::new(
        vectors[0][top],
        vectors[1][top],
        vectors[2][top],
        vectors[3][top],
    )
    .normalized();
    let rotation = q.to_matrix();
    let translation = b_mean - rotation.mul_vec(a_mean);
    Ok(RigidTransform::from_parts(rotation, translation))
}

/// Trimmed ICP: alternates exact nearest-neighbor matching, retention
/// of the `ceil(trim_ratio * N)` closest pairs, and a closed-form refit
/// on the retained pairs. Stops when the trimmed MSE improvement drops
/// below the tolerance.
///
/// Returns the accumulated pose composed with `initial`.
pub fn icp_align(
    template: &PointCloud,
    reference: &PointCloud,
    initial: &RigidTransform,
    config: &IcpConfig,
) -> Result<IcpResult> {
    let index = NnIndex::build(reference);
    icp_align_with_index(template, reference, &index, initial, config)
}

pub(crate) fn icp_align_with_index(
    template: &PointCloud,
    reference: &PointCloud,
    index: &NnIndex,
    initial: &RigidTransform,
    config: &IcpConfig,
) -> Result<IcpResult> {
    config.validate()?;
    if template.len() < 3 {
        return Err(Error::DegenerateCorrespondences);
    }
    let retained = ceil_ratio(config.trim_ratio, template.len());

    let mut pose = *initial;
    let mut mse_history = Vec::new();
    let mut prev_mse = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    // scratch reused across iterations: (squared distance, template
    // index, reference index), sorted with an index tiebreak for
    // determinism
    let mut matches: Vec<(f64, usize, usize)> = Vec::with_capacity(template.len());

    for _ in 0..config.max_iterations {
        iterations += 1;
        let current = template.transformed(&pose);
        matches.clear();
        for (i, &p) in current.points().iter().enumerate() {
            let (j, d_sq) = index.nearest(p);
            matches.push((d_sq, i, j));
        }
        matches.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let kept = &matches[..retained];
        let mse = kept.iter().map(|m| m.0).sum::<f64>() / retained as f64;
        mse_history.push(mse);

        if prev_mse - mse < config.mse_tolerance {
            converged = true;
            break;
        }
        prev_mse = mse;

        let pairs: Vec<(Point3, Point3)> = kept
            .iter()
            .map(|&(_, i, j)| (current.points()[i], reference.points()[j]))
            .collect();
        let step = best_rigid_fit(&pairs).map_err(|e| e.in_stage("icp refit"))?;
        pose = step.compose(&pose);
    }

    let final_trimmed_mse = mse_history.last().copied().unwrap_or(f64::INFINITY);
    Ok(IcpResult {
        pose,
        final_trimmed_mse,
        iterations,
        converged,
        mse_history,
    })
}

fn ceil_ratio(ratio: f64, n: usize) -> usize {
    let k = (ratio * n as f64).ceil() as usize;
    k.clamp(1, n)
}
