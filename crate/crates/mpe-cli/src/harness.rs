//! Synthetic benchmark harness: seeded perturbations, registration
//! quality metrics, and the noise / outlier / sampling-ratio sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use mpe_core::{
    best_rigid_fit, derive_seed, mpe_align, mpl_register, rotation_error_deg, translation_error,
    ForceParams, MpeConfig, MplConfig, NormalizationRecord, PointCloud, RigidTransform,
    SampleSpec, Vec3,
};

use crate::error::{Result, ToolError};

/// A seeded random rigid motion plus measurement imperfections.
///
/// The motion rotates about the cloud centroid by a uniform angle in
/// `[0, rotation_angle_range]` about a uniform axis, then translates by
/// a uniform-magnitude vector. Gaussian displacement noise is added per
/// point afterwards, and `outlier_count` uniform points are appended
/// inside the transformed (pre-noise) cloud's bounding cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    /// Maximum rotation angle, radians.
    pub rotation_angle_range: f64,
    /// Maximum translation magnitude (same units as the cloud).
    pub translation_range: f64,
    /// Isotropic per-point displacement sigma ("per unit length" for
    /// unit-diagonal clouds).
    pub gaussian_sigma: f64,
    pub outlier_count: usize,
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            rotation_angle_range: core::f64::consts::FRAC_PI_2,
            translation_range: 0.3,
            gaussian_sigma: 0.0,
            outlier_count: 0,
            seed: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rotation_angle_range < 0.0 || self.rotation_angle_range > core::f64::consts::PI {
            return Err(ToolError::Usage(
                "rotation angle range must be in [0, pi]".into(),
            ));
        }
        if self.translation_range < 0.0 || self.gaussian_sigma < 0.0 {
            return Err(ToolError::Usage(
                "translation range and sigma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Applies the seeded motion, noise and outliers; returns the perturbed
/// cloud and the exact rigid ground truth (noise and outliers excluded
/// from it by definition).
///
/// The returned transform is the forward motion: applied to the input
/// cloud it reproduces the transformed, pre-noise positions exactly.
/// Outliers are appended after the original points, so indices below
/// `cloud.len()` stay index-corresponded with the input.
pub fn perturb(cloud: &PointCloud, spec: &PerturbationSpec) -> Result<(PointCloud, RigidTransform)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let axis: [f64; 3] = UnitSphere.sample(&mut rng);
    let angle = if spec.rotation_angle_range > 0.0 {
        rng.gen_range(0.0..spec.rotation_angle_range)
    } else {
        0.0
    };
    let translation = if spec.translation_range > 0.0 {
        let dir: [f64; 3] = UnitSphere.sample(&mut rng);
        Vec3::new(dir[0], dir[1], dir[2]) * rng.gen_range(0.0..spec.translation_range)
    } else {
        Vec3::ZERO
    };
    let motion = RigidTransform::from_translation(translation).compose(
        &RigidTransform::rotation_about(
            Vec3::new(axis[0], axis[1], axis[2]),
            angle,
            cloud.centroid(),
        ),
    );

    let transformed = cloud.transformed(&motion);

    let mut points = transformed.points().to_vec();
    if spec.gaussian_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.gaussian_sigma).expect("sigma validated");
        for p in &mut points {
            *p += Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            );
        }
    }

    if spec.outlier_count > 0 {
        // a cube encompassing the transformed cloud: side equal to the
        // largest bounding-box extent, centered on the box center
        let (lo, hi) = transformed.bounding_box();
        let extent = hi - lo;
        let side = extent.x.max(extent.y).max(extent.z);
        let center = (lo + hi) * 0.5;
        let half = side * 0.5;
        for _ in 0..spec.outlier_count {
            points.push(
                center
                    + Vec3::new(
                        rng.gen_range(-half..half),
                        rng.gen_range(-half..half),
                        rng.gen_range(-half..half),
                    ),
            );
        }
    }

    let weights = cloud.weights().map(|w| {
        let mut all = w.to_vec();
        all.resize(points.len(), 1.0);
        all
    });
    let perturbed = PointCloud::with_weights(points, weights)?;
    Ok((perturbed, motion))
}

/// Fraction of non-outlier template points whose registered position
/// lies within `threshold` of its ground-truth position.
///
/// The first `reference.len()` template points are taken as the
/// non-outlier set, index-corresponded with the reference (the layout
/// [`perturb`] produces). The ground-truth position of template point
/// `i` is the ground-truth registration (the inverse of the forward
/// `gt_motion`) applied to its noise-free position, i.e. the reference
/// point itself; noise therefore counts against the match distance.
pub fn match_precision(
    estimated: &RigidTransform,
    template: &PointCloud,
    reference: &PointCloud,
    gt_motion: &RigidTransform,
    threshold: f64,
) -> f64 {
    let registration = gt_motion.inverse();
    let n = reference.len().min(template.len());
    let mut correct = 0usize;
    for i in 0..n {
        let registered = estimated.apply(template.points()[i]);
        let target = registration.apply(gt_motion.apply(reference.points()[i]));
        if (registered - target).norm() < threshold {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

/// Root-mean-square distance between the registered non-outlier
/// template points and their true reference correspondents.
pub fn rms_inlier_residual(
    estimated: &RigidTransform,
    template: &PointCloud,
    reference: &PointCloud,
) -> f64 {
    let n = reference.len().min(template.len());
    let mut sum = 0.0;
    for i in 0..n {
        let d = estimated.apply(template.points()[i]) - reference.points()[i];
        sum += d.dot(d);
    }
    (sum / n as f64).sqrt()
}

/// One registration trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial_id: usize,
    /// The swept value: sigma, outlier count or sampling ratio.
    pub condition: f64,
    pub seed: u64,
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    pub rms_inlier_residual: f64,
    pub precision: f64,
    pub prepare_ms: f64,
    pub mpe_ms: f64,
    pub icp_ms: f64,
    pub total_ms: f64,
    pub mpe_iterations: usize,
    pub icp_iterations: usize,
    pub converged: bool,
}

/// Per-condition aggregate (means over trials, sample variance for the
/// residual).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionAggregate {
    pub condition: f64,
    pub trials: usize,
    pub mean_rotation_error_deg: f64,
    pub mean_translation_error: f64,
    pub mean_rms_residual: f64,
    pub var_rms_residual: f64,
    pub mean_precision: f64,
    pub mean_prepare_ms: f64,
    pub mean_mpe_ms: f64,
    pub mean_icp_ms: f64,
    pub mean_total_ms: f64,
    pub converged_fraction: f64,
}

/// All rows of one sweep plus per-condition aggregates. Rows are
/// ordered by (condition index, trial index) regardless of how the
/// trials were scheduled.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<ConditionAggregate>,
    pub trials_per_condition: usize,
}

/// Shared sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub trials: usize,
    /// Maximum perturbation rotation, radians.
    pub rotation_angle_range: f64,
    /// Maximum perturbation translation.
    pub translation_range: f64,
    /// Baseline noise sigma (the noise sweep overrides it per
    /// condition).
    pub gaussian_sigma: f64,
    /// Baseline outlier count (the outlier sweep overrides it).
    pub outlier_count: usize,
    /// Precision threshold for counting correct matches.
    pub precision_threshold: f64,
    pub mpl: MplConfig,
    /// Worker threads for trials; 1 keeps trials sequential, which also
    /// keeps wall-clock readings contention-free.
    pub threads: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            trials: 10,
            rotation_angle_range: core::f64::consts::FRAC_PI_2,
            translation_range: 0.3,
            gaussian_sigma: 0.0,
            outlier_count: 0,
            precision_threshold: 1e-3,
            mpl: MplConfig::default(),
            threads: 1,
        }
    }
}

/// Registration quality versus Gaussian noise level.
pub fn run_noise_sweep(
    reference: &PointCloud,
    sigmas: &[f64],
    settings: &SweepSettings,
) -> Result<ExperimentReport> {
    run_sweep(reference, sigmas, settings, |settings, &sigma, trial| {
        let mut spec = base_spec(settings, trial);
        spec.gaussian_sigma = sigma;
        (spec, settings.mpl, sigma)
    })
}

/// Registration quality versus number of uniform outliers.
pub fn run_outlier_sweep(
    reference: &PointCloud,
    counts: &[usize],
    settings: &SweepSettings,
) -> Result<ExperimentReport> {
    run_sweep(reference, counts, settings, |settings, &count, trial| {
        let mut spec = base_spec(settings, trial);
        spec.outlier_count = count;
        (spec, settings.mpl, count as f64)
    })
}

/// Registration quality and cost versus coarse-stage sampling ratio.
pub fn run_sampling_sweep(
    reference: &PointCloud,
    ratios: &[f64],
    settings: &SweepSettings,
) -> Result<ExperimentReport> {
    run_sweep(reference, ratios, settings, |settings, &ratio, trial| {
        let spec = base_spec(settings, trial);
        let mut mpl = settings.mpl;
        mpl.sample = SampleSpec::Ratio(ratio);
        (spec, mpl, ratio)
    })
}

fn base_spec(settings: &SweepSettings, trial: usize) -> PerturbationSpec {
    PerturbationSpec {
        rotation_angle_range: settings.rotation_angle_range,
        translation_range: settings.translation_range,
        gaussian_sigma: settings.gaussian_sigma,
        outlier_count: settings.outlier_count,
        // matched across conditions: the same trial index draws the
        // same motion at every condition value
        seed: derive_seed(settings.mpl.rng_seed, 1_000_000 + trial as u64),
    }
}

fn run_sweep<C: Sync>(
    reference: &PointCloud,
    conditions: &[C],
    settings: &SweepSettings,
    job: impl Fn(&SweepSettings, &C, usize) -> (PerturbationSpec, MplConfig, f64) + Sync,
) -> Result<ExperimentReport> {
    if conditions.is_empty() {
        return Err(ToolError::Usage("no sweep conditions given".into()));
    }
    if settings.trials == 0 {
        return Err(ToolError::Usage("trials must be at least 1".into()));
    }
    let trials = settings.trials;
    let total = conditions.len() * trials;
    let run_one = |idx: usize| -> Result<TrialRow> {
        let (ci, trial) = (idx / trials, idx % trials);
        let (spec, mut mpl, condition) = job(settings, &conditions[ci], trial);
        mpl.rng_seed = derive_seed(settings.mpl.rng_seed, 2_000_000 + trial as u64);
        let (template, motion) = perturb(reference, &spec)?;
        Ok(run_trial(
            reference,
            &template,
            &motion,
            &mpl,
            idx,
            condition,
            spec.seed,
            settings.precision_threshold,
        ))
    };

    let rows: Result<Vec<TrialRow>> = if settings.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.threads)
            .build()
            .map_err(|e| ToolError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| (0..total).into_par_iter().map(run_one).collect())
    } else {
        (0..total).map(run_one).collect()
    };
    let rows = rows?;

    let aggregates = conditions
        .iter()
        .enumerate()
        .map(|(ci, _)| aggregate(&rows[ci * trials..(ci + 1) * trials]))
        .collect();
    Ok(ExperimentReport {
        rows,
        aggregates,
        trials_per_condition: trials,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    reference: &PointCloud,
    template: &PointCloud,
    motion: &RigidTransform,
    mpl: &MplConfig,
    trial_id: usize,
    condition: f64,
    seed: u64,
    threshold: f64,
) -> TrialRow {
    let expected = motion.inverse();
    match mpl_register(template, reference, mpl) {
        Ok((pose, report)) => TrialRow {
            trial_id,
            condition,
            seed,
            rotation_error_deg: rotation_error_deg(&expected, &pose),
            translation_error: translation_error(expected.translation, pose.translation),
            rms_inlier_residual: rms_inlier_residual(&pose, template, reference),
            precision: match_precision(&pose, template, reference, motion, threshold),
            prepare_ms: report.prepare_ms,
            mpe_ms: report.mpe_ms,
            icp_ms: report.icp_ms,
            total_ms: report.total_ms,
            mpe_iterations: report.mpe.iterations,
            icp_iterations: report.icp_iterations,
            converged: report.converged(),
        },
        // a failed stage still yields a finite row, measured at the
        // identity pose
        Err(_) => {
            let identity = RigidTransform::identity();
            TrialRow {
                trial_id,
                condition,
                seed,
                rotation_error_deg: rotation_error_deg(&expected, &identity),
                translation_error: translation_error(expected.translation, identity.translation),
                rms_inlier_residual: rms_inlier_residual(&identity, template, reference),
                precision: match_precision(&identity, template, reference, motion, threshold),
                prepare_ms: 0.0,
                mpe_ms: 0.0,
                icp_ms: 0.0,
                total_ms: 0.0,
                mpe_iterations: 0,
                icp_iterations: 0,
                converged: false,
            }
        }
    }
}

/// Median distance from each point to its closest other point.
fn median_nearest_spacing(cloud: &PointCloud) -> f64 {
    let points = cloud.points();
    let mut nearest: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut best = f64::INFINITY;
            for (j, &q) in points.iter().enumerate() {
                if i != j {
                    best = best.min((p - q).norm_squared());
                }
            }
            best.sqrt()
        })
        .collect();
    nearest.sort_unstable_by(f64::total_cmp);
    nearest[nearest.len() / 2]
}

fn aggregate(rows: &[TrialRow]) -> ConditionAggregate {
    let n = rows.len() as f64;
    let mean = |f: fn(&TrialRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let mean_rms = mean(|r| r.rms_inlier_residual);
    let var_rms = if rows.len() > 1 {
        rows.iter()
            .map(|r| {
                let d = r.rms_inlier_residual - mean_rms;
                d * d
            })
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    ConditionAggregate {
        condition: rows[0].condition,
        trials: rows.len(),
        mean_rotation_error_deg: mean(|r| r.rotation_error_deg),
        mean_translation_error: mean(|r| r.translation_error),
        mean_rms_residual: mean_rms,
        var_rms_residual: var_rms,
        mean_precision: mean(|r| r.precision),
        mean_prepare_ms: mean(|r| r.prepare_ms),
        mean_mpe_ms: mean(|r| r.mpe_ms),
        mean_icp_ms: mean(|r| r.icp_ms),
        mean_total_ms: mean(|r| r.total_ms),
        converged_fraction: rows.iter().filter(|r| r.converged).count() as f64 / n,
    }
}

/// Outcome of the planar robust-versus-least-squares comparison.
#[derive(Debug, Clone)]
pub struct P2ToyRecord {
    pub seed: u64,
    /// Outlier distance as a multiple of the cloud diameter; `None`
    /// when no outlier pair was injected.
    pub outlier_distance_factor: Option<f64>,
    pub gt_rotation_deg: f64,
    pub l2_pose: RigidTransform,
    pub p2_pose: RigidTransform,
    pub l2_rotation_error_deg: f64,
    pub p2_rotation_error_deg: f64,
    pub l2_inlier_rms: f64,
    pub p2_inlier_rms: f64,
}

/// Runs the planar two-cluster toy with one far outlier pair injected
/// at 10x the cloud diameter.
pub fn run_p2_toy(seed: u64) -> Result<P2ToyRecord> {
    run_p2_toy_configured(seed, Some(10.0))
}

/// [`run_p2_toy`] with a configurable outlier distance (as a multiple
/// of the inlier cloud diameter); `None` injects no outlier pair.
pub fn run_p2_toy_configured(seed: u64, outlier_factor: Option<f64>) -> Result<P2ToyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 42));

    // two planar clusters of inliers (z = 0 throughout): egg-shaped
    // outlines with jitter, so orientation is well determined, the
    // point spacing is regular, and no 180-degree flip maps a cluster
    // onto itself
    let mut inliers = Vec::new();
    for (center, stretch, count) in [
        (Vec3::ZERO, Vec3::new(0.8, 0.3, 0.0), 24usize),
        (Vec3::new(2.0, 0.7, 0.0), Vec3::new(0.35, 0.5, 0.0), 16),
    ] {
        for k in 0..count {
            let a = core::f64::consts::TAU * k as f64 / count as f64;
            let egg = 1.0 + 0.35 * a.cos();
            let jitter = Vec3::new(
                rng.gen_range(-0.02..0.02),
                rng.gen_range(-0.02..0.02),
                0.0,
            );
            inliers.push(
                center
                    + Vec3::new(stretch.x * egg * a.cos(), stretch.y * egg * a.sin(), 0.0)
                    + jitter,
            );
        }
    }
    let reference_inliers = PointCloud::new(inliers)?;
    let diameter = reference_inliers.bounding_diagonal();
    let ref_centroid = reference_inliers.centroid();

    // modest in-plane motion
    let angle = rng.gen_range(-0.5..0.5f64);
    let t_r = rng.gen_range(0.0..0.3 * diameter);
    let t_a = rng.gen_range(0.0..core::f64::consts::TAU);
    let motion = RigidTransform::from_translation(Vec3::new(t_r * t_a.cos(), t_r * t_a.sin(), 0.0))
        .compose(&RigidTransform::rotation_about(
            Vec3::new(0.0, 0.0, 1.0),
            angle,
            ref_centroid,
        ));
    let template_inliers = reference_inliers.transformed(&motion);

    // inject one non-corresponding far pair
    let mut reference_points = reference_inliers.points().to_vec();
    let mut template_points = template_inliers.points().to_vec();
    if let Some(factor) = outlier_factor {
        let d = factor * diameter;
        let phi_r = rng.gen_range(0.0..core::f64::consts::TAU);
        // force a wide angular separation so the pair disagrees with
        // the true motion
        let split = rng.gen_range(0.6..core::f64::consts::PI);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let phi_t = phi_r + sign * split;
        reference_points.push(ref_centroid + Vec3::new(d * phi_r.cos(), d * phi_r.sin(), 0.0));
        let template_centroid = template_inliers.centroid();
        template_points.push(template_centroid + Vec3::new(d * phi_t.cos(), d * phi_t.sin(), 0.0));
    }
    let reference = PointCloud::new(reference_points)?;
    let template = PointCloud::new(template_points)?;

    // least-squares route: closed-form fit on all known pairs,
    // outlier pair included
    let pairs: Vec<(Vec3, Vec3)> = template
        .points()
        .iter()
        .copied()
        .zip(reference.points().iter().copied())
        .collect();
    let l2_pose = best_rigid_fit(&pairs)?;

    // robust route: the force-traction solver on the full clouds,
    // outliers included. Units are normalized to the inlier structure
    // the toy built (a bounding box stretched by the far outlier would
    // shrink the structure under the solver's step sizes); the solve
    // itself never sees inlier labels, the far pair simply carries a
    // vanishing force weight.
    let record = NormalizationRecord {
        centroid: ref_centroid,
        diagonal: diameter,
    };
    let to_normalized = |cloud: &PointCloud| -> Result<PointCloud> {
        Ok(PointCloud::new(
            cloud
                .points()
                .iter()
                .map(|&p| record.normalize_point(p))
                .collect(),
        )?)
    };
    let t_n = to_normalized(&template)?;
    let r_n = to_normalized(&reference)?;
    let mpe_config = MpeConfig {
        force_params: ForceParams {
            // median spacing, so the single far outlier cannot skew it
            softening: median_nearest_spacing(&r_n).max(1e-6),
            strength: 1.0,
        },
        ..MpeConfig::default()
    };
    let (pose_n, _) = mpe_align(&t_n, &r_n, &mpe_config)?;
    let p2_pose = record.denormalize_pose(&pose_n);

    let expected = motion.inverse();
    let inlier_rms = |pose: &RigidTransform| -> f64 {
        rms_inlier_residual(pose, &template_inliers, &reference_inliers)
    };
    Ok(P2ToyRecord {
        seed,
        outlier_distance_factor: outlier_factor,
        gt_rotation_deg: rotation_error_deg(&motion, &RigidTransform::identity()),
        l2_rotation_error_deg: rotation_error_deg(&expected, &l2_pose),
        p2_rotation_error_deg: rotation_error_deg(&expected, &p2_pose),
        l2_inlier_rms: inlier_rms(&l2_pose),
        p2_inlier_rms: inlier_rms(&p2_pose),
        l2_pose,
        p2_pose,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::asymmetric_shell;

    #[test]
    fn perturb_identity_spec_is_noop() {
        let cloud = asymmetric_shell(100, 1);
        let spec = PerturbationSpec {
            rotation_angle_range: 0.0,
            translation_range: 0.0,
            gaussian_sigma: 0.0,
            outlier_count: 0,
            seed: 9,
        };
        let (out, gt) = perturb(&cloud, &spec).unwrap();
        assert_eq!(out.points(), cloud.points());
        assert!(rotation_error_deg(&gt, &RigidTransform::identity()) < 1e-12);
    }

    #[test]
    fn perturb_ground_truth_reproduces_pre_noise_positions() {
        let cloud = asymmetric_shell(150, 2);
        let spec = PerturbationSpec {
            gaussian_sigma: 0.0,
            outlier_count: 0,
            seed: 11,
            ..PerturbationSpec::default()
        };
        let (out, gt) = perturb(&cloud, &spec).unwrap();
        for (orig, moved) in cloud.points().iter().zip(out.points()) {
            assert!((gt.apply(*orig) - *moved).norm() < 1e-12);
        }
    }

    #[test]
    fn perturb_appends_outliers() {
        let cloud = asymmetric_shell(200, 3);
        let spec = PerturbationSpec {
            outlier_count: 300,
            seed: 4,
            ..PerturbationSpec::default()
        };
        let (out, _) = perturb(&cloud, &spec).unwrap();
        assert_eq!(out.len(), 500);
    }

    #[test]
    fn perturb_noise_has_requested_sigma() {
        let cloud = asymmetric_shell(10_000, 5);
        let sigma = 0.05;
        let spec = PerturbationSpec {
            rotation_angle_range: 0.0,
            translation_range: 0.0,
            gaussian_sigma: sigma,
            outlier_count: 0,
            seed: 6,
        };
        let (out, _) = perturb(&cloud, &spec).unwrap();
        // sample standard deviation per axis within 5% of sigma
        for axis in 0..3 {
            let pick = |p: &Vec3| match axis {
                0 => p.x,
                1 => p.y,
                _ => p.z,
            };
            let diffs: Vec<f64> = cloud
                .points()
                .iter()
                .zip(out.points())
                .map(|(a, b)| pick(b) - pick(a))
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
                / (diffs.len() - 1) as f64;
            let sd = var.sqrt();
            assert!(
                (sd - sigma).abs() < 0.05 * sigma,
                "axis {axis}: sd {sd} vs sigma {sigma}"
            );
        }
    }

    #[test]
    fn precision_trivial_cases() {
        let cloud = asymmetric_shell(100, 7);
        let spec = PerturbationSpec {
            gaussian_sigma: 0.0,
            seed: 8,
            ..PerturbationSpec::default()
        };
        let (template, motion) = perturb(&cloud, &spec).unwrap();
        let exact = motion.inverse();
        assert_eq!(
            match_precision(&exact, &template, &cloud, &motion, 1e-3),
            1.0
        );
        // displaced by 10x the threshold: no matches
        let displaced = RigidTransform::from_translation(Vec3::new(0.01, 0.0, 0.0))
            .compose(&exact);
        assert_eq!(
            match_precision(&displaced, &template, &cloud, &motion, 1e-3),
            0.0
        );
    }

    #[test]
    fn precision_with_threshold_level_noise_is_fractional() {
        let cloud = asymmetric_shell(2000, 9);
        let threshold = 1e-3;
        let spec = PerturbationSpec {
            gaussian_sigma: threshold,
            seed: 10,
            ..PerturbationSpec::default()
        };
        let (template, motion) = perturb(&cloud, &spec).unwrap();
        let exact = motion.inverse();
        let precision = match_precision(&exact, &template, &cloud, &motion, threshold);
        assert!(precision > 0.0 && precision < 1.0, "precision {precision}");

        // brute-force per-point count oracle
        let mut count = 0usize;
        for i in 0..cloud.len() {
            let registered = exact.apply(template.points()[i]);
            if (registered - cloud.points()[i]).norm() < threshold {
                count += 1;
            }
        }
        assert!((precision - count as f64 / cloud.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn aggregates_match_recomputation() {
        let reference = asymmetric_shell(300, 12);
        let settings = SweepSettings {
            trials: 3,
            mpl: MplConfig {
                sample: SampleSpec::Size(80),
                ..MplConfig::default()
            },
            ..SweepSettings::default()
        };
        let report = run_noise_sweep(&reference, &[0.0, 0.01], &settings).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.aggregates.len(), 2);
        for (ci, agg) in report.aggregates.iter().enumerate() {
            let rows = &report.rows[ci * 3..(ci + 1) * 3];
            let mean_rot =
                rows.iter().map(|r| r.rotation_error_deg).sum::<f64>() / rows.len() as f64;
            assert!((agg.mean_rotation_error_deg - mean_rot).abs() < 1e-12);
            let mean_rms =
                rows.iter().map(|r| r.rms_inlier_residual).sum::<f64>() / rows.len() as f64;
            assert!((agg.mean_rms_residual - mean_rms).abs() < 1e-12);
            let var = rows
                .iter()
                .map(|r| (r.rms_inlier_residual - mean_rms).powi(2))
                .sum::<f64>()
                / (rows.len() - 1) as f64;
            assert!((agg.var_rms_residual - var).abs() < 1e-12);
            assert!(rows.iter().all(|r| r.precision >= 0.0 && r.precision <= 1.0));
        }
    }

    #[test]
    fn noise_free_sweep_recovers_cleanly() {
        let reference = asymmetric_shell(600, 7);
        let settings = SweepSettings {
            trials: 10,
            mpl: MplConfig {
                rng_seed: 1,
                ..MplConfig::default()
            },
            ..SweepSettings::default()
        };
        let report = run_noise_sweep(&reference, &[0.0], &settings).unwrap();
        assert!(
            report.aggregates[0].mean_rotation_error_deg < 0.1,
            "mean rotation error {}",
            report.aggregates[0].mean_rotation_error_deg
        );
    }

    #[test]
    fn zero_outliers_equal_the_noise_free_baseline() {
        // both sweeps derive the same per-trial seeds, so the zero
        // condition rows coincide exactly
        let reference = asymmetric_shell(300, 7);
        let settings = SweepSettings {
            trials: 4,
            mpl: MplConfig {
                sample: SampleSpec::Size(100),
                ..MplConfig::default()
            },
            ..SweepSettings::default()
        };
        let outliers = run_outlier_sweep(&reference, &[0], &settings).unwrap();
        let noise = run_noise_sweep(&reference, &[0.0], &settings).unwrap();
        for (a, b) in outliers.rows.iter().zip(&noise.rows) {
            assert_eq!(a.rotation_error_deg, b.rotation_error_deg);
            assert_eq!(a.rms_inlier_residual, b.rms_inlier_residual);
        }
    }

    #[test]
    fn full_ratio_single_trial_completes() {
        let reference = asymmetric_shell(60, 3);
        let settings = SweepSettings {
            trials: 1,
            ..SweepSettings::default()
        };
        let report = run_sampling_sweep(&reference, &[1.0], &settings).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].rms_inlier_residual >= 0.0);
    }

    #[test]
    fn sweep_rows_reproduce_exactly() {
        let reference = asymmetric_shell(250, 13);
        let settings = SweepSettings {
            trials: 2,
            mpl: MplConfig {
                sample: SampleSpec::Size(60),
                ..MplConfig::default()
            },
            ..SweepSettings::default()
        };
        let a = run_noise_sweep(&reference, &[0.01], &settings).unwrap();
        let b = run_noise_sweep(&reference, &[0.01], &settings).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.rotation_error_deg, y.rotation_error_deg);
            assert_eq!(x.rms_inlier_residual, y.rms_inlier_residual);
            assert_eq!(x.seed, y.seed);
        }
    }

    #[test]
    fn toy_without_outlier_agrees_across_routes() {
        let record = run_p2_toy_configured(3, None).unwrap();
        assert!(
            (record.l2_rotation_error_deg - record.p2_rotation_error_deg).abs() < 0.5,
            "l2 {} vs p2 {}",
            record.l2_rotation_error_deg,
            record.p2_rotation_error_deg
        );
    }

    #[test]
    fn toy_with_far_outlier_favors_the_robust_route() {
        let record = run_p2_toy(3).unwrap();
        assert!(
            record.p2_rotation_error_deg < record.l2_rotation_error_deg,
            "p2 {} vs l2 {}",
            record.p2_rotation_error_deg,
            record.l2_rotation_error_deg
        );
        assert!(record.p2_inlier_rms < record.l2_inlier_rms);
    }

    #[test]
    fn toy_outlier_residual_weight_vanishes() {
        // at 100x the diameter the robust per-pair residual of the
        // outlier is bounded by -K/(d^2 + eps^2), i.e. negligible
        let record = run_p2_toy_configured(5, Some(100.0)).unwrap();
        let params = ForceParams::default();
        let d: f64 = 100.0;
        let res = mpe_core::p2_residual(d * d, &params);
        assert!(res >= -params.strength / (d * d + params.softening * params.softening));
        assert!(res.abs() < 1e-4);
        assert!(record.p2_inlier_rms.is_finite());
    }
}
