//! The full coarse-to-fine pipeline: normalize, randomly downsample,
//! coarse-align on the sparse clouds, refine with trimmed ICP on the
//! full clouds, and map the pose back to original units.
//!
//! Random downsampling preserves the shape of the force field in
//! expectation, so the coarse stage runs on a few hundred points
//! regardless of input size while refinement still uses every point.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{normalize_clouds, NormalizationRecord, PointCloud};
use crate::error::{Error, Result};
use crate::icp::{icp_align_with_index, IcpConfig};
use crate::mpe::{mpe_align_with_index, MpeConfig, MpeStatus, MpeTrace};
use crate::nn::NnIndex;
use crate::transform::RigidTransform;

/// How many points the coarse stage keeps per cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSpec {
    /// Absolute point count (clamped to the cloud size).
    Size(usize),
    /// Fraction of the cloud in `(0, 1]`.
    Ratio(f64),
}

impl SampleSpec {
    fn resolve(&self, cloud_len: usize) -> Result<usize> {
        let k = match *self {
            SampleSpec::Size(n) => n.min(cloud_len),
            SampleSpec::Ratio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::Config("sample_ratio must be in (0, 1]"));
                }
                ((r * cloud_len as f64).ceil() as usize).min(cloud_len)
            }
        };
        if k < 4 {
            return Err(Error::Config("resolved sample must keep at least 4 points"));
        }
        Ok(k)
    }
}

/// Pipeline configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MplConfig {
    pub sample: SampleSpec,
    pub rng_seed: u64,
    pub mpe: MpeConfig,
    pub icp: IcpConfig,
}

impl Default for MplConfig {
    fn default() -> Self {
        MplConfig {
            sample: SampleSpec::Size(200),
            rng_seed: 0,
            mpe: MpeConfig::default(),
            icp: IcpConfig::default(),
        }
    }
}

/// Splitmix64 step, used to derive independent sub-seeds from a master
/// seed and a stream id. Deterministic across platforms.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample of `k` points without replacement, deterministic for
/// a given seed. Input order is preserved and weights follow their
/// points.
pub fn random_downsample(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    if k == 0 || k > cloud.len() {
        return Err(Error::SampleSize {
            requested: k,
            available: cloud.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = rand::seq::index::sample(&mut rng, cloud.len(), k).into_vec();
    indices.sort_unstable();
    Ok(cloud.select(&indices))
}

/// Compact view of a coarse-stage trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpeSummary {
    pub iterations: usize,
    pub status: MpeStatus,
    pub final_rot_step: f64,
    pub final_trans_step: f64,
    pub final_p2_energy: f64,
}

impl MpeSummary {
    fn from_trace(trace: &MpeTrace) -> MpeSummary {
        let last = trace.iterations.last();
        MpeSummary {
            iterations: trace.len(),
            status: trace.status,
            final_rot_step: last.map_or(0.0, |r| r.rot_step),
            final_trans_step: last.map_or(0.0, |r| r.trans_step),
            final_p2_energy: last.map_or(0.0, |r| r.p2_energy),
        }
    }
}

/// Everything observed during one pipeline run.
///
/// The pose inside the report (and the one returned alongside it) maps
/// the template onto the reference in original input units; trace poses
/// are in normalized units. Stage timings are wall-clock milliseconds
/// and are zero when the crate is built without `std`.
#[derive(Debug, Clone)]
pub struct RegistrationReport {
    pub pose: RigidTransform,
    pub normalization: NormalizationRecord,
    pub template_sample: usize,
    pub reference_sample: usize,
    pub mpe: MpeSummary,
    pub mpe_trace: MpeTrace,
    pub icp_iterations: usize,
    pub icp_converged: bool,
    pub final_trimmed_mse: f64,
    pub prepare_ms: f64,
    pub mpe_ms: f64,
    pub icp_ms: f64,
    pub total_ms: f64,
}

impl RegistrationReport {
    /// True when both stages stopped on their own criteria rather than
    /// on iteration budgets.
    pub fn converged(&self) -> bool {
        self.mpe.status != MpeStatus::MaxIterations && self.icp_converged
    }
}

/// Registers `template` onto `reference` and returns the pose in
/// original units together with the full report.
pub fn mpl_register(
    template: &PointCloud,
    reference: &PointCloud,
    config: &MplConfig,
) -> Result<(RigidTransform, RegistrationReport)> {
    config.mpe.validate()?;
    config.icp.validate()?;
    let started = Stopwatch::start();

    let (template_n, reference_n, record) =
        normalize_clouds(template, reference).map_err(|e| e.in_stage("normalize"))?;

    let template_k = config
        .sample
        .resolve(template_n.len())
        .map_err(|e| e.in_stage("downsample"))?;
    let reference_k = config
        .sample
        .resolve(reference_n.len())
        .map_err(|e| e.in_stage("downsample"))?;
    let template_s = random_downsample(&template_n, template_k, derive_seed(config.rng_seed, 1))
        .map_err(|e| e.in_stage("downsample"))?;
    let reference_s = random_downsample(&reference_n, reference_k, derive_seed(config.rng_seed, 2))
        .map_err(|e| e.in_stage("downsample"))?;
    let prepare_ms = started.lap_ms();

    let mpe_clock = Stopwatch::start();
    let sparse_index = NnIndex::build(&reference_s);
    let (coarse_pose, trace) =
        mpe_align_with_index(&template_s, &reference_s, &sparse_index, &config.mpe)
            .map_err(|e| e.in_stage("mpe"))?;
    let mpe_ms = mpe_clock.lap_ms();

    let icp_clock = Stopwatch::start();
    let full_index = NnIndex::build(&reference_n);
    let icp = icp_align_with_index(
        &template_n,
        &reference_n,
        &full_index,
        &coarse_pose,
        &config.icp,
    )
    .map_err(|e| e.in_stage("icp"))?;
    let icp_ms = icp_clock.lap_ms();

    let pose = record.denormalize_pose(&icp.pose);
    let report = RegistrationReport {
        pose,
        normalization: record,
        template_sample: template_s.len(),
        reference_sample: reference_s.len(),
        mpe: MpeSummary::from_trace(&trace),
        mpe_trace: trace,
        icp_iterations: icp.iterations,
        icp_converged: icp.converged,
        final_trimmed_mse: icp.final_trimmed_mse,
        prepare_ms,
        mpe_ms,
        icp_ms,
        total_ms: started.lap_ms(),
    };
    Ok((pose, report))
}

#[cfg(feature = "std")]
struct Stopwatch(std::time::Instant);

#[cfg(feature = "std")]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    fn lap_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

#[cfg(not(feature = "std"))]
struct Stopwatch;

#[cfg(not(feature = "std"))]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }

    fn lap_ms(&self) -> f64 {
        0.0
    }
}
