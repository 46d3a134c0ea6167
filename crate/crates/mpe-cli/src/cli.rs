//! The `mpe` command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mpe_core::{
    rotation_error_deg, translation_error, ForceParams, IcpConfig, MpeConfig, MplConfig,
    PointCloud, SampleSpec,
};

use crate::error::{Result, ToolError};
use crate::harness::{
    match_precision, perturb, run_noise_sweep, run_outlier_sweep, run_p2_toy_configured,
    run_sampling_sweep, ExperimentReport, PerturbationSpec, SweepSettings,
};
use crate::io;
use crate::synth::asymmetric_shell;

/// Rigid point-cloud registration by force-traction coarse alignment
/// and trimmed-ICP refinement, plus its benchmark harness.
#[derive(Debug, Parser)]
#[command(name = "mpe", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Print per-trial progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register a template cloud onto a reference cloud.
    Register(RegisterArgs),
    /// Sweep Gaussian noise levels and report registration quality.
    BenchNoise(BenchNoiseArgs),
    /// Sweep uniform outlier counts and report registration quality.
    BenchOutliers(BenchOutliersArgs),
    /// Sweep coarse-stage sampling ratios and report quality and cost.
    BenchSampling(BenchSamplingArgs),
    /// Compare the robust criterion against least squares on a planar
    /// toy with one far outlier pair.
    ToyP2(ToyArgs),
    /// Materialize a perturbed copy of a cloud plus its ground-truth
    /// registration pose.
    Perturb(PerturbArgs),
}

/// Pipeline parameters shared by `register` and the bench commands.
#[derive(Debug, Args)]
struct MplFlags {
    /// Points kept per cloud for the coarse stage.
    #[arg(long, conflicts_with = "sample_ratio")]
    sample_size: Option<usize>,
    /// Fraction of each cloud kept for the coarse stage, in (0, 1].
    #[arg(long)]
    sample_ratio: Option<f64>,
    /// Master RNG seed; fixed seeds reproduce results exactly.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Force softening length, normalized units.
    #[arg(long, default_value_t = 0.05)]
    softening: f64,
    /// Global force strength constant.
    #[arg(long, default_value_t = 1.0)]
    strength: f64,
    /// Initial rotation step, radians.
    #[arg(long, default_value_t = 0.2)]
    rot_step: f64,
    /// Initial translation step, normalized units.
    #[arg(long, default_value_t = 0.1)]
    trans_step: f64,
    /// Rotation step threshold, radians.
    #[arg(long, default_value_t = 1e-3)]
    rot_eps: f64,
    /// Translation step threshold, normalized units.
    #[arg(long, default_value_t = 1e-3)]
    trans_eps: f64,
    /// Coarse-stage iteration budget.
    #[arg(long, default_value_t = 5000)]
    max_mpe_iterations: usize,
    /// Fraction of template points kept per refinement iteration; 1 is
    /// classic (untrimmed) matching.
    #[arg(long, default_value_t = 0.7)]
    trim_ratio: f64,
    /// Refinement iteration budget.
    #[arg(long, default_value_t = 100)]
    max_icp_iterations: usize,
    /// Stop refinement when the trimmed MSE improves by less than this.
    #[arg(long, default_value_t = 1e-9)]
    mse_tolerance: f64,
}

impl MplFlags {
    fn to_config(&self) -> Result<MplConfig> {
        let sample = match (self.sample_size, self.sample_ratio) {
            (Some(n), None) => SampleSpec::Size(n),
            (None, Some(r)) => SampleSpec::Ratio(r),
            (None, None) => SampleSpec::Size(200),
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        let config = MplConfig {
            sample,
            rng_seed: self.seed,
            mpe: MpeConfig {
                initial_rot_step: self.rot_step,
                initial_trans_step: self.trans_step,
                rot_threshold: self.rot_eps,
                trans_threshold: self.trans_eps,
                max_iterations: self.max_mpe_iterations,
                force_params: ForceParams {
                    softening: self.softening,
                    strength: self.strength,
                },
                ..MpeConfig::default()
            },
            icp: IcpConfig {
                max_iterations: self.max_icp_iterations,
                mse_tolerance: self.mse_tolerance,
                trim_ratio: self.trim_ratio,
            },
        };
        config
            .mpe
            .validate()
            .and_then(|_| config.icp.validate())
            .map_err(|e| ToolError::Usage(e.to_string()))?;
        Ok(config)
    }
}

/// Perturbation parameters shared by `perturb` and the bench commands.
#[derive(Debug, Args)]
struct PerturbFlags {
    /// Maximum random rotation, degrees.
    #[arg(long, default_value_t = 90.0)]
    max_angle_deg: f64,
    /// Maximum random translation (units of the cloud; normalized
    /// clouds read this as a fraction of the bounding diagonal).
    #[arg(long, default_value_t = 0.3)]
    max_translation: f64,
}

/// Reference cloud source for the bench commands: a file, or a built-in
/// synthetic shell.
#[derive(Debug, Args)]
struct ReferenceSource {
    /// Reference cloud file (.ply or .xyz). When omitted a synthetic
    /// asymmetric shell is used.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Point count of the synthetic reference.
    #[arg(long, default_value_t = 1889)]
    synthetic_points: usize,
    /// Seed of the synthetic reference.
    #[arg(long, default_value_t = 7)]
    synthetic_seed: u64,
}

impl ReferenceSource {
    fn load(&self) -> Result<PointCloud> {
        match &self.reference {
            Some(path) => io::read_cloud(path),
            None => {
                if self.synthetic_points < 4 {
                    return Err(ToolError::Usage(
                        "--synthetic-points must be at least 4".into(),
                    ));
                }
                Ok(asymmetric_shell(self.synthetic_points, self.synthetic_seed))
            }
        }
    }
}

#[derive(Debug, Args)]
struct RegisterArgs {
    /// Template (moving) cloud file.
    #[arg(long)]
    template: PathBuf,
    /// Reference (fixed) cloud file.
    #[arg(long)]
    reference: PathBuf,
    /// Output report JSON (contains the pose).
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-iteration coarse-stage trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Ground-truth registration pose JSON; adds error metrics to the
    /// report.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Distance threshold for counting correct matches against the
    /// ground truth (requires index-corresponded clouds).
    #[arg(long, default_value_t = 1e-3)]
    precision_threshold: f64,
    #[command(flatten)]
    mpl: MplFlags,
}

#[derive(Debug, Args)]
struct BenchNoiseArgs {
    /// Noise levels as `start:end:step` or a comma list.
    #[arg(long, default_value = "0.01:0.15:0.01")]
    sigmas: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value = "bench_noise.csv")]
    out_csv: PathBuf,
    #[arg(long, default_value = "bench_noise.json")]
    out_json: PathBuf,
    #[command(flatten)]
    source: ReferenceSource,
    #[command(flatten)]
    perturb: PerturbFlags,
    #[command(flatten)]
    mpl: MplFlags,
}

#[derive(Debug, Args)]
struct BenchOutliersArgs {
    /// Outlier counts as `start:end:step` or a comma list.
    #[arg(long, default_value = "0:3000:500")]
    counts: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Gaussian noise added on top of every level.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value = "bench_outliers.csv")]
    out_csv: PathBuf,
    #[arg(long, default_value = "bench_outliers.json")]
    out_json: PathBuf,
    #[command(flatten)]
    source: ReferenceSource,
    #[command(flatten)]
    perturb: PerturbFlags,
    #[command(flatten)]
    mpl: MplFlags,
}

#[derive(Debug, Args)]
struct BenchSamplingArgs {
    /// Sampling ratios as `start:end:step` or a comma list.
    #[arg(long, default_value = "0.05:0.80:0.05")]
    ratios: String,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Gaussian noise added to every trial.
    #[arg(long, default_value_t = 0.005)]
    sigma: f64,
    #[arg(long, default_value = "bench_sampling.csv")]
    out_csv: PathBuf,
    #[arg(long, default_value = "bench_sampling.json")]
    out_json: PathBuf,
    #[command(flatten)]
    source: ReferenceSource,
    #[command(flatten)]
    perturb: PerturbFlags,
    #[command(flatten)]
    mpl: MplFlags,
}

#[derive(Debug, Args)]
struct ToyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outlier distance as a multiple of the cloud diameter; 0 injects
    /// no outlier pair.
    #[arg(long, default_value_t = 10.0)]
    outlier_factor: f64,
    #[arg(long, default_value = "toy_p2.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    /// Input cloud file.
    #[arg(long)]
    input: PathBuf,
    /// Output perturbed cloud file.
    #[arg(long)]
    out: PathBuf,
    /// Output ground-truth registration pose JSON (the pose that maps
    /// the perturbed cloud back onto the input).
    #[arg(long)]
    gt_out: Option<PathBuf>,
    /// Gaussian displacement sigma.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Uniform outliers appended inside the transformed cloud's
    /// bounding cube.
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    perturb: PerturbFlags,
}

/// Parses `start:end:step` (inclusive end, within half a step) or a
/// comma-separated list.
fn parse_values(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| ToolError::Usage(format!("cannot parse '{text}': {msg}"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:end:step"));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("non-numeric value"));
        let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step <= 0.0 || end < start {
            return Err(bad("need end >= start and step > 0"));
        }
        let count = ((end - start) / step + 0.5).floor() as usize + 1;
        (0..count).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("non-numeric value")))
            .collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(bad("empty list"));
    }
    Ok(values)
}

fn parse_counts(text: &str) -> Result<Vec<usize>> {
    parse_values(text)?
        .into_iter()
        .map(|v| {
            if v < 0.0 || v.fract() != 0.0 {
                Err(ToolError::Usage(format!(
                    "outlier counts must be non-negative integers (got {v})"
                )))
            } else {
                Ok(v as usize)
            }
        })
        .collect()
}

fn worker_threads() -> usize {
    std::env::var("MPE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn sweep_settings(
    trials: usize,
    perturb: &PerturbFlags,
    sigma: f64,
    mpl: &MplFlags,
) -> Result<SweepSettings> {
    Ok(SweepSettings {
        trials,
        rotation_angle_range: perturb.max_angle_deg.to_radians(),
        translation_range: perturb.max_translation,
        gaussian_sigma: sigma,
        outlier_count: 0,
        precision_threshold: 1e-3,
        mpl: mpl.to_config()?,
        threads: worker_threads(),
    })
}

fn write_sweep_outputs(
    report: &ExperimentReport,
    label: &str,
    out_csv: &std::path::Path,
    out_json: &std::path::Path,
    verbose: u8,
) -> Result<()> {
    io::write_experiment_csv(report, out_csv)?;
    io::write_experiment_json(report, label, out_json)?;
    if verbose > 0 {
        for agg in &report.aggregates {
            eprintln!(
                "{label} {}: mean rms residual {:.6}, mean rotation error {:.4} deg, mean time {:.1} ms",
                agg.condition, agg.mean_rms_residual, agg.mean_rotation_error_deg,
                agg.mean_total_ms
            );
        }
    }
    println!(
        "{} rows -> {}, summary -> {}",
        report.rows.len(),
        out_csv.display(),
        out_json.display()
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Register(args) => {
            let template = io::read_cloud(&args.template)?;
            let reference = io::read_cloud(&args.reference)?;
            let config = args.mpl.to_config()?;
            let (pose, report) = mpe_core::mpl_register(&template, &reference, &config)?;

            let ground_truth = match &args.gt {
                Some(path) => {
                    let gt_pose = io::read_pose_json(path)?;
                    let precision = (template.len() >= reference.len()).then(|| {
                        // gt_pose maps template onto reference, so the
                        // forward motion the precision metric wants is
                        // its inverse
                        match_precision(
                            &pose,
                            &template,
                            &reference,
                            &gt_pose.inverse(),
                            args.precision_threshold,
                        )
                    });
                    Some(io::GroundTruthJson {
                        rotation_error_deg: rotation_error_deg(&gt_pose, &pose),
                        translation_error: translation_error(
                            gt_pose.translation,
                            pose.translation,
                        ),
                        precision,
                    })
                }
                None => None,
            };

            if let Some(trace_path) = &args.trace {
                io::write_trace_csv(&report.mpe_trace, trace_path)?;
            }
            io::write_json(&io::report_to_json(&report, ground_truth), &args.out)?;
            if verbose > 0 {
                eprintln!(
                    "coarse {} iterations, refine {} iterations, trimmed mse {:.3e}, {:.1} ms",
                    report.mpe.iterations,
                    report.icp_iterations,
                    report.final_trimmed_mse,
                    report.total_ms
                );
            }
            println!("report -> {}", args.out.display());
            Ok(())
        }
        Command::BenchNoise(args) => {
            let reference = args.source.load()?;
            let sigmas = parse_values(&args.sigmas)?;
            let settings = sweep_settings(args.trials, &args.perturb, 0.0, &args.mpl)?;
            let report = run_noise_sweep(&reference, &sigmas, &settings)?;
            write_sweep_outputs(&report, "sigma", &args.out_csv, &args.out_json, verbose)
        }
        Command::BenchOutliers(args) => {
            let reference = args.source.load()?;
            let counts = parse_counts(&args.counts)?;
            let settings = sweep_settings(args.trials, &args.perturb, args.sigma, &args.mpl)?;
            let report = run_outlier_sweep(&reference, &counts, &settings)?;
            write_sweep_outputs(&report, "outliers", &args.out_csv, &args.out_json, verbose)
        }
        Command::BenchSampling(args) => {
            let reference = args.source.load()?;
            let ratios = parse_values(&args.ratios)?;
            let settings = sweep_settings(args.trials, &args.perturb, args.sigma, &args.mpl)?;
            let report = run_sampling_sweep(&reference, &ratios, &settings)?;
            write_sweep_outputs(&report, "ratio", &args.out_csv, &args.out_json, verbose)
        }
        Command::ToyP2(args) => {
            let factor = (args.outlier_factor > 0.0).then_some(args.outlier_factor);
            let record = run_p2_toy_configured(args.seed, factor)?;
            io::write_json(&io::p2_toy_to_json(&record), &args.out)?;
            println!(
                "robust rotation error {:.4} deg vs least-squares {:.4} deg -> {}",
                record.p2_rotation_error_deg,
                record.l2_rotation_error_deg,
                args.out.display()
            );
            Ok(())
        }
        Command::Perturb(args) => {
            let cloud = io::read_cloud(&args.input)?;
            let spec = PerturbationSpec {
                rotation_angle_range: args.perturb.max_angle_deg.to_radians(),
                translation_range: args.perturb.max_translation,
                gaussian_sigma: args.sigma,
                outlier_count: args.outliers,
                seed: args.seed,
            };
            let (perturbed, motion) = perturb(&cloud, &spec)?;
            io::write_cloud(&perturbed, &args.out)?;
            if let Some(gt_path) = &args.gt_out {
                io::write_pose_json(&motion.inverse(), gt_path)?;
            }
            println!(
                "perturbed cloud ({} points) -> {}",
                perturbed.len(),
                args.out.display()
            );
            Ok(())
        }
    }
}
