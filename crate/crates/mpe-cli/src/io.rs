//! Cloud ingestion (ASCII PLY and XYZ text) and result persistence
//! (pose/report JSON, trace CSV, experiment CSV/JSON).
//!
//! The exact grammars and schemas are documented in `docs/FORMATS.md`.

use std::fs;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use mpe_core::{
    MpeStatus, MpeTrace, NormalizationRecord, PointCloud, Quat, RegistrationReport,
    RigidTransform, Vec3,
};

use crate::error::{Result, ToolError};
use crate::harness::{ConditionAggregate, ExperimentReport};

/// Supported on-disk cloud formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    PlyAscii,
    Xyz,
}

impl Format {
    /// Infers the format from the file extension (`.ply` or anything
    /// else as XYZ text).
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => Format::PlyAscii,
            _ => Format::Xyz,
        }
    }
}

/// What was (or would be) read from a cloud file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudFile {
    pub path: std::path::PathBuf,
    pub format: Format,
    pub point_count: usize,
}

impl CloudFile {
    /// Parses the file and records its format and point count.
    pub fn probe(path: &Path) -> Result<CloudFile> {
        let format = Format::from_path(path);
        let cloud = read_cloud_as(path, format)?;
        Ok(CloudFile {
            path: path.to_path_buf(),
            format,
            point_count: cloud.len(),
        })
    }
}

/// Reads a cloud, inferring the format from the extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    read_cloud_as(path, Format::from_path(path))
}

/// Reads a cloud in an explicit format.
pub fn read_cloud_as(path: &Path, format: Format) -> Result<PointCloud> {
    let file = File::open(path).map_err(|e| ToolError::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        Format::PlyAscii => read_ply(path, reader),
        Format::Xyz => read_xyz(path, reader),
    }
}

/// Writes a cloud, inferring the format from the extension.
pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    write_cloud_as(cloud, path, Format::from_path(path))
}

pub fn write_cloud_as(cloud: &PointCloud, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| ToolError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = match format {
        Format::PlyAscii => write_ply(cloud, &mut w),
        Format::Xyz => write_xyz(cloud, &mut w),
    };
    result
        .and_then(|_| w.flush())
        .map_err(|e| ToolError::io(path, e))
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn read_ply(path: &Path, reader: impl BufRead) -> Result<PointCloud> {
    let mut lines = reader.lines().enumerate();

    // header
    let mut header_lines = Vec::new();
    let mut saw_end = false;
    for (i, line) in lines.by_ref() {
        let line = line.map_err(|e| ToolError::io(path, e))?;
        let trimmed = line.trim().to_string();
        if trimmed == "end_header" {
            saw_end = true;
            break;
        }
        header_lines.push((i + 1, trimmed));
    }
    if header_lines.is_empty() || header_lines[0].1 != "ply" {
        return Err(ToolError::parse(path, 1, "missing 'ply' magic"));
    }
    if !saw_end {
        return Err(ToolError::parse(
            path,
            header_lines.last().map_or(1, |(n, _)| *n),
            "missing 'end_header'",
        ));
    }

    let mut elements: Vec<PlyElement> = Vec::new();
    let mut format_seen = false;
    for (n, line) in &header_lines[1..] {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("format") => {
                let rest: Vec<&str> = tokens.collect();
                if rest != ["ascii", "1.0"] {
                    return Err(ToolError::parse(
                        path,
                        *n,
                        format!("unsupported format '{}' (only ascii 1.0)", rest.join(" ")),
                    ));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| ToolError::parse(path, *n, "element without a name"))?;
                let count: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| ToolError::parse(path, *n, "element without a valid count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| ToolError::parse(path, *n, "property before any element"))?;
                let rest: Vec<&str> = tokens.collect();
                if rest.first() == Some(&"list") {
                    // list properties have variable arity; only reject
                    // them on the vertex element, where they would break
                    // positional parsing
                    if element.name == "vertex" {
                        return Err(ToolError::parse(
                            path,
                            *n,
                            "list property on vertex element is not supported",
                        ));
                    }
                    element.properties.push("list".to_string());
                } else {
                    let prop_name = rest
                        .last()
                        .ok_or_else(|| ToolError::parse(path, *n, "property without a name"))?;
                    element.properties.push(prop_name.to_string());
                }
            }
            Some(other) => {
                return Err(ToolError::parse(
                    path,
                    *n,
                    format!("unrecognized header keyword '{other}'"),
                ));
            }
            None => {}
        }
    }
    if !format_seen {
        return Err(ToolError::parse(path, 1, "missing 'format ascii 1.0' line"));
    }

    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| ToolError::parse(path, 1, "no 'element vertex' in header"))?;
    let vertex = &elements[vertex_pos];
    let coord_index = |name: &str| -> Result<usize> {
        vertex
            .properties
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| {
                ToolError::parse(path, 1, format!("vertex element has no '{name}' property"))
            })
    };
    let (ix, iy, iz) = (coord_index("x")?, coord_index("y")?, coord_index("z")?);
    let needed = ix.max(iy).max(iz) + 1;

    // data rows: elements appear in declaration order
    let mut data = lines.filter_map(|(i, line)| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(ToolError::io(path, e))),
    });

    let mut skip_rows = 0usize;
    for element in &elements[..vertex_pos] {
        skip_rows += element.count;
    }
    let mut last_line = 0usize;
    for _ in 0..skip_rows {
        match data.next() {
            Some(row) => last_line = row?.0,
            None => {
                return Err(ToolError::parse(
                    path,
                    last_line + 1,
                    "file ends before vertex data",
                ))
            }
        }
    }

    let mut points = Vec::with_capacity(vertex.count);
    for k in 0..vertex.count {
        let (n, line) = match data.next() {
            Some(row) => row?,
            None => {
                return Err(ToolError::parse(
                    path,
                    last_line + 1,
                    format!(
                        "declared {} vertices but found only {k}",
                        vertex.count
                    ),
                ));
            }
        };
        last_line = n;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < needed {
            return Err(ToolError::parse(
                path,
                n,
                format!("expected at least {needed} values, found {}", tokens.len()),
            ));
        }
        let parse = |idx: usize| -> Result<f64> {
            tokens[idx]
                .parse()
                .map_err(|_| ToolError::parse(path, n, format!("non-numeric token '{}'", tokens[idx])))
        };
        points.push(Vec3::new(parse(ix)?, parse(iy)?, parse(iz)?));
    }

    // when vertex is the only (or last) element, trailing data rows mean
    // the declared count was wrong
    if vertex_pos + 1 == elements.len() {
        if let Some(row) = data.next() {
            let (n, _) = row?;
            return Err(ToolError::parse(
                path,
                n,
                format!("more data rows than the declared {} vertices", vertex.count),
            ));
        }
    }

    PointCloud::new(points).map_err(ToolError::from)
}

fn read_xyz(path: &Path, reader: impl BufRead) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| ToolError::io(path, e))?;
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < 3 {
            return Err(ToolError::parse(
                path,
                n,
                format!("expected 3 coordinates, found {}", tokens.len()),
            ));
        }
        let parse = |idx: usize| -> Result<f64> {
            tokens[idx]
                .parse()
                .map_err(|_| ToolError::parse(path, n, format!("non-numeric token '{}'", tokens[idx])))
        };
        points.push(Vec3::new(parse(0)?, parse(1)?, parse(2)?));
    }
    PointCloud::new(points).map_err(ToolError::from)
}

fn write_ply(cloud: &PointCloud, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "end_header")?;
    for p in cloud.points() {
        writeln!(w, "{:.9e} {:.9e} {:.9e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn write_xyz(cloud: &PointCloud, w: &mut impl Write) -> std::io::Result<()> {
    for p in cloud.points() {
        writeln!(w, "{:.9e} {:.9e} {:.9e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Pose as unit quaternion `(w, x, y, z)` plus translation, in the
/// units of the input clouds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseJson {
    pub rotation_quaternion: QuatJson,
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuatJson {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PoseJson {
    pub fn from_transform(pose: &RigidTransform) -> PoseJson {
        let q = pose.rotation_quaternion();
        PoseJson {
            rotation_quaternion: QuatJson {
                w: q.w,
                x: q.x,
                y: q.y,
                z: q.z,
            },
            translation: [pose.translation.x, pose.translation.y, pose.translation.z],
        }
    }

    pub fn to_transform(&self) -> RigidTransform {
        let q = self.rotation_quaternion;
        let rotation = Quat::new(q.w, q.x, q.y, q.z).normalized().to_matrix();
        RigidTransform::from_parts(
            rotation,
            Vec3::new(
                self.translation[0],
                self.translation[1],
                self.translation[2],
            ),
        )
    }
}

pub fn write_pose_json(pose: &RigidTransform, path: &Path) -> Result<()> {
    write_json(&PoseJson::from_transform(pose), path)
}

pub fn read_pose_json(path: &Path) -> Result<RigidTransform> {
    let text = fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
    let parsed: PoseJson = serde_json::from_str(&text).map_err(|e| ToolError::Json {
        path: path.into(),
        source: e,
    })?;
    Ok(parsed.to_transform())
}

/// Registration report as persisted by `mpe register`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportJson {
    pub pose: PoseJson,
    pub normalization: NormalizationJson,
    pub template_sample: usize,
    pub reference_sample: usize,
    pub mpe: MpeSummaryJson,
    pub icp: IcpSummaryJson,
    pub timings_ms: TimingsJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizationJson {
    pub centroid: [f64; 3],
    pub diagonal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpeSummaryJson {
    pub iterations: usize,
    pub status: String,
    pub final_rot_step: f64,
    pub final_trans_step: f64,
    pub final_p2_energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IcpSummaryJson {
    pub iterations: usize,
    pub converged: bool,
    pub final_trimmed_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingsJson {
    pub prepare: f64,
    pub mpe: f64,
    pub icp: f64,
    pub total: f64,
}

/// Errors against a user-supplied ground-truth pose.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthJson {
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
}

pub fn report_to_json(
    report: &RegistrationReport,
    ground_truth: Option<GroundTruthJson>,
) -> ReportJson {
    let NormalizationRecord { centroid, diagonal } = report.normalization;
    ReportJson {
        pose: PoseJson::from_transform(&report.pose),
        normalization: NormalizationJson {
            centroid: [centroid.x, centroid.y, centroid.z],
            diagonal,
        },
        template_sample: report.template_sample,
        reference_sample: report.reference_sample,
        mpe: MpeSummaryJson {
            iterations: report.mpe.iterations,
            status: status_name(report.mpe.status).to_string(),
            final_rot_step: report.mpe.final_rot_step,
            final_trans_step: report.mpe.final_trans_step,
            final_p2_energy: report.mpe.final_p2_energy,
        },
        icp: IcpSummaryJson {
            iterations: report.icp_iterations,
            converged: report.icp_converged,
            final_trimmed_mse: report.final_trimmed_mse,
        },
        timings_ms: TimingsJson {
            prepare: report.prepare_ms,
            mpe: report.mpe_ms,
            icp: report.icp_ms,
            total: report.total_ms,
        },
        ground_truth,
    }
}

fn status_name(status: MpeStatus) -> &'static str {
    match status {
        MpeStatus::Converged => "converged",
        MpeStatus::ForcesVanished => "forces-vanished",
        MpeStatus::MaxIterations => "max-iterations",
    }
}

/// Writes the per-iteration solver trace:
/// `iteration,rot_step,trans_step,rot_flag,trans_flag,p2_energy,qw,qx,qy,qz,tx,ty,tz`.
/// Trace poses are in normalized units.
pub fn write_trace_csv(trace: &MpeTrace, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| ToolError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut inner = || -> std::io::Result<()> {
        writeln!(
            w,
            "iteration,rot_step,trans_step,rot_flag,trans_flag,p2_energy,qw,qx,qy,qz,tx,ty,tz"
        )?;
        for rec in &trace.iterations {
            let q = rec.pose.rotation_quaternion();
            let t = rec.pose.translation;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                rec.iteration,
                rec.rot_step,
                rec.trans_step,
                rec.rot_flag,
                rec.trans_flag,
                rec.p2_energy,
                q.w,
                q.x,
                q.y,
                q.z,
                t.x,
                t.y,
                t.z
            )?;
        }
        w.flush()
    };
    inner().map_err(|e| ToolError::io(path, e))
}

pub const EXPERIMENT_CSV_HEADER: &str = "trial_id,condition,seed,rotation_error_deg,translation_error,rms_inlier_residual,precision,prepare_ms,mpe_ms,icp_ms,total_ms,mpe_iterations,icp_iterations,converged";

/// Writes one row per trial in a fixed column order.
pub fn write_experiment_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| ToolError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut inner = || -> std::io::Result<()> {
        writeln!(w, "{EXPERIMENT_CSV_HEADER}")?;
        for row in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.trial_id,
                row.condition,
                row.seed,
                row.rotation_error_deg,
                row.translation_error,
                row.rms_inlier_residual,
                row.precision,
                row.prepare_ms,
                row.mpe_ms,
                row.icp_ms,
                row.total_ms,
                row.mpe_iterations,
                row.icp_iterations,
                row.converged
            )?;
        }
        w.flush()
    };
    inner().map_err(|e| ToolError::io(path, e))
}

/// Per-condition aggregate summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummaryJson {
    pub condition_label: String,
    pub trials_per_condition: usize,
    pub aggregates: Vec<ConditionAggregate>,
}

pub fn write_experiment_json(
    report: &ExperimentReport,
    condition_label: &str,
    path: &Path,
) -> Result<()> {
    let summary = ExperimentSummaryJson {
        condition_label: condition_label.to_string(),
        trials_per_condition: report.trials_per_condition,
        aggregates: report.aggregates.clone(),
    };
    write_json(&summary, path)
}

/// JSON form of the robust-versus-least-squares toy comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct P2ToyJson {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlier_distance_factor: Option<f64>,
    pub gt_rotation_deg: f64,
    pub l2_pose: PoseJson,
    pub p2_pose: PoseJson,
    pub l2_rotation_error_deg: f64,
    pub p2_rotation_error_deg: f64,
    pub l2_inlier_rms: f64,
    pub p2_inlier_rms: f64,
}

pub fn p2_toy_to_json(record: &crate::harness::P2ToyRecord) -> P2ToyJson {
    P2ToyJson {
        seed: record.seed,
        outlier_distance_factor: record.outlier_distance_factor,
        gt_rotation_deg: record.gt_rotation_deg,
        l2_pose: PoseJson::from_transform(&record.l2_pose),
        p2_pose: PoseJson::from_transform(&record.p2_pose),
        l2_rotation_error_deg: record.l2_rotation_error_deg,
        p2_rotation_error_deg: record.p2_rotation_error_deg,
        l2_inlier_rms: record.l2_inlier_rms,
        p2_inlier_rms: record.p2_inlier_rms,
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| ToolError::Json {
        path: path.into(),
        source: e,
    })?;
    fs::write(path, text + "\n").map_err(|e| ToolError::io(path, e))
}
