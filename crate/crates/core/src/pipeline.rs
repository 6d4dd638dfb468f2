//! Config-driven orchestration of the stages.
//!
//! Every stage reads its inputs from the configured paths or from
//! artifacts of earlier stages in the output directory, and writes its own
//! artifacts there. Running the stages one by one therefore yields the same
//! bytes as [`run_pipeline`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::contour::{extract_contour, sample_curve, ContourParams, CurvatureThreshold, PolarCurveModel};
use crate::error::{Error, Result};
use crate::evaluation::{self, gap_analysis, generate_specimen, virtual_cut, SpecimenParams};
use crate::mesh::{self, MeshFormat, SpatialIndex, TriangleMesh};
use crate::par::Execution;
use crate::registration::{self, IcpParams, LandmarkSet};
use crate::toolpath::{self, OffsetMode, ToolParams, ToolpathFormat};
use crate::transform::{Frame, RigidTransform};

pub mod artifacts {
    pub const OUTER_LAYER: &str = "outer_layer.ply";
    pub const SCAN_TO_CT: &str = "scan_to_ct.txt";
    pub const CONTOUR_POINTS: &str = "contour_points.xyz";
    pub const CURVE_MODEL: &str = "curve_model.txt";
    pub const TOOLPATH: &str = "toolpath.txt";
    pub const RESIZED_IMPLANT: &str = "resized_implant.ply";
    pub const GAP_REPORT: &str = "gap_report.txt";
    pub const MANIFEST: &str = "manifest.txt";
}

/// Name of the config file `synthesize` writes next to a specimen.
pub const SPECIMEN_CONFIG: &str = "pipeline.ini";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scan: PathBuf,
    pub ct: PathBuf,
    pub implant: PathBuf,
    pub landmarks_scan: PathBuf,
    pub landmarks_ct: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub parallel: bool,
    pub icp: IcpParams,
    pub contour: ContourParams,
    /// Points sampled from the fitted curve before spline conversion.
    pub curve_samples: usize,
    pub tool: ToolParams,
    pub step: f64,
    pub n_ctrl: usize,
    pub offset: OffsetMode,
    pub format: ToolpathFormat,
    pub simulate_cut: bool,
    pub n_samples: usize,
    pub specimen: SpecimenParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            scan: PathBuf::from(evaluation::specimen::files::SCAN),
            ct: PathBuf::from(evaluation::specimen::files::SKULL),
            implant: PathBuf::from(evaluation::specimen::files::IMPLANT),
            landmarks_scan: PathBuf::from(evaluation::specimen::files::SCAN_LANDMARKS),
            landmarks_ct: PathBuf::from(evaluation::specimen::files::FIDUCIALS),
            out_dir: PathBuf::from("out"),
            seed: 0,
            parallel: cfg!(feature = "parallel"),
            icp: IcpParams::default(),
            contour: ContourParams::default(),
            curve_samples: 720,
            tool: ToolParams::default(),
            step: toolpath::DEFAULT_STEP,
            n_ctrl: toolpath::DEFAULT_N_CTRL,
            offset: OffsetMode::default(),
            format: ToolpathFormat::WaypointText,
            simulate_cut: true,
            n_samples: evaluation::gap::DEFAULT_SAMPLES,
            specimen: SpecimenParams::default(),
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "paths",
        &["scan", "ct", "implant", "landmarks_scan", "landmarks_ct", "out_dir"],
    ),
    ("run", &["seed", "parallel"]),
    (
        "registration",
        &["max_iters", "rms_tol", "trim_fraction", "divergence_gate"],
    ),
    (
        "contour",
        &[
            "curvature_percentile",
            "curvature_threshold",
            "neighbor_radius",
            "min_cluster_fraction",
            "knn",
            "degree",
            "curve_samples",
        ],
    ),
    (
        "toolpath",
        &[
            "tool_radius",
            "tilt_angle",
            "cut_depth",
            "step",
            "n_ctrl",
            "offset_mode",
            "format",
        ],
    ),
    ("evaluation", &["simulate_cut", "n_samples"]),
    (
        "specimen",
        &[
            "shell_radius",
            "shell_thickness",
            "base_radius",
            "harmonics",
            "implant_margin",
            "noise",
            "landmark_noise",
        ],
    ),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS.iter().find(|(_, keys)| keys.contains(&key)).map(|(s, _)| *s)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    /// Sets one key. Dashes and underscores are interchangeable. Relative
    /// paths are taken relative to `base` when given.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let key = key.replace('-', "_");
        let value = value.trim();
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        match key.as_str() {
            "scan" => self.scan = path(value),
            "ct" => self.ct = path(value),
            "implant" => self.implant = path(value),
            "landmarks_scan" => self.landmarks_scan = path(value),
            "landmarks_ct" => self.landmarks_ct = path(value),
            "out_dir" => self.out_dir = path(value),
            "seed" => self.seed = num(&key, value)?,
            "parallel" => self.parallel = flag(&key, value)?,
            "max_iters" => self.icp.max_iters = num(&key, value)?,
            "rms_tol" => self.icp.rms_tol = num(&key, value)?,
            "trim_fraction" => self.icp.trim_fraction = num(&key, value)?,
            "divergence_gate" => self.icp.divergence_gate = num(&key, value)?,
            "curvature_percentile" => self.contour.threshold = CurvatureThreshold::Percentile(num(&key, value)?),
            "curvature_threshold" => self.contour.threshold = CurvatureThreshold::Absolute(num(&key, value)?),
            "neighbor_radius" => {
                self.contour.neighbor_radius = if value == "auto" { None } else { Some(num(&key, value)?) }
            }
            "min_cluster_fraction" => self.contour.min_cluster_fraction = num(&key, value)?,
            "knn" => self.contour.k = num(&key, value)?,
            "degree" => self.contour.degree = num(&key, value)?,
            "curve_samples" => self.curve_samples = num(&key, value)?,
            "tool_radius" => self.tool.tool_radius = num(&key, value)?,
            "tilt_angle" => self.tool.tilt_angle = num(&key, value)?,
            "cut_depth" => self.tool.cut_depth = num(&key, value)?,
            "step" => self.step = num(&key, value)?,
            "n_ctrl" => self.n_ctrl = num(&key, value)?,
            "offset_mode" => {
                self.offset = match value {
                    "curve-normal" => OffsetMode::CurveNormal,
                    "radial" => OffsetMode::Radial,
                    _ => return Err(Error::Config(format!("offset_mode: unknown mode '{value}'"))),
                }
            }
            "format" => self.format = value.parse()?,
            "simulate_cut" => self.simulate_cut = flag(&key, value)?,
            "n_samples" => self.n_samples = num(&key, value)?,
            "shell_radius" => self.specimen.shell_radius = num(&key, value)?,
            "shell_thickness" => self.specimen.shell_thickness = num(&key, value)?,
            "base_radius" => self.specimen.contour_base_radius = num(&key, value)?,
            "harmonics" => self.specimen.harmonic_amplitudes = list(&key, value)?,
            "implant_margin" => self.specimen.implant_margin = num(&key, value)?,
            "noise" => self.specimen.noise_sigma = num(&key, value)?,
            "landmark_noise" => self.specimen.landmark_noise = num(&key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines under `[section]` headers on top of the
    /// defaults. `#` and `;` start comments.
    pub fn from_ini(text: &str, base: Option<&Path>) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        let mut section: Option<String> = None;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.iter().any(|(s, _)| *s == name) {
                    return Err(Error::Config(format!("line {}: unknown section [{name}]", no + 1)));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            let key = key.trim().replace('-', "_");
            if let (Some(s), Some(owner)) = (&section, section_of(&key)) {
                if s != owner {
                    return Err(Error::Config(format!(
                        "line {}: key '{key}' belongs in [{owner}]",
                        no + 1
                    )));
                }
            }
            cfg.set(&key, value, base)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        PipelineConfig::from_ini(&text, path.parent())
    }

    fn value_of(&self, key: &str) -> Option<String> {
        let p = |p: &PathBuf| p.display().to_string();
        Some(match key {
            "scan" => p(&self.scan),
            "ct" => p(&self.ct),
            "implant" => p(&self.implant),
            "landmarks_scan" => p(&self.landmarks_scan),
            "landmarks_ct" => p(&self.landmarks_ct),
            "out_dir" => p(&self.out_dir),
            "seed" => self.seed.to_string(),
            "parallel" => self.parallel.to_string(),
            "max_iters" => self.icp.max_iters.to_string(),
            "rms_tol" => self.icp.rms_tol.to_string(),
            "trim_fraction" => self.icp.trim_fraction.to_string(),
            "divergence_gate" => self.icp.divergence_gate.to_string(),
            "curvature_percentile" => match self.contour.threshold {
                CurvatureThreshold::Percentile(q) => q.to_string(),
                CurvatureThreshold::Absolute(_) => return None,
            },
            "curvature_threshold" => match self.contour.threshold {
                CurvatureThreshold::Absolute(v) => v.to_string(),
                CurvatureThreshold::Percentile(_) => return None,
            },
            "neighbor_radius" => self
                .contour
                .neighbor_radius
                .map_or_else(|| "auto".to_string(), |r| r.to_string()),
            "min_cluster_fraction" => self.contour.min_cluster_fraction.to_string(),
            "knn" => self.contour.k.to_string(),
            "degree" => self.contour.degree.to_string(),
            "curve_samples" => self.curve_samples.to_string(),
            "tool_radius" => self.tool.tool_radius.to_string(),
            "tilt_angle" => self.tool.tilt_angle.to_string(),
            "cut_depth" => self.tool.cut_depth.to_string(),
            "step" => self.step.to_string(),
            "n_ctrl" => self.n_ctrl.to_string(),
            "offset_mode" => match self.offset {
                OffsetMode::CurveNormal => "curve-normal".to_string(),
                OffsetMode::Radial => "radial".to_string(),
            },
            "format" => self.format.to_string(),
            "simulate_cut" => self.simulate_cut.to_string(),
            "n_samples" => self.n_samples.to_string(),
            "shell_radius" => self.specimen.shell_radius.to_string(),
            "shell_thickness" => self.specimen.shell_thickness.to_string(),
            "base_radius" => self.specimen.contour_base_radius.to_string(),
            "harmonics" => join(&self.specimen.harmonic_amplitudes),
            "implant_margin" => self.specimen.implant_margin.to_string(),
            "noise" => self.specimen.noise_sigma.to_string(),
            "landmark_noise" => self.specimen.landmark_noise.to_string(),
            _ => return None,
        })
    }

    /// Canonical INI text; [`PipelineConfig::from_ini`] reads it back.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        for (i, (section, keys)) in SECTIONS.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            let _ = writeln!(s, "[{section}]");
            for key in keys.iter() {
                if let Some(v) = self.value_of(key) {
                    let _ = writeln!(s, "{key} = {v}");
                }
            }
        }
        s
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    /// Range checks on every numeric setting.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.tool.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.step > 0.0) {
            return bad(format!("step {} must be > 0", self.step));
        }
        if self.n_ctrl < 4 {
            return bad(format!("n_ctrl {} below 4", self.n_ctrl));
        }
        if self.contour.degree == 0 {
            return bad("degree must be at least 1".into());
        }
        if self.curve_samples < self.n_ctrl {
            return bad(format!(
                "curve_samples {} below n_ctrl {}",
                self.curve_samples, self.n_ctrl
            ));
        }
        if self.contour.k == 0 {
            return bad("knn must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.contour.min_cluster_fraction) {
            return bad(format!(
                "min_cluster_fraction {} outside [0, 1]",
                self.contour.min_cluster_fraction
            ));
        }
        match self.contour.threshold {
            CurvatureThreshold::Percentile(q) if !(0.0..=1.0).contains(&q) => {
                return bad(format!("curvature_percentile {q} outside [0, 1]"))
            }
            CurvatureThreshold::Absolute(v) if !(v >= 0.0) => return bad(format!("curvature_threshold {v} below 0")),
            _ => {}
        }
        if let Some(r) = self.contour.neighbor_radius {
            if !(r > 0.0) {
                return bad(format!("neighbor_radius {r} must be > 0"));
            }
        }
        if self.icp.max_iters == 0 || !(self.icp.rms_tol > 0.0) || !(self.icp.divergence_gate > 0.0) {
            return bad("registration: max_iters, rms_tol and divergence_gate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.icp.trim_fraction) {
            return bad(format!("trim_fraction {} outside [0, 1)", self.icp.trim_fraction));
        }
        if self.n_samples < 3 {
            return bad(format!("n_samples {} below 3", self.n_samples));
        }
        self.specimen.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks that the input files of `stages` exist.
    pub fn validate_inputs(&self, stages: &[Stage]) -> Result<()> {
        for stage in stages {
            for (name, path) in stage.inputs(self) {
                if !path.is_file() {
                    return Err(Error::Config(format!(
                        "{name} input '{}' not found (needed by {})",
                        path.display(),
                        stage.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stages a full run executes.
    pub fn stages(&self) -> Vec<Stage> {
        let mut s = vec![Stage::ExtractOuter, Stage::Register, Stage::Contour, Stage::Toolpath];
        if self.simulate_cut {
            s.extend([Stage::SimulateCut, Stage::Evaluate]);
        }
        s
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Settings for the specimens [`synthesize`] writes: absolute curvature
    /// threshold and trimmed ICP for noisy scans with a hole wall.
    pub fn for_specimens() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.contour.threshold = CurvatureThreshold::Absolute(0.35);
        cfg.icp.trim_fraction = 0.15;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    ExtractOuter,
    Register,
    Contour,
    Toolpath,
    SimulateCut,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::ExtractOuter => "extract-outer",
            Stage::Register => "register",
            Stage::Contour => "contour",
            Stage::Toolpath => "toolpath",
            Stage::SimulateCut => "simulate-cut",
            Stage::Evaluate => "evaluate",
        }
    }

    /// Configured input files (artifacts of earlier stages excluded).
    fn inputs(self, cfg: &PipelineConfig) -> Vec<(&'static str, &Path)> {
        match self {
            Stage::ExtractOuter => vec![("ct", &cfg.ct)],
            Stage::Register => vec![
                ("scan", &cfg.scan),
                ("landmarks_scan", &cfg.landmarks_scan),
                ("landmarks_ct", &cfg.landmarks_ct),
            ],
            Stage::Contour => vec![("scan", &cfg.scan)],
            Stage::Toolpath | Stage::SimulateCut => vec![("implant", &cfg.implant)],
            Stage::Evaluate => vec![("ct", &cfg.ct)],
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::ExtractOuter => &[artifacts::OUTER_LAYER],
            Stage::Register => &[artifacts::SCAN_TO_CT],
            Stage::Contour => &[artifacts::CONTOUR_POINTS, artifacts::CURVE_MODEL],
            Stage::Toolpath => &[artifacts::TOOLPATH],
            Stage::SimulateCut => &[artifacts::RESIZED_IMPLANT],
            Stage::Evaluate => &[artifacts::GAP_REPORT],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub elapsed: Duration,
    /// Named scalar results, already formatted.
    pub results: Vec<(String, String)>,
}

fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let format = MeshFormat::from_path(path)
        .ok_or_else(|| Error::Config(format!("{}: unknown mesh extension", path.display())))?;
    mesh::load_mesh(path, format)
}

fn save_ply(m: &TriangleMesh, path: &Path) -> Result<()> {
    mesh::save_mesh(m, path, MeshFormat::PlyBinary)
}

fn r6(name: &str, v: f64) -> (String, String) {
    (name.to_string(), format!("{v:.6}"))
}

/// Runs one stage against the files on disk. Errors carry the stage name.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<StageReport> {
    let start = Instant::now();
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let results = stage_body(stage, cfg).map_err(|e| Error::Stage {
        stage: stage.name(),
        source: Box::new(e),
    })?;
    log::info!("{} done in {:.2?}", stage.name(), start.elapsed());
    Ok(StageReport {
        stage,
        elapsed: start.elapsed(),
        results,
    })
}

fn stage_body(stage: Stage, cfg: &PipelineConfig) -> Result<Vec<(String, String)>> {
    let exec = cfg.execution();
    match stage {
        Stage::ExtractOuter => {
            let ct = load_mesh(&cfg.ct)?;
            let outer = registration::extract_outer_layer(&ct)?;
            save_ply(&outer, &cfg.artifact(artifacts::OUTER_LAYER))?;
            Ok(vec![("outer_vertices".into(), outer.vertex_count().to_string())])
        }
        Stage::Register => {
            let scan = load_mesh(&cfg.scan)?;
            let outer = load_mesh(&cfg.artifact(artifacts::OUTER_LAYER))?;
            let from = LandmarkSet::load(&cfg.landmarks_scan)?;
            let to = LandmarkSet::load(&cfg.landmarks_ct)?;
            let init = registration::register_points_svd(&from, &to)?;
            let fre = registration::fiducial_registration_error(&init, &from, &to)?;
            let params = IcpParams {
                execution: exec,
                ..cfg.icp
            };
            let index = SpatialIndex::new(outer);
            let fit = registration::icp(scan.vertices(), &index, &init, &params)?;
            if !fit.converged {
                log::warn!("ICP stopped after {} iterations without converging", fit.iterations);
            }
            fit.transform.save(&cfg.artifact(artifacts::SCAN_TO_CT))?;
            Ok(vec![
                r6("landmark_fre", fre),
                r6("icp_rms", *fit.rms_history.last().unwrap_or(&f64::NAN)),
                ("icp_iterations".into(), fit.iterations.to_string()),
                ("icp_converged".into(), fit.converged.to_string()),
            ])
        }
        Stage::Contour => {
            let scan = load_mesh(&cfg.scan)?;
            let t = RigidTransform::load(&cfg.artifact(artifacts::SCAN_TO_CT))?;
            if t.from_frame().as_str() != Frame::SCAN || t.to_frame().as_str() != Frame::CT {
                return Err(Error::FrameMismatch {
                    expected: format!("{} -> {}", Frame::SCAN, Frame::CT),
                    found: format!("{} -> {}", t.from_frame(), t.to_frame()),
                });
            }
            let params = ContourParams {
                execution: exec,
                ..cfg.contour
            };
            let (cloud, model) = extract_contour(&scan.transformed(&t), &params)?;
            cloud.save(&cfg.artifact(artifacts::CONTOUR_POINTS))?;
            model.save(&cfg.artifact(artifacts::CURVE_MODEL))?;
            Ok(vec![
                ("contour_points".into(), cloud.len().to_string()),
                r6("curve_mean_radius", model.r.a0),
                r6("curve_residual_r", model.residual_rms_r),
            ])
        }
        Stage::Toolpath => {
            let model = PolarCurveModel::load(&cfg.artifact(artifacts::CURVE_MODEL))?;
            let implant = SpatialIndex::new(load_mesh(&cfg.implant)?);
            let spline = toolpath::fit_spline(&sample_curve(&model, cfg.curve_samples), cfg.n_ctrl)?;
            let projected = toolpath::project_spline_to_surface(&spline, &implant, &model.frame)?;
            let params = toolpath::ToolpathParams {
                tool: cfg.tool,
                step: cfg.step,
                offset: cfg.offset,
                execution: exec,
            };
            let tp = toolpath::generate_toolpath(&projected, &model.frame, &params, model.label.as_str())?;
            toolpath::export_toolpath(&tp, &cfg.artifact(artifacts::TOOLPATH), cfg.format)?;
            Ok(vec![
                ("waypoints".into(), tp.len().to_string()),
                r6("toolpath_max_spacing", tp.max_spacing()),
            ])
        }
        Stage::SimulateCut => {
            let implant = load_mesh(&cfg.implant)?;
            let tp = toolpath::load_toolpath(&cfg.artifact(artifacts::TOOLPATH))?;
            let resized = virtual_cut(&implant, &Frame::new(Frame::CT), &tp, exec)?;
            save_ply(&resized, &cfg.artifact(artifacts::RESIZED_IMPLANT))?;
            Ok(vec![
                r6("implant_area_before", implant.surface_area()),
                r6("implant_area_after", resized.surface_area()),
            ])
        }
        Stage::Evaluate => {
            let resized = load_mesh(&cfg.artifact(artifacts::RESIZED_IMPLANT))?;
            let skull = load_mesh(&cfg.ct)?;
            let model = PolarCurveModel::load(&cfg.artifact(artifacts::CURVE_MODEL))?;
            let report = gap_analysis(&resized, &skull, &model.frame, cfg.n_samples)?;
            report.save(&cfg.artifact(artifacts::GAP_REPORT))?;
            Ok(vec![
                r6("max_abs_gap", report.max),
                r6("mean_abs_gap", report.mean),
                r6("std_abs_gap", report.std),
                ("requires_trimming".into(), report.requires_trimming.to_string()),
            ])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    /// Artifact file names with their sha256 digests, in stage order.
    pub artifacts: Vec<(String, String)>,
}

impl RunReport {
    pub fn result(&self, name: &str) -> Option<&str> {
        self.stages
            .iter()
            .flat_map(|s| &s.results)
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Validates the config and its inputs, runs every stage and writes the
/// manifest. Nothing is written when validation fails.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let stages = cfg.stages();
    cfg.validate_inputs(&stages)?;
    let mut reports = Vec::new();
    for &stage in &stages {
        reports.push(run_stage(stage, cfg)?);
    }
    let mut hashes = Vec::new();
    for &stage in &stages {
        for name in stage.outputs() {
            hashes.push((name.to_string(), sha256_file(&cfg.artifact(name))?));
        }
    }
    let report = RunReport {
        stages: reports,
        artifacts: hashes,
    };
    crate::textio::write_file(&cfg.artifact(artifacts::MANIFEST), &manifest_text(cfg, &report))?;
    Ok(report)
}

/// Run manifest: version, config, results and artifact digests, then
/// stage timings last so they are easy to strip when comparing runs.
pub fn manifest_text(cfg: &PipelineConfig, report: &RunReport) -> String {
    let mut s = String::from("# craniofit run manifest\n");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "parallel_feature = {}", cfg!(feature = "parallel"));
    s.push_str("\n[config]\n");
    for line in cfg.to_ini().lines().filter(|l| !l.is_empty() && !l.starts_with('[')) {
        s.push_str(line);
        s.push('\n');
    }
    s.push_str("\n[results]\n");
    for stage in &report.stages {
        for (k, v) in &stage.results {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    s.push_str("\n[artifacts]\n");
    for (name, hash) in &report.artifacts {
        let _ = writeln!(s, "{name} = sha256:{hash}");
    }
    s.push_str("\n[timings]\n");
    for stage in &report.stages {
        let _ = writeln!(
            s,
            "{}_ms = {:.3}",
            stage.stage.name(),
            stage.elapsed.as_secs_f64() * 1e3
        );
    }
    s
}

/// Manifest with the timing block removed.
pub fn strip_timings(manifest: &str) -> &str {
    manifest.split("\n[timings]").next().unwrap_or(manifest)
}

/// Writes the specimen for `seed` into `dir` together with a
/// [`SPECIMEN_CONFIG`] that runs the pipeline on it into `dir/out`.
pub fn synthesize(dir: &Path, seed: u64, base: &PipelineConfig) -> Result<()> {
    let specimen = generate_specimen(seed, &base.specimen)?;
    specimen.save(dir)?;
    let mut cfg = base.clone();
    let defaults = PipelineConfig::default();
    cfg.scan = defaults.scan;
    cfg.ct = defaults.ct;
    cfg.implant = defaults.implant;
    cfg.landmarks_scan = defaults.landmarks_scan;
    cfg.landmarks_ct = defaults.landmarks_ct;
    cfg.out_dir = defaults.out_dir;
    cfg.seed = seed;
    crate::textio::write_file(
        &dir.join(SPECIMEN_CONFIG),
        &format!(
            "# specimen seed {seed}; paths are relative to this file\n{}",
            cfg.to_ini()
        ),
    )
}
