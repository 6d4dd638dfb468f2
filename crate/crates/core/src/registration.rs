//! Rigid alignment of a scanned defect to the CT model.
//!
//! Landmarks give a coarse start via SVD point-set registration; ICP then
//! refines against the outer layer of the CT shell.

use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::mesh::{self, SpatialIndex, TriangleMesh};
use crate::par::Execution;
use crate::textio;
use crate::transform::{Frame, RigidTransform};
use crate::{Point3, Vector3};

/// Ordered, labeled points in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub frame: Frame,
    pub labels: Vec<String>,
    pub points: Vec<Point3>,
}

impl LandmarkSet {
    pub fn new(frame: impl Into<Frame>, labels: Vec<String>, points: Vec<Point3>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::CountMismatch {
                left: labels.len(),
                right: points.len(),
            });
        }
        Ok(LandmarkSet {
            frame: frame.into(),
            labels,
            points,
        })
    }

    /// Labels `m1, m2, ...`.
    pub fn unlabeled(frame: impl Into<Frame>, points: Vec<Point3>) -> Self {
        let labels = (1..=points.len()).map(|i| format!("m{i}")).collect();
        LandmarkSet {
            frame: frame.into(),
            labels,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Result<LandmarkSet> {
        if t.from_frame() != &self.frame {
            return Err(Error::FrameMismatch {
                expected: t.from_frame().to_string(),
                found: self.frame.to_string(),
            });
        }
        Ok(LandmarkSet {
            frame: t.to_frame().clone(),
            labels: self.labels.clone(),
            points: self.points.iter().map(|p| t.apply_point(p)).collect(),
        })
    }

    /// `frame <name>` header, then `label x y z` per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# landmarks (mm)\nframe {}\n", self.frame);
        for (l, p) in self.labels.iter().zip(&self.points) {
            s.push_str(&format!(
                "{l} {} {} {}\n",
                textio::fmt_f64(p.x),
                textio::fmt_f64(p.y),
                textio::fmt_f64(p.z)
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<LandmarkSet> {
        let ctx = "landmark table";
        let mut frame = None;
        let mut labels = Vec::new();
        let mut points = Vec::new();
        for line in textio::content_lines(text) {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks[0] == "frame" && toks.len() == 2 {
                frame = Some(Frame::new(toks[1]));
                continue;
            }
            if toks.len() != 4 {
                return Err(Error::parse(ctx, format!("expected 'label x y z', got '{line}'")));
            }
            let v = textio::parse_floats(&toks[1..].join(" "), ctx)?;
            labels.push(toks[0].to_string());
            points.push(Point3::new(v[0], v[1], v[2]));
        }
        let frame = frame.ok_or_else(|| Error::parse(ctx, "missing 'frame' header line"))?;
        LandmarkSet::new(frame, labels, points)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<LandmarkSet> {
        LandmarkSet::from_text(&textio::read_file(path)?)
    }
}

/// Removes the inner layer of a closed two-layer shell.
///
/// With `o` the vertex centroid, a vertex `q` with normal `n` is kept when
/// `(q − o)·n ≥ 0`; faces survive only if all three vertices do.
pub fn extract_outer_layer(ct_mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let o = mesh::centroid(ct_mesh)?;
    let normals = mesh::normals_or_computed(ct_mesh);
    let keep: Vec<bool> = ct_mesh
        .vertices()
        .iter()
        .zip(&normals)
        .map(|(q, n)| (q - o).dot(n) >= 0.0)
        .collect();
    let out = ct_mesh.retain_vertices(&keep);
    if out.vertex_count() == 0 || out.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(out)
}

/// Least-squares rigid motion taking `src[i]` onto `dst[i]`: centroids are
/// subtracted, the cross-covariance is decomposed by SVD and the rotation
/// is reflection-corrected.
pub fn fit_rigid(src: &[Point3], dst: &[Point3]) -> Result<(Matrix3<f64>, Vector3)> {
    if src.len() != dst.len() {
        return Err(Error::CountMismatch {
            left: src.len(),
            right: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "need at least 3 point pairs, got {}",
            src.len()
        )));
    }
    let cs = mesh::centroid_of(src).expect("non-empty");
    let cd = mesh::centroid_of(dst).expect("non-empty");
    for (name, pts, c) in [("source", src, &cs), ("target", dst, &cd)] {
        if !spans_plane(pts, c) {
            return Err(Error::DegenerateConfiguration(format!(
                "{name} points are collinear or coincident"
            )));
        }
    }
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let t = cd.coords - r * cs.coords;
    Ok((r, t))
}

/// True when the centered points are not confined to a line.
fn spans_plane(pts: &[Point3], c: &Point3) -> bool {
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[0] > 1e-18 && ev[1] > 1e-12 * ev[0]
}

/// SVD registration of corresponding landmarks, `source.frame → target.frame`.
pub fn register_points_svd(source: &LandmarkSet, target: &LandmarkSet) -> Result<RigidTransform> {
    let (r, t) = fit_rigid(&source.points, &target.points)?;
    Ok(RigidTransform::from_parts_unchecked(
        r,
        t,
        source.frame.clone(),
        target.frame.clone(),
    ))
}

/// Mean of `‖T·sᵢ − tᵢ‖`.
pub fn fiducial_registration_error(t: &RigidTransform, source: &LandmarkSet, target: &LandmarkSet) -> Result<f64> {
    if source.len() != target.len() {
        return Err(Error::CountMismatch {
            left: source.len(),
            right: target.len(),
        });
    }
    if source.is_empty() {
        return Err(Error::EmptySelection("no landmarks".into()));
    }
    let sum: f64 = source
        .points
        .iter()
        .zip(&target.points)
        .map(|(s, d)| (t.apply_point(s) - d).norm())
        .sum();
    Ok(sum / source.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iters: usize,
    /// Stop once the rms improves by less than this (mm).
    pub rms_tol: f64,
    /// Fraction of worst correspondences dropped every iteration.
    pub trim_fraction: f64,
    /// Initial rms above this (mm) is treated as a failed initialization.
    pub divergence_gate: f64,
    pub execution: Execution,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iters: 100,
            rms_tol: 1e-4,
            trim_fraction: 0.0,
            divergence_gate: 50.0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// rms of the kept correspondences at the start of each iteration.
    pub rms_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Point-to-point ICP, optionally trimmed.
///
/// `init` maps the source frame into the target frame; the returned
/// transform has the same labels. Each iteration matches every transformed
/// source point to its closest target surface point, keeps the best
/// `(1 − trim_fraction)` share, records their rms, and applies the SVD
/// update. The recorded rms never increases.
pub fn icp(source: &[Point3], target: &SpatialIndex, init: &RigidTransform, params: &IcpParams) -> Result<IcpResult> {
    if source.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    if target.mesh().is_empty() {
        return Err(Error::EmptyMesh);
    }
    if !(0.0..1.0).contains(&params.trim_fraction) {
        return Err(Error::InvalidParams(format!(
            "trim_fraction {} outside [0, 1)",
            params.trim_fraction
        )));
    }
    let n = source.len();
    let keep = (n - (params.trim_fraction * n as f64).floor() as usize).max(3.min(n));
    let mut rotation = *init.rotation();
    let mut translation = *init.translation();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..params.max_iters {
        let moved: Vec<Point3> = source
            .iter()
            .map(|p| Point3::from(rotation * p.coords + translation))
            .collect();
        let hits = target.closest_points(&moved, params.execution);
        let mut order: Vec<usize> = (0..n).collect();
        if keep < n {
            order.sort_by(|&a, &b| hits[a].distance.total_cmp(&hits[b].distance).then(a.cmp(&b)));
            order.truncate(keep);
            order.sort_unstable();
        }
        let rms = (order.iter().map(|&i| hits[i].distance.powi(2)).sum::<f64>() / keep as f64).sqrt();
        if it == 0 && rms > params.divergence_gate {
            return Err(Error::DivergedInit {
                rms,
                gate: params.divergence_gate,
            });
        }
        let improvement = history.last().map_or(f64::INFINITY, |prev| prev - rms);
        history.push(rms);
        iterations = it + 1;

        let src: Vec<Point3> = order.iter().map(|&i| moved[i]).collect();
        let dst: Vec<Point3> = order.iter().map(|&i| hits[i].point).collect();
        if let Ok((dr, dt)) = fit_rigid(&src, &dst) {
            // accept only updates that do not worsen the matched objective
            let before: f64 = src.iter().zip(&dst).map(|(s, d)| (s - d).norm_squared()).sum();
            let after: f64 = src
                .iter()
                .zip(&dst)
                .map(|(s, d)| (Point3::from(dr * s.coords + dt) - d).norm_squared())
                .sum();
            if after <= before {
                rotation = dr * rotation;
                translation = dr * translation + dt;
            }
        }
        if rms < params.rms_tol || improvement < params.rms_tol {
            converged = true;
            break;
        }
    }
    let rotation = crate::transform::orthonormalize(&rotation);
    Ok(IcpResult {
        transform: RigidTransform::from_parts_unchecked(
            rotation,
            translation,
            init.from_frame().clone(),
            init.to_frame().clone(),
        ),
        rms_history: history,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMode {
    All,
    /// Discard the largest fraction of distances before averaging.
    Trimmed(f64),
}

/// Mean closest-surface distance from the source vertices to the target.
pub fn mean_surface_distance(source: &TriangleMesh, target: &SpatialIndex, mode: DistanceMode) -> Result<f64> {
    mean_point_distance(source.vertices(), target, mode, Execution::default())
}

pub fn mean_point_distance(
    points: &[Point3],
    target: &SpatialIndex,
    mode: DistanceMode,
    exec: Execution,
) -> Result<f64> {
    if points.is_empty() || target.mesh().is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut d: Vec<f64> = target.closest_points(points, exec).iter().map(|h| h.distance).collect();
    let keep = match mode {
        DistanceMode::All => d.len(),
        DistanceMode::Trimmed(p) => {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidParams(format!("trim fraction {p} outside [0, 1)")));
            }
            d.sort_by(f64::total_cmp);
            (d.len() - (p * d.len() as f64).floor() as usize).max(1)
        }
    };
    Ok(d[..keep].iter().sum::<f64>() / keep as f64)
}
