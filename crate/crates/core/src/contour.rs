//! Defect contour extraction: curvature thresholding, automatic cleanup,
//! best-fit plane, cylindrical coordinates and a closed Fourier fit.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::mesh::{self, TriangleMesh, VertexScalarField};
use crate::par::{self, Execution};
use crate::textio;
use crate::transform::{Frame, RigidTransform};
use crate::{Point3, Vector3};

/// Points retained around the defect edge, optionally with the source mesh
/// normals at those points.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPointCloud {
    pub frame: Frame,
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vector3>>,
}

impl ContourPointCloud {
    pub fn new(frame: impl Into<Frame>, points: Vec<Point3>) -> Self {
        ContourPointCloud {
            frame: frame.into(),
            points,
            normals: None,
        }
    }

    pub fn with_normals(mut self, normals: Vec<Vector3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::CountMismatch {
                left: self.points.len(),
                right: normals.len(),
            });
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn subset(&self, keep: &[usize]) -> ContourPointCloud {
        ContourPointCloud {
            frame: self.frame.clone(),
            points: keep.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|n| keep.iter().map(|&i| n[i]).collect()),
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> ContourPointCloud {
        ContourPointCloud {
            frame: t.to_frame().clone(),
            points: self.points.iter().map(|p| t.apply_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| n.iter().map(|v| t.apply_vector(v)).collect()),
        }
    }

    /// `# frame <name>` then one `x y z` line per point.
    pub fn to_text(&self) -> String {
        format!("# frame {}\n{}", self.frame, textio::points_to_text(&self.points))
    }

    pub fn from_text(text: &str) -> Result<ContourPointCloud> {
        let frame = text
            .lines()
            .find_map(|l| l.trim().strip_prefix("# frame "))
            .map(|f| Frame::new(f.trim()))
            .unwrap_or_else(|| Frame::new(Frame::CT));
        Ok(ContourPointCloud::new(
            frame,
            textio::points_from_text(text, "contour points")?,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<ContourPointCloud> {
        ContourPointCloud::from_text(&textio::read_file(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurvatureThreshold {
    /// Quantile in `[0, 1]` of the reliable |H| values.
    Percentile(f64),
    /// |H| in 1/mm.
    Absolute(f64),
}

impl Default for CurvatureThreshold {
    fn default() -> Self {
        CurvatureThreshold::Percentile(0.9)
    }
}

impl CurvatureThreshold {
    pub fn resolve(&self, field: &VertexScalarField) -> Result<f64> {
        match *self {
            CurvatureThreshold::Absolute(v) if v >= 0.0 => Ok(v),
            CurvatureThreshold::Percentile(q) if (0.0..=1.0).contains(&q) => field
                .percentile(q)
                .ok_or_else(|| Error::EmptySelection("no reliable curvature values".into())),
            other => Err(Error::InvalidParams(format!("bad curvature threshold {other:?}"))),
        }
    }
}

/// Vertices with `|H| ≥ threshold`, skipping flagged (boundary) vertices.
/// The cloud carries the mesh vertex normals and is labeled `ct`.
pub fn filter_by_curvature(
    mesh: &TriangleMesh,
    field: &VertexScalarField,
    threshold: f64,
) -> Result<ContourPointCloud> {
    if field.len() != mesh.vertex_count() {
        return Err(Error::CountMismatch {
            left: mesh.vertex_count(),
            right: field.len(),
        });
    }
    let normals = mesh::normals_or_computed(mesh);
    let keep: Vec<usize> = (0..field.len())
        .filter(|&i| !field.unreliable[i] && field.values[i] >= threshold)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no vertex reaches curvature threshold {threshold}"
        )));
    }
    Ok(ContourPointCloud {
        frame: Frame::new(Frame::CT),
        points: keep.iter().map(|&i| mesh.vertices()[i]).collect(),
        normals: Some(keep.iter().map(|&i| normals[i]).collect()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanupParams {
    /// Edge length of the neighbor graph (mm).
    pub neighbor_radius: f64,
    /// Warn when the kept component holds less than this share of points.
    pub min_cluster_fraction: f64,
    /// Neighbors used by the statistical outlier filter.
    pub k: usize,
    pub execution: Execution,
}

impl CleanupParams {
    /// Defaults scaled to a mesh: radius is three mean edge lengths.
    pub fn for_mesh(mesh: &TriangleMesh) -> Self {
        CleanupParams {
            neighbor_radius: 3.0 * mesh.mean_edge_length(),
            min_cluster_fraction: 0.5,
            k: 8,
            execution: Execution::default(),
        }
    }
}

/// Keeps the largest radius-connected component, then drops points whose
/// mean distance to their `k` nearest neighbors exceeds mean + 2·std.
/// Output preserves input order and is a subset of the input.
pub fn clean_contour_points(cloud: &ContourPointCloud, params: &CleanupParams) -> Result<ContourPointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptySelection("empty contour cloud".into()));
    }
    if !(params.neighbor_radius > 0.0) || params.k == 0 {
        return Err(Error::InvalidParams(format!(
            "neighbor_radius {} and k {} must be positive",
            params.neighbor_radius, params.k
        )));
    }
    let pts = &cloud.points;
    let n = pts.len();
    let r2 = params.neighbor_radius * params.neighbor_radius;
    let adjacency: Vec<Vec<usize>> = par::map_range(params.execution, n, |i| {
        (0..n)
            .filter(|&j| j != i && (pts[i] - pts[j]).norm_squared() <= r2)
            .collect()
    });

    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for seed in 0..n {
        if comp[seed] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![seed];
        comp[seed] = id;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for &j in &adjacency[i] {
                if comp[j] == usize::MAX {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    // components are numbered by their lowest index, so the first maximum wins ties
    let best = sizes.iter().copied().max().expect("non-empty");
    let best_id = sizes.iter().position(|&s| s == best).expect("max exists");
    if sizes.iter().filter(|&&s| s == best).count() > 1 {
        log::warn!(
            "contour cleanup: {} components tie at {best} points, keeping the one with the lowest index",
            sizes.iter().filter(|&&s| s == best).count()
        );
    }
    if (best as f64) < params.min_cluster_fraction * n as f64 {
        log::warn!("contour cleanup: largest component holds only {best} of {n} points");
    }
    let members: Vec<usize> = (0..n).filter(|&i| comp[i] == best_id).collect();

    let m = members.len();
    if m <= 2 {
        return Ok(cloud.subset(&members));
    }
    let k = params.k.min(m - 1);
    let mean_knn: Vec<f64> = par::map(params.execution, &members, |&i| {
        let mut d: Vec<f64> = members
            .iter()
            .filter(|&&j| j != i)
            .map(|&j| (pts[i] - pts[j]).norm())
            .collect();
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        d[..k].iter().sum::<f64>() / k as f64
    });
    let mu = mean_knn.iter().sum::<f64>() / m as f64;
    let var = mean_knn.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / m as f64;
    let limit = mu + 2.0 * var.sqrt() + 1e-9 * mu.max(1.0);
    let keep: Vec<usize> = members
        .iter()
        .zip(&mean_knn)
        .filter(|(_, &d)| d <= limit)
        .map(|(&i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySelection("cleanup removed every point".into()));
    }
    Ok(cloud.subset(&keep))
}

/// Local frame of the best-fit plane: `{u, w, normal}` is right-handed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub origin: Point3,
    pub normal: Vector3,
    pub u: Vector3,
    pub w: Vector3,
}

/// `(θ, r, h)` about the plane normal through the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalPoint {
    pub theta: f64,
    pub r: f64,
    pub h: f64,
}

impl PlaneFrame {
    /// Builds the in-plane axes from the global x axis (y when x is nearly
    /// parallel to the normal).
    pub fn from_origin_normal(origin: Point3, normal: Vector3) -> Result<PlaneFrame> {
        let n = normal
            .try_normalize(1e-12)
            .ok_or_else(|| Error::DegenerateConfiguration("zero plane normal".into()))?;
        let project = |a: Vector3| a - n * n.dot(&a);
        let mut u = project(Vector3::x());
        if u.norm() < 1e-6 {
            u = project(Vector3::y());
        }
        let u = u.normalize();
        let w = n.cross(&u);
        Ok(PlaneFrame {
            origin,
            normal: n,
            u,
            w,
        })
    }

    /// `(u, w, h)` coordinates of `p`.
    pub fn local(&self, p: &Point3) -> Vector3 {
        let d = p - self.origin;
        Vector3::new(d.dot(&self.u), d.dot(&self.w), d.dot(&self.normal))
    }

    pub fn global(&self, a: f64, b: f64, h: f64) -> Point3 {
        self.origin + self.u * a + self.w * b + self.normal * h
    }

    /// `None` when `p` is within 1e-9 mm of the axis.
    pub fn to_cylindrical(&self, p: &Point3) -> Option<CylindricalPoint> {
        let l = self.local(p);
        let r = l.x.hypot(l.y);
        if r < 1e-9 {
            return None;
        }
        Some(CylindricalPoint {
            theta: l.y.atan2(l.x).rem_euclid(TAU),
            r,
            h: l.z,
        })
    }

    pub fn from_cylindrical(&self, c: &CylindricalPoint) -> Point3 {
        self.global(c.r * c.theta.cos(), c.r * c.theta.sin(), c.h)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Result<PlaneFrame> {
        PlaneFrame::from_origin_normal(t.apply_point(&self.origin), t.apply_vector(&self.normal))
    }
}

/// Least-squares plane through the cloud, centered at its mean.
///
/// The normal is the smallest-variance principal direction. Its sign
/// follows the majority of the carried point normals; without normals (or
/// on a tie) it is chosen to have a positive z component, then y, then x.
pub fn fit_plane_frame(cloud: &ContourPointCloud) -> Result<PlaneFrame> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(Error::DegenerateConfiguration(format!(
            "plane fit needs 3 points, got {}",
            pts.len()
        )));
    }
    let c = mesh::centroid_of(pts).expect("non-empty");
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (mid, hi) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if hi <= 1e-18 || mid <= 1e-12 * hi {
        return Err(Error::DegenerateConfiguration(
            "contour points are collinear or coincident".into(),
        ));
    }
    let mut n: Vector3 = eig.eigenvectors.column(order[0]).into_owned().normalize();

    let votes: i64 = cloud
        .normals
        .as_ref()
        .map(|ns| {
            ns.iter()
                .map(|m| {
                    let d = m.dot(&n);
                    if d > 1e-12 {
                        1
                    } else if d < -1e-12 {
                        -1
                    } else {
                        0
                    }
                })
                .sum()
        })
        .unwrap_or(0);
    let flip = if votes != 0 {
        votes < 0
    } else if n.z.abs() > 1e-12 {
        n.z < 0.0
    } else if n.y.abs() > 1e-12 {
        n.y < 0.0
    } else {
        n.x < 0.0
    };
    if flip {
        n = -n;
    }
    PlaneFrame::from_origin_normal(c, n)
}

/// Cylindrical coordinates of every point; points on the axis are dropped
/// with a warning.
pub fn to_cylindrical(cloud: &ContourPointCloud, frame: &PlaneFrame) -> Vec<CylindricalPoint> {
    let out: Vec<CylindricalPoint> = cloud.points.iter().filter_map(|p| frame.to_cylindrical(p)).collect();
    if out.len() < cloud.len() {
        log::warn!(
            "dropped {} contour points lying on the cylinder axis",
            cloud.len() - out.len()
        );
    }
    out
}

/// `a0 + Σ_{k=1..D} (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigSeries {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrigSeries {
    pub fn constant(a0: f64, degree: usize) -> Self {
        TrigSeries {
            a0,
            a: vec![0.0; degree],
            b: vec![0.0; degree],
        }
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut v = self.a0;
        for k in 0..self.a.len() {
            let kt = (k + 1) as f64 * theta;
            v += self.a[k] * kt.cos() + self.b[k] * kt.sin();
        }
        v
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        let mut v = 0.0;
        for k in 0..self.a.len() {
            let kf = (k + 1) as f64;
            let kt = kf * theta;
            v += kf * (self.b[k] * kt.cos() - self.a[k] * kt.sin());
        }
        v
    }

    fn from_solution(x: &DVector<f64>) -> Self {
        let d = (x.len() - 1) / 2;
        TrigSeries {
            a0: x[0],
            a: (0..d).map(|k| x[1 + 2 * k]).collect(),
            b: (0..d).map(|k| x[2 + 2 * k]).collect(),
        }
    }
}

/// Closed contour `θ ↦ frame.global(r(θ) cos θ, r(θ) sin θ, h(θ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCurveModel {
    pub label: Frame,
    pub frame: PlaneFrame,
    pub r: TrigSeries,
    pub h: TrigSeries,
    pub residual_rms_r: f64,
    pub residual_rms_h: f64,
}

pub const DEFAULT_DEGREE: usize = 8;
const COVERAGE_GAP: f64 = PI / 2.0;
const POSITIVITY_SAMPLES: usize = 4096;

/// Linear least-squares Fourier fit of `r(θ)` and `h(θ)`.
pub fn fit_closed_polar_curve(
    points: &[CylindricalPoint],
    degree: usize,
    frame: &PlaneFrame,
) -> Result<PolarCurveModel> {
    let cols = 2 * degree + 1;
    if points.len() < 2 * cols {
        return Err(Error::RankDeficient(format!(
            "{} points cannot constrain degree {degree} (need {})",
            points.len(),
            2 * cols
        )));
    }
    let mut thetas: Vec<f64> = points.iter().map(|p| p.theta.rem_euclid(TAU)).collect();
    thetas.sort_by(f64::total_cmp);
    let mut gap = thetas[0] + TAU - thetas[thetas.len() - 1];
    for w in thetas.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    if gap > COVERAGE_GAP {
        return Err(Error::InsufficientCoverage {
            gap_deg: gap.to_degrees(),
        });
    }

    let a = DMatrix::from_fn(points.len(), cols, |i, j| basis(points[i].theta, j));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!(
            "design matrix condition {:.3e}",
            smax / smin
        )));
    }
    let rv = DVector::from_iterator(points.len(), points.iter().map(|p| p.r));
    let hv = DVector::from_iterator(points.len(), points.iter().map(|p| p.h));
    let xr = svd.solve(&rv, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let xh = svd.solve(&hv, 0.0).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let rms = |x: &DVector<f64>, y: &DVector<f64>| ((&a * x - y).norm_squared() / y.len() as f64).sqrt();

    let model = PolarCurveModel {
        label: Frame::new(Frame::CT),
        frame: *frame,
        residual_rms_r: rms(&xr, &rv),
        residual_rms_h: rms(&xh, &hv),
        r: TrigSeries::from_solution(&xr),
        h: TrigSeries::from_solution(&xh),
    };
    model.check_positive()?;
    Ok(model)
}

fn basis(theta: f64, j: usize) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let k = j.div_ceil(2) as f64;
    if j % 2 == 1 {
        (k * theta).cos()
    } else {
        (k * theta).sin()
    }
}

impl PolarCurveModel {
    pub fn degree(&self) -> usize {
        self.r.degree()
    }

    pub fn point(&self, theta: f64) -> Point3 {
        self.frame.from_cylindrical(&CylindricalPoint {
            theta,
            r: self.r.eval(theta),
            h: self.h.eval(theta),
        })
    }

    fn check_positive(&self) -> Result<()> {
        for i in 0..POSITIVITY_SAMPLES {
            let theta = TAU * i as f64 / POSITIVITY_SAMPLES as f64;
            if self.r.eval(theta) <= 0.0 {
                return Err(Error::NonPositiveRadius { theta });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let f = textio::fmt_f64;
        let v = |x: &Vector3| format!("{} {} {}", f(x.x), f(x.y), f(x.z));
        let mut s = String::from("# polar-curve-model\n");
        s.push_str(&format!("frame {}\n", self.label));
        s.push_str(&format!("origin {}\n", v(&self.frame.origin.coords)));
        s.push_str(&format!("normal {}\n", v(&self.frame.normal)));
        s.push_str(&format!("u {}\n", v(&self.frame.u)));
        s.push_str(&format!("w {}\n", v(&self.frame.w)));
        s.push_str(&format!("degree {}\n", self.degree()));
        s.push_str(&format!("residual_rms_r {}\n", f(self.residual_rms_r)));
        s.push_str(&format!("residual_rms_h {}\n", f(self.residual_rms_h)));
        s.push_str("# k r_cos r_sin h_cos h_sin\n");
        s.push_str(&format!("0 {} 0 {} 0\n", f(self.r.a0), f(self.h.a0)));
        for k in 0..self.degree() {
            s.push_str(&format!(
                "{} {} {} {} {}\n",
                k + 1,
                f(self.r.a[k]),
                f(self.r.b[k]),
                f(self.h.a[k]),
                f(self.h.b[k])
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<PolarCurveModel> {
        let ctx = "curve model";
        let mut label = None;
        let mut vecs = std::collections::HashMap::new();
        let mut degree = None;
        let mut rms = [0.0; 2];
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for line in textio::content_lines(text) {
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "frame" => label = Some(Frame::new(rest.trim())),
                "origin" | "normal" | "u" | "w" => {
                    let x = textio::parse_floats(rest, ctx)?;
                    if x.len() != 3 {
                        return Err(Error::parse(ctx, format!("'{key}' needs 3 values")));
                    }
                    vecs.insert(key, Vector3::new(x[0], x[1], x[2]));
                }
                "degree" => {
                    degree = Some(
                        rest.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::parse(ctx, format!("bad degree '{rest}'")))?,
                    )
                }
                "residual_rms_r" => rms[0] = parse_one(rest, ctx)?,
                "residual_rms_h" => rms[1] = parse_one(rest, ctx)?,
                _ => {
                    let x = textio::parse_floats(line, ctx)?;
                    if x.len() != 5 || x[0] != rows.len() as f64 {
                        return Err(Error::parse(ctx, format!("bad coefficient row '{line}'")));
                    }
                    rows.push([x[1], x[2], x[3], x[4]]);
                }
            }
        }
        let get = |k: &str| {
            vecs.get(k)
                .copied()
                .ok_or_else(|| Error::parse(ctx, format!("missing '{k}'")))
        };
        let frame = PlaneFrame {
            origin: Point3::from(get("origin")?),
            normal: get("normal")?,
            u: get("u")?,
            w: get("w")?,
        };
        let degree = degree.ok_or_else(|| Error::parse(ctx, "missing 'degree'"))?;
        if rows.len() != degree + 1 {
            return Err(Error::parse(
                ctx,
                format!("expected {} coefficient rows, found {}", degree + 1, rows.len()),
            ));
        }
        let series = |c: usize| TrigSeries {
            a0: rows[0][c],
            a: rows[1..].iter().map(|r| r[c]).collect(),
            b: rows[1..].iter().map(|r| r[c + 1]).collect(),
        };
        Ok(PolarCurveModel {
            label: label.ok_or_else(|| Error::parse(ctx, "missing 'frame'"))?,
            frame,
            r: series(0),
            h: series(2),
            residual_rms_r: rms[0],
            residual_rms_h: rms[1],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<PolarCurveModel> {
        PolarCurveModel::from_text(&textio::read_file(path)?)
    }
}

fn parse_one(s: &str, ctx: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(ctx, format!("bad number '{s}'")))
}

/// `n ≥ 3` points at uniform θ starting from θ = 0.
pub fn sample_curve(model: &PolarCurveModel, n: usize) -> Vec<Point3> {
    let n = n.max(3);
    (0..n).map(|i| model.point(TAU * i as f64 / n as f64)).collect()
}

/// Settings for [`extract_contour`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourParams {
    pub threshold: CurvatureThreshold,
    /// Defaults to three mean edge lengths of the scan when `None`.
    pub neighbor_radius: Option<f64>,
    pub min_cluster_fraction: f64,
    pub k: usize,
    pub degree: usize,
    pub execution: Execution,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            threshold: CurvatureThreshold::default(),
            neighbor_radius: None,
            min_cluster_fraction: 0.5,
            k: 8,
            degree: DEFAULT_DEGREE,
            execution: Execution::default(),
        }
    }
}

/// Curvature filter, cleanup, plane and curve fit on a registered scan.
pub fn extract_contour(scan: &TriangleMesh, params: &ContourParams) -> Result<(ContourPointCloud, PolarCurveModel)> {
    let field = mesh::mean_curvature(scan)?;
    let threshold = params.threshold.resolve(&field)?;
    let raw = filter_by_curvature(scan, &field, threshold)?;
    let cleanup = CleanupParams {
        neighbor_radius: params.neighbor_radius.unwrap_or_else(|| 3.0 * scan.mean_edge_length()),
        min_cluster_fraction: params.min_cluster_fraction,
        k: params.k,
        execution: params.execution,
    };
    let cloud = clean_contour_points(&raw, &cleanup)?;
    let frame = fit_plane_frame(&cloud)?;
    let cyl = to_cylindrical(&cloud, &frame);
    let mut model = fit_closed_polar_curve(&cyl, params.degree, &frame)?;
    model.label = cloud.frame.clone();
    Ok((cloud, model))
}
