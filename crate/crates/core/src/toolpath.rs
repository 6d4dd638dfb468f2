//! Cutting toolpath from a fitted contour: closed spline, projection onto
//! the implant top surface, tilted tool axes and cutter-radius offset.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::contour::PlaneFrame;
use crate::error::{Error, Result};
use crate::mesh::SpatialIndex;
use crate::par::{self, Execution};
use crate::textio;
use crate::transform::{Frame, RigidTransform};
use crate::{Point3, Vector3};

pub const DEFAULT_STEP: f64 = 0.5;
pub const DEFAULT_N_CTRL: usize = 32;
/// Largest distance the closest-point fallback may move a control point.
pub const PROJECTION_GATE: f64 = 10.0;

/// Closed interpolating cubic spline, parametrized by cumulative chord
/// length through its control points.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCurve {
    ctrl: Vec<Point3>,
    /// `knots[i]` is the parameter of `ctrl[i]`; the last entry closes the loop.
    knots: Vec<f64>,
    /// Second derivatives at the control points.
    m: Vec<Vector3>,
}

impl SplineCurve {
    /// Spline through `ctrl` in order, closing back to the first point.
    pub fn interpolate(ctrl: Vec<Point3>) -> Result<SplineCurve> {
        let n = ctrl.len();
        if n < 4 {
            return Err(Error::TooFewPoints { needed: 4, got: n });
        }
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(0.0);
        for i in 0..n {
            let h = (ctrl[(i + 1) % n] - ctrl[i]).norm();
            if h <= 1e-12 {
                return Err(Error::DegenerateConfiguration(format!(
                    "control points {i} and {} coincide",
                    (i + 1) % n
                )));
            }
            knots.push(knots[i] + h);
        }
        let h: Vec<f64> = (0..n).map(|i| knots[i + 1] - knots[i]).collect();
        // periodic second-derivative system, one row per control point
        let lower: Vec<f64> = (0..n).map(|i| h[(i + n - 1) % n]).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[(i + n - 1) % n] + h[i])).collect();
        let upper: Vec<f64> = h.clone();
        let rhs: Vec<Vector3> = (0..n)
            .map(|i| {
                let prev = (ctrl[i] - ctrl[(i + n - 1) % n]) / h[(i + n - 1) % n];
                let next = (ctrl[(i + 1) % n] - ctrl[i]) / h[i];
                6.0 * (next - prev)
            })
            .collect();
        let m = solve_cyclic(&lower, &diag, &upper, &rhs);
        Ok(SplineCurve { ctrl, knots, m })
    }

    pub fn control_points(&self) -> &[Point3] {
        &self.ctrl
    }

    /// Parameter of each control point.
    pub fn control_params(&self) -> &[f64] {
        &self.knots[..self.ctrl.len()]
    }

    /// Parameter period (closed chord length).
    pub fn period(&self) -> f64 {
        self.knots[self.ctrl.len()]
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let s = s.rem_euclid(self.period());
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
        .min(self.ctrl.len() - 1);
        (i, s)
    }

    pub fn eval(&self, s: f64) -> Point3 {
        let n = self.ctrl.len();
        let (i, s) = self.segment(s);
        let j = (i + 1) % n;
        let h = self.knots[i + 1] - self.knots[i];
        let a = self.knots[i + 1] - s;
        let b = s - self.knots[i];
        let v = self.m[i] * (a * a * a / (6.0 * h))
            + self.m[j] * (b * b * b / (6.0 * h))
            + (self.ctrl[i].coords / h - self.m[i] * (h / 6.0)) * a
            + (self.ctrl[j].coords / h - self.m[j] * (h / 6.0)) * b;
        Point3::from(v)
    }

    pub fn derivative(&self, s: f64) -> Vector3 {
        let n = self.ctrl.len();
        let (i, s) = self.segment(s);
        let j = (i + 1) % n;
        let h = self.knots[i + 1] - self.knots[i];
        let a = self.knots[i + 1] - s;
        let b = s - self.knots[i];
        -self.m[i] * (a * a / (2.0 * h)) + self.m[j] * (b * b / (2.0 * h)) + (self.ctrl[j] - self.ctrl[i]) / h
            - (self.m[j] - self.m[i]) * (h / 6.0)
    }

    /// Cumulative arc length table on a dense uniform parameter grid.
    fn arc_table(&self, per_segment: usize) -> (Vec<f64>, Vec<f64>) {
        let total = per_segment * self.ctrl.len();
        let mut params = Vec::with_capacity(total + 1);
        let mut lengths = Vec::with_capacity(total + 1);
        let mut acc = 0.0;
        let mut prev = self.eval(0.0);
        params.push(0.0);
        lengths.push(0.0);
        for seg in 0..self.ctrl.len() {
            let (s0, s1) = (self.knots[seg], self.knots[seg + 1]);
            for k in 1..=per_segment {
                let s = s0 + (s1 - s0) * k as f64 / per_segment as f64;
                let p = self.eval(s);
                acc += (p - prev).norm();
                prev = p;
                params.push(s);
                lengths.push(acc);
            }
        }
        (params, lengths)
    }

    /// Parameters of `count` points at uniform arc length, starting at 0.
    pub fn arc_length_params(&self, count: usize) -> Vec<f64> {
        let (params, lengths) = self.arc_table(64);
        let total = *lengths.last().expect("non-empty table");
        let mut out = Vec::with_capacity(count);
        let mut j = 0;
        for i in 0..count {
            let target = total * i as f64 / count as f64;
            while j + 1 < lengths.len() && lengths[j + 1] < target {
                j += 1;
            }
            let span = lengths[j + 1] - lengths[j];
            let f = if span > 0.0 { (target - lengths[j]) / span } else { 0.0 };
            out.push(params[j] + f * (params[j + 1] - params[j]));
        }
        out
    }

    pub fn arc_length(&self) -> f64 {
        *self.arc_table(64).1.last().expect("non-empty table")
    }
}

/// Solves the periodic tridiagonal system
/// `lower[i]·x[i−1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]` (indices mod n)
/// with the Sherman–Morrison correction of the Thomas algorithm.
fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[Vector3]) -> Vec<Vector3> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= upper[n - 1] * lower[0] / gamma;
    let x = thomas(lower, &b, upper, rhs);
    let mut uvec = vec![Vector3::zeros(); n];
    uvec[0] = Vector3::repeat(gamma);
    uvec[n - 1] = Vector3::repeat(upper[n - 1]);
    let z = thomas(lower, &b, upper, &uvec);
    let vdot = |y: &[Vector3]| y[0] + y[n - 1] * (lower[0] / gamma);
    let num = vdot(&x);
    let den = Vector3::repeat(1.0) + vdot(&z);
    let fact = num.component_div(&den);
    x.iter().zip(&z).map(|(xi, zi)| xi - zi.component_mul(&fact)).collect()
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[Vector3]) -> Vec<Vector3> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Vector3::zeros(); n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - d[i - 1] * lower[i]) / denom;
    }
    let mut x = vec![Vector3::zeros(); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - x[i + 1] * c[i];
    }
    x
}

/// Point at arc length `s` along the closed polyline through `pts`.
fn polyline_at(pts: &[Point3], cum: &[f64], s: f64) -> Point3 {
    let n = pts.len();
    let i = match cum.binary_search_by(|c| c.total_cmp(&s)) {
        Ok(i) => i,
        Err(i) => i - 1,
    }
    .min(n - 1);
    let span = cum[i + 1] - cum[i];
    let f = if span > 0.0 { (s - cum[i]) / span } else { 0.0 };
    pts[i] + (pts[(i + 1) % n] - pts[i]) * f
}

/// Closed spline through `n_ctrl` points picked at uniform arc length along
/// the closed polyline `points`. When `n_ctrl` equals the point count the
/// inputs themselves are the control points.
pub fn fit_spline(points: &[Point3], n_ctrl: usize) -> Result<SplineCurve> {
    if n_ctrl < 4 {
        return Err(Error::TooFewPoints { needed: 4, got: n_ctrl });
    }
    if points.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    if n_ctrl == points.len() {
        return SplineCurve::interpolate(points.to_vec());
    }
    let n = points.len();
    let mut cum = vec![0.0];
    for i in 0..n {
        cum.push(cum[i] + (points[(i + 1) % n] - points[i]).norm());
    }
    let total = cum[n];
    let ctrl = (0..n_ctrl)
        .map(|k| polyline_at(points, &cum, total * k as f64 / n_ctrl as f64))
        .collect();
    SplineCurve::interpolate(ctrl)
}

/// Moves every control point onto the implant's top surface along the
/// plane normal and rebuilds the spline.
///
/// The line through the control point along `n_o` is intersected with the
/// implant; hits on faces facing along `n_o` win, nearest first below the
/// point, then above. Without any hit the closest surface point within
/// [`PROJECTION_GATE`] is used.
pub fn project_spline_to_surface(
    spline: &SplineCurve,
    implant: &SpatialIndex,
    frame: &PlaneFrame,
) -> Result<SplineCurve> {
    let n = frame.normal;
    let mesh = implant.mesh();
    let mut moved = Vec::with_capacity(spline.ctrl.len());
    for (index, p) in spline.ctrl.iter().enumerate() {
        let hits = implant.line_hits(p, &n);
        let facing = |f: usize| mesh.face_area_vector(f).dot(&n) > 0.0;
        let below = |h: &&crate::mesh::RayHit| h.t <= 1e-9;
        let pick = hits
            .iter()
            .filter(|h| below(h) && facing(h.face))
            .max_by(|a, b| a.t.total_cmp(&b.t))
            .or_else(|| {
                hits.iter()
                    .filter(|h| !below(h) && facing(h.face))
                    .min_by(|a, b| a.t.total_cmp(&b.t))
            })
            .or_else(|| hits.iter().filter(below).max_by(|a, b| a.t.total_cmp(&b.t)))
            .or_else(|| hits.iter().filter(|h| !below(h)).min_by(|a, b| a.t.total_cmp(&b.t)));
        let q = match pick {
            Some(h) => h.point,
            None => match implant.closest_point(p) {
                Some(c) if c.distance <= PROJECTION_GATE => c.point,
                _ => return Err(Error::ProjectionMiss { index }),
            },
        };
        moved.push(q);
    }
    SplineCurve::interpolate(moved)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolParams {
    /// Cutter radius (mm).
    pub tool_radius: f64,
    /// Tool-axis inclination from the plane normal (degrees).
    pub tilt_angle: f64,
    /// Cut depth along the tool axis (mm).
    pub cut_depth: f64,
}

impl Default for ToolParams {
    fn default() -> Self {
        ToolParams {
            tool_radius: 1.5,
            tilt_angle: 20.0,
            cut_depth: 3.0,
        }
    }
}

impl ToolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tool_radius > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tool_radius {} must be > 0",
                self.tool_radius
            )));
        }
        if !(0.0..=45.0).contains(&self.tilt_angle) {
            return Err(Error::InvalidParams(format!(
                "tilt_angle {} outside [0, 45]",
                self.tilt_angle
            )));
        }
        if !(self.cut_depth > 0.0) {
            return Err(Error::InvalidParams(format!(
                "cut_depth {} must be > 0",
                self.cut_depth
            )));
        }
        Ok(())
    }
}

/// Direction of the cutter-radius offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetMode {
    /// Outward in-plane normal of the curve.
    #[default]
    CurveNormal,
    /// In-plane direction from the center to the curve point.
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Point3,
    /// Unit tool axis, pointing from the material toward the tool holder.
    pub axis: Vector3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Toolpath {
    pub waypoints: Vec<Waypoint>,
    pub tool: ToolParams,
    pub frame: Frame,
    /// Contour-plane normal the tilt is measured against.
    pub normal: Vector3,
}

impl Toolpath {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3> {
        self.waypoints.iter().map(|w| w.position).collect()
    }

    /// Largest chord between consecutive waypoints, closing pair included.
    pub fn max_spacing(&self) -> f64 {
        let n = self.waypoints.len();
        (0..n)
            .map(|i| (self.waypoints[(i + 1) % n].position - self.waypoints[i].position).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToolpathParams {
    pub tool: ToolParams,
    /// Largest chord between consecutive waypoints (mm).
    pub step: f64,
    pub offset: OffsetMode,
    pub execution: Execution,
}

impl Default for ToolpathParams {
    fn default() -> Self {
        ToolpathParams {
            tool: ToolParams::default(),
            step: DEFAULT_STEP,
            offset: OffsetMode::default(),
            execution: Execution::default(),
        }
    }
}

/// Discretizes the spline and attaches tilted tool axes and offset
/// positions. Waypoints run counter-clockwise about the plane normal.
pub fn generate_toolpath(
    spline: &SplineCurve,
    frame: &PlaneFrame,
    params: &ToolpathParams,
    label: impl Into<Frame>,
) -> Result<Toolpath> {
    params.tool.validate()?;
    if !(params.step > 0.0) {
        return Err(Error::InvalidParams(format!("step {} must be > 0", params.step)));
    }
    let n = frame.normal;
    let (sin_a, cos_a) = params.tool.tilt_angle.to_radians().sin_cos();
    let r = params.tool.tool_radius;

    let label = label.into();
    let mut count = ((spline.arc_length() / params.step).ceil() as usize).max(4);
    loop {
        let mut s = spline.arc_length_params(count);
        let pts: Vec<Point3> = s.iter().map(|&si| spline.eval(si)).collect();
        let reversed = signed_area(&pts, frame) < 0.0;
        if reversed {
            s[1..].reverse();
        }
        let sign = if reversed { -1.0 } else { 1.0 };
        let computed: Vec<Result<Waypoint>> = par::map_range(params.execution, count, |i| {
            let p = spline.eval(s[i]);
            let d = spline.derivative(s[i]) * sign;
            let tangent = (d - n * n.dot(&d))
                .try_normalize(1e-12)
                .ok_or(Error::DegenerateTangent { index: i })?;
            let t = p - frame.origin;
            let t_hat = (t - n * n.dot(&t))
                .try_normalize(1e-9)
                .ok_or(Error::CenterOnCurve { index: i })?;
            let e = match params.offset {
                OffsetMode::CurveNormal => tangent.cross(&n),
                OffsetMode::Radial => t_hat,
            };
            Ok(Waypoint {
                position: p + e * r,
                axis: (n * cos_a + t_hat * sin_a).normalize(),
            })
        });
        let tp = Toolpath {
            waypoints: computed.into_iter().collect::<Result<Vec<_>>>()?,
            tool: params.tool,
            frame: label.clone(),
            normal: n,
        };
        // the offset curve is longer than the spline, so refine until its chords fit
        if tp.max_spacing() <= params.step {
            return Ok(tp);
        }
        count = (count as f64 * 1.1).ceil() as usize + 1;
    }
}

/// Shoelace area of the points projected onto the plane; positive when
/// they run counter-clockwise about the normal.
pub fn signed_area(pts: &[Point3], frame: &PlaneFrame) -> f64 {
    let n = pts.len();
    let local: Vec<_> = pts.iter().map(|p| frame.local(p)).collect();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (local[i], local[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
}

/// Maps positions and axes through `t`; the frame label must match.
pub fn transform_toolpath(tp: &Toolpath, t: &RigidTransform) -> Result<Toolpath> {
    if t.from_frame() != &tp.frame {
        return Err(Error::FrameMismatch {
            expected: t.from_frame().to_string(),
            found: tp.frame.to_string(),
        });
    }
    Ok(Toolpath {
        waypoints: tp
            .waypoints
            .iter()
            .map(|w| Waypoint {
                position: t.apply_point(&w.position),
                axis: t.apply_vector(&w.axis),
            })
            .collect(),
        tool: tp.tool,
        frame: t.to_frame().clone(),
        normal: t.apply_vector(&tp.normal),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolpathFormat {
    WaypointText,
    GcodeLike,
}

impl FromStr for ToolpathFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "waypoint-text" => Ok(ToolpathFormat::WaypointText),
            "gcode-like" => Ok(ToolpathFormat::GcodeLike),
            other => Err(Error::Config(format!(
                "unknown toolpath format '{other}' (expected waypoint-text or gcode-like)"
            ))),
        }
    }
}

impl fmt::Display for ToolpathFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToolpathFormat::WaypointText => "waypoint-text",
            ToolpathFormat::GcodeLike => "gcode-like",
        })
    }
}

fn f6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

pub fn format_toolpath(tp: &Toolpath, format: ToolpathFormat) -> Result<String> {
    if tp.is_empty() {
        return Err(Error::EmptyToolpath);
    }
    let mut s = String::new();
    match format {
        ToolpathFormat::WaypointText => s.push_str("# toolpath waypoint-text\n"),
        ToolpathFormat::GcodeLike => s.push_str("# toolpath gcode-like\n"),
    }
    s.push_str(&format!("# frame {}\n", tp.frame));
    s.push_str(&format!("# tool_radius {}\n", f6(tp.tool.tool_radius)));
    s.push_str(&format!("# tilt_angle {}\n", f6(tp.tool.tilt_angle)));
    s.push_str(&format!("# cut_depth {}\n", f6(tp.tool.cut_depth)));
    s.push_str(&format!(
        "# normal {} {} {}\n",
        f6(tp.normal.x),
        f6(tp.normal.y),
        f6(tp.normal.z)
    ));
    s.push_str(&format!("# count {}\n", tp.len()));
    match format {
        ToolpathFormat::WaypointText => {
            for w in &tp.waypoints {
                let (p, v) = (w.position, w.axis);
                s.push_str(&format!(
                    "{} {} {} {} {} {}\n",
                    f6(p.x),
                    f6(p.y),
                    f6(p.z),
                    f6(v.x),
                    f6(v.y),
                    f6(v.z)
                ));
            }
        }
        ToolpathFormat::GcodeLike => {
            s.push_str("# feed F<feed> set by the controller\n");
            for w in &tp.waypoints {
                let (p, v) = (w.position, w.axis);
                s.push_str(&format!(
                    "G1 X{} Y{} Z{} I{} J{} K{}\n",
                    f6(p.x),
                    f6(p.y),
                    f6(p.z),
                    f6(v.x),
                    f6(v.y),
                    f6(v.z)
                ));
            }
        }
    }
    Ok(s)
}

pub fn export_toolpath(tp: &Toolpath, path: &Path, format: ToolpathFormat) -> Result<()> {
    let text = format_toolpath(tp, format)?;
    textio::write_file(path, &text)
}

/// Reads either export format.
pub fn parse_toolpath(text: &str) -> Result<Toolpath> {
    let ctx = "toolpath";
    let mut frame = None;
    let mut tool = ToolParams::default();
    let mut normal = None;
    let mut count = None;
    let mut waypoints = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let mut it = c.split_whitespace();
            let key = it.next().unwrap_or("");
            let rest: Vec<&str> = it.collect();
            let one = || -> Result<f64> {
                rest.first()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(ctx, format!("bad header line '{line}'")))
            };
            match key {
                "frame" if rest.len() == 1 => frame = Some(Frame::new(rest[0])),
                "tool_radius" => tool.tool_radius = one()?,
                "tilt_angle" => tool.tilt_angle = one()?,
                "cut_depth" => tool.cut_depth = one()?,
                "count" => count = Some(one()? as usize),
                "normal" => {
                    let v = textio::parse_floats(&rest.join(" "), ctx)?;
                    if v.len() != 3 {
                        return Err(Error::parse(ctx, "normal needs 3 values"));
                    }
                    normal = Some(Vector3::new(v[0], v[1], v[2]));
                }
                _ => {}
            }
            continue;
        }
        let v: Vec<f64> = if let Some(g) = line.strip_prefix("G1") {
            let mut fields = [None; 6];
            for tok in g.split_whitespace() {
                let (k, val) = tok.split_at(1);
                let slot = "XYZIJK"
                    .find(k)
                    .ok_or_else(|| Error::parse(ctx, format!("unknown field '{tok}'")))?;
                fields[slot] = Some(
                    val.parse::<f64>()
                        .map_err(|_| Error::parse(ctx, format!("bad number in '{tok}'")))?,
                );
            }
            fields
                .iter()
                .map(|f| f.ok_or_else(|| Error::parse(ctx, format!("incomplete move '{line}'"))))
                .collect::<Result<_>>()?
        } else {
            textio::parse_floats(line, ctx)?
        };
        if v.len() != 6 {
            return Err(Error::parse(ctx, format!("expected 'x y z i j k', got '{line}'")));
        }
        waypoints.push(Waypoint {
            position: Point3::new(v[0], v[1], v[2]),
            axis: Vector3::new(v[3], v[4], v[5]),
        });
    }
    if waypoints.is_empty() {
        return Err(Error::EmptyToolpath);
    }
    if let Some(c) = count {
        if c != waypoints.len() {
            return Err(Error::parse(
                ctx,
                format!("header says {c} waypoints, found {}", waypoints.len()),
            ));
        }
    }
    tool.validate()?;
    Ok(Toolpath {
        waypoints,
        tool,
        frame: frame.ok_or_else(|| Error::parse(ctx, "missing '# frame' header"))?,
        normal: normal.ok_or_else(|| Error::parse(ctx, "missing '# normal' header"))?,
    })
}

pub fn load_toolpath(path: &Path) -> Result<Toolpath> {
    parse_toolpath(&textio::read_file(path)?)
}
