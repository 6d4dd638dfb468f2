//! Gap distance between a resized implant's rim and the defect rim.

use std::fmt::Write as _;
use std::path::Path;

use crate::contour::PlaneFrame;
use crate::error::{Error, Result};
use crate::mesh::{boundary_loops, TriangleMesh};
use crate::textio;
use crate::Point3;

pub const DEFAULT_SAMPLES: usize = 360;

/// Signed gaps along the implant rim: positive is clearance to the defect
/// edge, negative is overhang. Aggregates are over `|gap|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// Arc length of each sample along the implant rim (mm).
    pub arc: Vec<f64>,
    pub gaps: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    /// Some part of the implant overhangs the defect edge.
    pub requires_trimming: bool,
}

impl GapReport {
    pub fn from_samples(arc: Vec<f64>, gaps: Vec<f64>) -> GapReport {
        let n = gaps.len().max(1) as f64;
        let abs: Vec<f64> = gaps.iter().map(|g| g.abs()).collect();
        let mean = abs.iter().sum::<f64>() / n;
        let var = abs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        GapReport {
            max: abs.iter().copied().fold(0.0, f64::max),
            mean,
            std: var.sqrt(),
            requires_trimming: gaps.iter().any(|&g| g < 0.0),
            arc,
            gaps,
        }
    }

    pub fn count(&self) -> usize {
        self.gaps.len()
    }

    pub fn min_signed(&self) -> f64 {
        self.gaps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Summary block as `#` lines, then one `s gap` line per sample.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# gap report (mm; positive = clearance, negative = overhang)\n");
        let _ = writeln!(s, "# samples {}", self.count());
        let _ = writeln!(s, "# max_abs_gap {:.6}", self.max);
        let _ = writeln!(s, "# mean_abs_gap {:.6}", self.mean);
        let _ = writeln!(s, "# std_abs_gap {:.6}", self.std);
        let _ = writeln!(s, "# min_signed_gap {:.6}", self.min_signed());
        let _ = writeln!(
            s,
            "# requires_trimming {}",
            if self.requires_trimming { "yes" } else { "no" }
        );
        s.push_str("# s gap\n");
        for (a, g) in self.arc.iter().zip(&self.gaps) {
            let _ = writeln!(s, "{a:.6} {g:.6}");
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("s,gap\n");
        for (a, g) in self.arc.iter().zip(&self.gaps) {
            let _ = writeln!(s, "{a:.6},{g:.6}");
        }
        s
    }

    /// Reads the text form back; aggregates are recomputed from the samples.
    pub fn from_text(text: &str) -> Result<GapReport> {
        let mut arc = Vec::new();
        let mut gaps = Vec::new();
        for line in textio::content_lines(text) {
            let v = textio::parse_floats(line, "gap report")?;
            if v.len() != 2 {
                return Err(Error::parse("gap report", format!("expected 's gap', got '{line}'")));
            }
            arc.push(v[0]);
            gaps.push(v[1]);
        }
        Ok(GapReport::from_samples(arc, gaps))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_csv())
    }
}

/// Crossing-number test in plane coordinates.
fn encloses(poly: &[Point3], q: &Point3, frame: &PlaneFrame) -> bool {
    let l: Vec<_> = poly.iter().map(|p| frame.local(p)).collect();
    let p = frame.local(q);
    let mut inside = false;
    let n = l.len();
    for i in 0..n {
        let (a, b) = (l[i], l[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            inside = !inside;
        }
    }
    inside
}

fn closest_on_polyline(poly: &[Point3], q: &Point3) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let d = b - a;
            let t = if d.norm_squared() > 0.0 {
                ((q - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (a + d * t - q).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn loop_length(poly: &[Point3]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| (poly[(i + 1) % n] - poly[i]).norm()).sum()
}

/// `n` points at uniform arc length along a closed polyline, with their
/// arc-length positions.
pub fn sample_loop(poly: &[Point3], n: usize) -> (Vec<f64>, Vec<Point3>) {
    let m = poly.len();
    let mut cum = vec![0.0];
    for i in 0..m {
        cum.push(cum[i] + (poly[(i + 1) % m] - poly[i]).norm());
    }
    let total = cum[m];
    let mut j = 0;
    let mut arc = Vec::with_capacity(n);
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while j + 1 < m && cum[j + 1] <= s {
            j += 1;
        }
        let span = cum[j + 1] - cum[j];
        let f = if span > 0.0 { (s - cum[j]) / span } else { 0.0 };
        arc.push(s);
        pts.push(poly[j] + (poly[(j + 1) % m] - poly[j]) * f);
    }
    (arc, pts)
}

/// Gaps from `n_samples` points on `sampled` to the `reference` rim,
/// positive where the sample lies inside the reference outline.
pub fn loop_gaps(sampled: &[Point3], reference: &[Point3], frame: &PlaneFrame, n_samples: usize) -> GapReport {
    let (arc, pts) = sample_loop(sampled, n_samples);
    let gaps = pts
        .iter()
        .map(|p| {
            let d = closest_on_polyline(reference, p);
            if encloses(reference, p, frame) {
                d
            } else {
                -d
            }
        })
        .collect();
    GapReport::from_samples(arc, gaps)
}

/// Gap between the resized implant's top rim and the defect rim.
///
/// Only boundary loops that enclose the plane origin in plane coordinates
/// are considered. The implant rim is the highest such loop along the
/// normal; the defect rim is the skull loop closest on average to the
/// implant rim samples. Coincident duplicate loops count once.
pub fn gap_analysis(
    resized_implant: &TriangleMesh,
    defect_skull: &TriangleMesh,
    frame: &PlaneFrame,
    n_samples: usize,
) -> Result<GapReport> {
    if n_samples < 3 {
        return Err(Error::InvalidParams(format!("n_samples {n_samples} below 3")));
    }
    let around = |m: &TriangleMesh| -> Result<Vec<Vec<Point3>>> {
        Ok(boundary_loops(m)?
            .iter()
            .map(|l| l.points(m))
            .filter(|pts| encloses(pts, &frame.origin, frame))
            .collect())
    };
    let height = |pts: &Vec<Point3>| pts.iter().map(|p| frame.local(p).z).sum::<f64>() / pts.len() as f64;
    let implant_loop = around(resized_implant)?
        .into_iter()
        .max_by(|a, b| height(a).total_cmp(&height(b)))
        .ok_or(Error::NoBoundary)?;

    let mut candidates: Vec<Vec<Point3>> = Vec::new();
    for l in around(defect_skull)? {
        let dup = candidates.iter().any(|c| {
            (loop_length(c) - loop_length(&l)).abs() <= 1e-9 * loop_length(c)
                && l.iter().all(|p| closest_on_polyline(c, p) < 1e-6)
        });
        if !dup {
            candidates.push(l);
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoBoundary);
    }
    let (_, samples) = sample_loop(&implant_loop, n_samples);
    let mut scored: Vec<(f64, Vec<Point3>)> = candidates
        .into_iter()
        .map(|c| {
            let score = samples.iter().map(|p| closest_on_polyline(&c, p)).sum::<f64>() / samples.len() as f64;
            (score, c)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    if scored.len() > 1 {
        let (s0, l0) = (scored[0].0, loop_length(&scored[0].1));
        let (s1, l1) = (scored[1].0, loop_length(&scored[1].1));
        if (l1 - l0).abs() <= 0.1 * l0 && s1 <= 1.1 * s0 + 1e-6 {
            return Err(Error::AmbiguousLoops(format!(
                "defect loops of length {l0:.1} and {l1:.1} mm are equally close to the implant"
            )));
        }
    }
    Ok(loop_gaps(&implant_loop, &scored[0].1, frame, n_samples))
}
