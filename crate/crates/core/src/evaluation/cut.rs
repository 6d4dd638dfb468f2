//! Software stand-in for the robotic cut: trims an implant mesh against the
//! surface swept by a tilted cylindrical cutter.

use std::collections::HashMap;

use crate::contour::PlaneFrame;
use crate::error::{Error, Result};
use crate::mesh::{self, SpatialIndex, TriangleMesh};
use crate::par::{self, Execution};
use crate::toolpath::Toolpath;
use crate::transform::Frame;
use crate::Point3;

/// Cutter wall as a function of height: at height `h` above the plane the
/// tool axis through waypoint `i` sits at `xy[i] + slope[i]·(h − h[i])`.
struct CutSurface {
    frame: PlaneFrame,
    xy: Vec<[f64; 2]>,
    h: Vec<f64>,
    slope: Vec<[f64; 2]>,
    radius: f64,
}

impl CutSurface {
    fn new(tp: &Toolpath) -> Result<CutSurface> {
        let n = tp.waypoints.len();
        let center = mesh::centroid_of(&tp.positions()).ok_or(Error::EmptyToolpath)?;
        let frame = PlaneFrame::from_origin_normal(center, tp.normal)?;
        let mut xy = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        let mut slope = Vec::with_capacity(n);
        for w in &tp.waypoints {
            let l = frame.local(&w.position);
            let a = frame.local(&(frame.origin + w.axis));
            if a.z <= 1e-9 {
                return Err(Error::InvalidParams("tool axis parallel to the contour plane".into()));
            }
            xy.push([l.x, l.y]);
            h.push(l.z);
            slope.push([a.x / a.z, a.y / a.z]);
        }
        Ok(CutSurface {
            frame,
            xy,
            h,
            slope,
            radius: tp.tool.tool_radius,
        })
    }

    /// Negative where material survives: signed in-plane distance to the
    /// cutter-axis polygon at the point's height (negative inside), plus
    /// the tool radius.
    fn value(&self, p: &Point3) -> f64 {
        let l = self.frame.local(p);
        let n = self.xy.len();
        let q = |i: usize| {
            let dh = l.z - self.h[i];
            [
                self.xy[i][0] + self.slope[i][0] * dh,
                self.xy[i][1] + self.slope[i][1] * dh,
            ]
        };
        let mut best = f64::INFINITY;
        let mut inside = false;
        let mut a = q(n - 1);
        for i in 0..n {
            let b = q(i);
            best = best.min(segment_distance([l.x, l.y], a, b));
            if (a[1] > l.y) != (b[1] > l.y) && l.x < a[0] + (l.y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
                inside = !inside;
            }
            a = b;
        }
        (if inside { -best } else { best }) + self.radius
    }

    /// Point on `inside → outside` where the value crosses zero.
    fn crossing(&self, inside: &Point3, outside: &Point3) -> Point3 {
        let (mut lo, mut hi) = (0.0, 1.0);
        let d = outside - inside;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.value(&(inside + d * mid)) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo) * d.norm() < 1e-10 {
                break;
            }
        }
        inside + d * (0.5 * (lo + hi))
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

/// Trims `implant` to the region enclosed by the cutter wall.
///
/// Every vertex is classified against the swept cutter surface, faces
/// outside are dropped and faces across the wall are split at it. Of the
/// remaining pieces only those crossed by the plane-normal line through
/// the toolpath center are kept.
pub fn virtual_cut(
    implant: &TriangleMesh,
    implant_frame: &Frame,
    tp: &Toolpath,
    exec: Execution,
) -> Result<TriangleMesh> {
    if &tp.frame != implant_frame {
        return Err(Error::FrameMismatch {
            expected: implant_frame.to_string(),
            found: tp.frame.to_string(),
        });
    }
    check_closed(tp)?;
    let surface = CutSurface::new(tp)?;
    let values = par::map(exec, implant.vertices(), |p| surface.value(p));
    let keep: Vec<bool> = values.iter().map(|&g| g <= 0.0).collect();

    let mut verts = implant.vertices().to_vec();
    let mut split: HashMap<(u32, u32), u32> = HashMap::new();
    let mut crossing = |a: u32, b: u32, verts: &mut Vec<Point3>| -> u32 {
        *split.entry(mesh::edge_key(a, b)).or_insert_with(|| {
            let (i, o) = if keep[a as usize] { (a, b) } else { (b, a) };
            let p = surface.crossing(&verts[i as usize], &verts[o as usize]);
            verts.push(p);
            (verts.len() - 1) as u32
        })
    };
    let mut faces = Vec::with_capacity(implant.face_count());
    for f in implant.faces() {
        let inside: Vec<bool> = f.iter().map(|&v| keep[v as usize]).collect();
        match inside.iter().filter(|&&b| b).count() {
            3 => faces.push(*f),
            0 => {}
            1 => {
                let k = inside.iter().position(|&b| b).expect("one inside");
                let (a, b, c) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let ab = crossing(a, b, &mut verts);
                let ca = crossing(c, a, &mut verts);
                faces.push([a, ab, ca]);
            }
            _ => {
                let k = inside.iter().position(|&b| !b).expect("one outside");
                let (a, b, c) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
                let ab = crossing(a, b, &mut verts);
                let ca = crossing(c, a, &mut verts);
                faces.push([ab, b, c]);
                faces.push([ab, c, ca]);
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptyResult);
    }
    let trimmed = compact(verts, faces)?;

    // keep the pieces around the toolpath center
    let index = SpatialIndex::new(trimmed.clone());
    let hit_faces: Vec<usize> = index
        .line_hits(&surface.frame.origin, &surface.frame.normal)
        .iter()
        .map(|h| h.face)
        .collect();
    let components = trimmed.face_components();
    let mut keep_face = vec![false; trimmed.face_count()];
    for comp in &components {
        if comp.iter().any(|f| hit_faces.contains(f)) {
            for &f in comp {
                keep_face[f] = true;
            }
        }
    }
    if !keep_face.iter().any(|&k| k) {
        return Err(Error::EmptyResult);
    }
    let faces = trimmed
        .faces()
        .iter()
        .zip(&keep_face)
        .filter(|(_, &k)| k)
        .map(|(f, _)| *f)
        .collect();
    compact(trimmed.vertices().to_vec(), faces)
}

/// Drops unreferenced vertices, keeping the order of the rest.
fn compact(verts: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<TriangleMesh> {
    let mut used = vec![false; verts.len()];
    for f in &faces {
        for &v in f {
            used[v as usize] = true;
        }
    }
    let mut remap = vec![u32::MAX; verts.len()];
    let mut out = Vec::new();
    for (i, p) in verts.into_iter().enumerate() {
        if used[i] {
            remap[i] = out.len() as u32;
            out.push(p);
        }
    }
    let faces = faces
        .into_iter()
        .map(|f| [remap[f[0] as usize], remap[f[1] as usize], remap[f[2] as usize]])
        .collect();
    TriangleMesh::new(out, faces)
}

/// A toolpath is closed when its closing chord is no longer than a few
/// regular steps.
fn check_closed(tp: &Toolpath) -> Result<()> {
    let n = tp.waypoints.len();
    if n == 0 {
        return Err(Error::EmptyToolpath);
    }
    if n < 3 {
        return Err(Error::OpenToolpath);
    }
    let chord = |i: usize| (tp.waypoints[(i + 1) % n].position - tp.waypoints[i].position).norm();
    let longest = (0..n - 1).map(chord).fold(0.0, f64::max);
    if chord(n - 1) > 3.0 * longest + 1e-9 {
        return Err(Error::OpenToolpath);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_loops, primitives};
    use crate::toolpath::{fit_spline, generate_toolpath, ToolParams, ToolpathParams};
    use crate::Vector3;
    use std::f64::consts::TAU;

    fn circle_toolpath(radius: f64, z: f64, tilt: f64, tool_radius: f64) -> Toolpath {
        let pts: Vec<Point3> = (0..256)
            .map(|i| {
                let t = TAU * i as f64 / 256.0;
                Point3::new(radius * t.cos(), radius * t.sin(), z)
            })
            .collect();
        let spline = fit_spline(&pts, 256).unwrap();
        let frame = PlaneFrame::from_origin_normal(Point3::new(0.0, 0.0, z), Vector3::z()).unwrap();
        let params = ToolpathParams {
            tool: ToolParams {
                tool_radius,
                tilt_angle: tilt,
                cut_depth: 3.0,
            },
            step: 0.5,
            ..ToolpathParams::default()
        };
        generate_toolpath(&spline, &frame, &params, "ct").unwrap()
    }

    fn ct() -> Frame {
        Frame::new("ct")
    }

    fn loop_radius(m: &TriangleMesh, z: f64) -> f64 {
        let loops = boundary_loops(m).unwrap();
        let pts = loops
            .iter()
            .map(|l| l.points(m))
            .find(|p| p.iter().all(|q| (q.z - z).abs() < 1e-9))
            .expect("loop at height");
        pts.iter().map(|p| p.x.hypot(p.y)).sum::<f64>() / pts.len() as f64
    }

    #[test]
    fn circular_cut_through_plate() {
        let plate = primitives::square_plate(40.0, 3.0, 40);
        let tp = circle_toolpath(25.0, 3.0, 0.0, 1.5);
        let out = virtual_cut(&plate, &ct(), &tp, Execution::Sequential).unwrap();
        let edge = plate.mean_edge_length();
        for z in [0.0, 3.0] {
            assert!((loop_radius(&out, z) - 25.0).abs() < edge);
        }
        // every loop vertex sits on the circle up to the polygonal toolpath
        for l in boundary_loops(&out).unwrap() {
            for p in l.points(&out) {
                assert!((p.x.hypot(p.y) - 25.0).abs() < 0.01);
            }
        }
        assert!(out.surface_area() < plate.surface_area());
    }

    #[test]
    fn toolpath_outside_leaves_plate_unchanged() {
        let plate = primitives::square_plate(10.0, 3.0, 8);
        let tp = circle_toolpath(30.0, 3.0, 0.0, 1.5);
        let out = virtual_cut(&plate, &ct(), &tp, Execution::Sequential).unwrap();
        assert_eq!(out.vertices(), plate.vertices());
        assert_eq!(out.faces(), plate.faces());
    }

    #[test]
    fn tilted_cut_bevel() {
        let plate = primitives::square_plate(40.0, 3.0, 60);
        let tp = circle_toolpath(25.0, 3.0, 20.0, 1.5);
        let out = virtual_cut(&plate, &ct(), &tp, Execution::Sequential).unwrap();
        let top = loop_radius(&out, 3.0);
        let bottom = loop_radius(&out, 0.0);
        let expect = 2.0 * 3.0 * 20f64.to_radians().tan();
        // the outward-leaning tool leaves the bottom narrower than the top
        let diff = 2.0 * (top - bottom);
        assert!((diff - expect).abs() / expect < 0.05, "{diff} vs {expect}");
    }

    #[test]
    fn vertices_are_original_or_on_the_wall() {
        let plate = primitives::square_plate(40.0, 3.0, 30);
        let tp = circle_toolpath(22.0, 3.0, 15.0, 2.0);
        let out = virtual_cut(&plate, &ct(), &tp, Execution::Parallel).unwrap();
        let surface = CutSurface::new(&tp).unwrap();
        for p in out.vertices() {
            let original = plate.vertices().iter().any(|q| q == p);
            assert!(original || surface.value(p).abs() < 1e-6);
        }
    }

    #[test]
    fn frame_and_shape_errors() {
        let plate = primitives::square_plate(40.0, 3.0, 10);
        let tp = circle_toolpath(25.0, 3.0, 0.0, 1.5);
        assert!(matches!(
            virtual_cut(&plate, &Frame::new("base"), &tp, Execution::Sequential),
            Err(Error::FrameMismatch { .. })
        ));
        let mut open = tp.clone();
        open.waypoints.truncate(open.waypoints.len() / 2);
        assert!(matches!(
            virtual_cut(&plate, &ct(), &open, Execution::Sequential),
            Err(Error::OpenToolpath)
        ));
    }

    #[test]
    fn far_pieces_are_discarded() {
        let near = primitives::square_plate(40.0, 3.0, 20);
        let far = near.transformed(&crate::RigidTransform::translation_only(
            Vector3::new(0.0, 0.0, 50.0),
            "a",
            "a",
        ));
        let offset = near.transformed(&crate::RigidTransform::translation_only(
            Vector3::new(200.0, 0.0, 0.0),
            "a",
            "a",
        ));
        let both = TriangleMesh::merged(&[&near, &offset]);
        let tp = circle_toolpath(25.0, 3.0, 0.0, 1.5);
        let out = virtual_cut(&both, &ct(), &tp, Execution::Sequential).unwrap();
        assert!(out.vertices().iter().all(|p| p.x < 100.0));
        // pieces stacked along the axis are all kept
        let stacked = TriangleMesh::merged(&[&near, &far]);
        let out = virtual_cut(&stacked, &ct(), &tp, Execution::Sequential).unwrap();
        assert!(out.vertices().iter().any(|p| p.z > 40.0));
    }
}
