//! Procedural test and fixture meshes.

use std::collections::HashMap;
use std::f64::consts::TAU;

use super::TriangleMesh;
use crate::Point3;

/// Geodesic sphere centered at the origin with outward winding.
/// Subdivision `s` yields `10·4^s + 2` vertices.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Point3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point3::from(nalgebra::Vector3::new(x, y, z).normalize()))
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Point3>| -> u32 {
            let key = if a < b { (a, b) } else { (b, a) };
            *mid.entry(key).or_insert_with(|| {
                let m = (verts[a as usize].coords + verts[b as usize].coords).normalize();
                verts.push(Point3::from(m));
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|p| p * radius).collect();
    TriangleMesh::new(verts, faces).expect("icosphere topology is valid")
}

/// Flat `nx × ny`-cell grid in the z = 0 plane starting at the origin,
/// normals +z.
pub fn grid(nx: usize, ny: usize, spacing: f64) -> TriangleMesh {
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let idx = |i: usize, j: usize| (j * (nx + 1) + i) as u32;
    let mut faces = Vec::with_capacity(nx * ny * 2);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(verts, faces).expect("grid topology is valid")
}

/// Open cylinder about the z axis (no caps), outward normals, with
/// alternating diagonals.
pub fn cylinder(radius: f64, height: f64, segments: usize, rows: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(segments * (rows + 1));
    for j in 0..=rows {
        let z = height * j as f64 / rows as f64;
        // stagger alternate rows by half a segment for near-equilateral faces
        let shift = if j % 2 == 1 { 0.5 } else { 0.0 };
        for i in 0..segments {
            let th = TAU * (i as f64 + shift) / segments as f64;
            verts.push(Point3::new(radius * th.cos(), radius * th.sin(), z));
        }
    }
    let idx = |i: usize, j: usize| (j * segments + i % segments) as u32;
    let mut faces = Vec::new();
    for j in 0..rows {
        for i in 0..segments {
            if j % 2 == 0 {
                faces.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
                faces.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            } else {
                faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
                faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            }
        }
    }
    TriangleMesh::new(verts, faces).expect("cylinder topology is valid")
}

/// Flat annulus in z = 0 between `r_in` and `r_out`, normals +z. With
/// `r_in == 0` the center collapses to a single vertex (a disk).
pub fn annulus(r_in: f64, r_out: f64, rings: usize, segments: usize) -> TriangleMesh {
    polar_patch(
        segments,
        rings,
        |theta, s| {
            let r = r_in + (r_out - r_in) * s;
            Point3::new(r * theta.cos(), r * theta.sin(), 0.0)
        },
        r_in == 0.0,
    )
}

pub fn disk(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    annulus(0.0, radius, rings, segments)
}

/// Structured polar patch: `rings + 1` loops of `segments` vertices from
/// `s = 0` to `s = 1`, counter-clockwise in θ. Faces are wound so the
/// normal is along `∂s × ∂θ`. With `collapse_center` the `s = 0` loop is a
/// single vertex.
pub fn polar_patch(
    segments: usize,
    rings: usize,
    map: impl Fn(f64, f64) -> Point3,
    collapse_center: bool,
) -> TriangleMesh {
    let mut verts = Vec::new();
    let first = if collapse_center {
        verts.push(map(0.0, 0.0));
        1
    } else {
        0
    };
    for j in first..=rings {
        let s = j as f64 / rings as f64;
        for i in 0..segments {
            verts.push(map(TAU * i as f64 / segments as f64, s));
        }
    }
    let ring_start = |j: usize| -> usize {
        if collapse_center {
            1 + (j - 1) * segments
        } else {
            j * segments
        }
    };
    let idx = |i: usize, j: usize| (ring_start(j) + i % segments) as u32;
    let mut faces = Vec::new();
    if collapse_center {
        for i in 0..segments {
            faces.push([0, idx(i, 1), idx(i + 1, 1)]);
        }
    }
    for j in first..rings {
        for i in 0..segments {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    TriangleMesh::new(verts, faces).expect("polar patch topology is valid")
}

/// Closed square plate `[-half, half]² × [0, thickness]`, outward normals.
pub fn square_plate(half: f64, thickness: f64, cells: usize) -> TriangleMesh {
    let n = cells;
    let step = 2.0 * half / n as f64;
    let mut verts = Vec::new();
    // top and bottom grids
    for &z in &[thickness, 0.0] {
        for j in 0..=n {
            for i in 0..=n {
                verts.push(Point3::new(-half + i as f64 * step, -half + j as f64 * step, z));
            }
        }
    }
    let per = (n + 1) * (n + 1);
    let idx = |i: usize, j: usize, layer: usize| (layer * per + j * (n + 1) + i) as u32;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j, 0), idx(i + 1, j, 0), idx(i + 1, j + 1, 0), idx(i, j + 1, 0));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
            let (a, b, c, d) = (idx(i, j, 1), idx(i + 1, j, 1), idx(i + 1, j + 1, 1), idx(i, j + 1, 1));
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    // side walls walk the perimeter counter-clockwise seen from +z
    let mut perimeter = Vec::new();
    for i in 0..n {
        perimeter.push((i, 0));
    }
    for j in 0..n {
        perimeter.push((n, j));
    }
    for i in (1..=n).rev() {
        perimeter.push((i, n));
    }
    for j in (1..=n).rev() {
        perimeter.push((0, j));
    }
    let m = perimeter.len();
    for k in 0..m {
        let (i0, j0) = perimeter[k];
        let (i1, j1) = perimeter[(k + 1) % m];
        let (t0, t1) = (idx(i0, j0, 0), idx(i1, j1, 0));
        let (b0, b1) = (idx(i0, j0, 1), idx(i1, j1, 1));
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
    }
    TriangleMesh::new(verts, faces).expect("plate topology is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_loops, vertex_normals};

    #[test]
    fn annulus_and_disk_face_up() {
        for m in [annulus(5.0, 10.0, 3, 24), disk(10.0, 3, 24)] {
            for n in vertex_normals(&m) {
                assert!((n - crate::Vector3::z()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn icosphere_counts() {
        let m = icosphere(1.0, 3);
        assert_eq!(m.vertex_count(), 642);
        assert_eq!(m.face_count(), 1280);
        assert!(boundary_loops(&m).unwrap().is_empty());
    }

    #[test]
    fn plate_is_closed_and_outward() {
        let m = square_plate(10.0, 3.0, 8);
        assert!(boundary_loops(&m).unwrap().is_empty());
        let n = vertex_normals(&m);
        let c = nalgebra::Vector3::new(0.0, 0.0, 1.5);
        for (p, n) in m.vertices().iter().zip(&n) {
            assert!((p.coords - c).dot(n) > 0.0);
        }
    }
}
