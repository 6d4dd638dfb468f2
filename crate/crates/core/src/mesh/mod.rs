//! Indexed triangle meshes and the queries every other stage builds on.

mod boundary;
mod bvh;
mod curvature;
pub mod io;
pub mod primitives;

use std::collections::HashMap;

pub use boundary::{boundary_loops, BoundaryLoop};
pub use bvh::{Aabb, ClosestHit, RayHit, SpatialIndex};
pub use curvature::{mean_curvature, VertexScalarField};
pub use io::{load_mesh, save_mesh, save_mesh_with_quality, MeshFormat};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;
use crate::{Point3, Vector3};

/// Indexed triangle surface in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
    normals: Option<Vec<Vector3>>,
}

impl TriangleMesh {
    /// Validates indices; rejects faces with repeated vertices.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex out of range ({n} vertices)"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
        }
        if vertices.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            normals: None,
        })
    }

    /// Attaches per-vertex normals; each must be unit length within 1e-9.
    pub fn with_normals(mut self, normals: Vec<Vector3>) -> Result<Self> {
        if normals.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} normals for {} vertices",
                normals.len(),
                self.vertices.len()
            )));
        }
        if let Some(i) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidMesh(format!("normal {i} is not unit length")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> Option<&[Vector3]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (twice the area, oriented by winding).
    pub fn face_area_vector(&self, face: usize) -> Vector3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| 0.5 * self.face_area_vector(f).norm())
            .sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edge_faces();
        if edges.is_empty() {
            return 0.0;
        }
        let total: f64 = edges
            .keys()
            .map(|&(a, b)| (self.vertices[a as usize] - self.vertices[b as usize]).norm())
            .sum();
        total / edges.len() as f64
    }

    /// Undirected edge -> incident faces, keyed with the smaller index first.
    pub(crate) fn edge_faces(&self) -> HashMap<(u32, u32), Vec<u32>> {
        let mut map: HashMap<(u32, u32), Vec<u32>> = HashMap::with_capacity(self.faces.len() * 2);
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                map.entry(edge_key(a, b)).or_default().push(fi as u32);
            }
        }
        map
    }

    /// Errors with [`Error::NonManifold`] if an edge has more than two faces.
    pub(crate) fn check_manifold_edges(&self) -> Result<HashMap<(u32, u32), Vec<u32>>> {
        let edges = self.edge_faces();
        let mut bad: Vec<_> = edges.iter().filter(|(_, f)| f.len() > 2).map(|(k, _)| *k).collect();
        bad.sort_unstable();
        if let Some(&(a, b)) = bad.first() {
            return Err(Error::NonManifold(a, b));
        }
        Ok(edges)
    }

    /// Applies a rigid motion to positions and stored normals.
    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| t.apply_point(p)).collect(),
            faces: self.faces.clone(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.apply_vector(n)).collect()),
        }
    }

    /// Same mesh with every face winding reversed (and stored normals negated).
    pub fn flipped(&self) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
            normals: self.normals.as_ref().map(|ns| ns.iter().map(|n| -n).collect()),
        }
    }

    /// Keeps vertices where `keep[i]` is true and faces whose three vertices
    /// all survive; unreferenced survivors are kept so indices stay dense.
    pub fn retain_vertices(&self, keep: &[bool]) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for (i, &k) in keep.iter().enumerate() {
            if k {
                remap[i] = vertices.len() as u32;
                vertices.push(self.vertices[i]);
                if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        let faces = self
            .faces
            .iter()
            .filter(|f| f.iter().all(|&v| keep[v as usize]))
            .map(|f| [remap[f[0] as usize], remap[f[1] as usize], remap[f[2] as usize]])
            .collect();
        TriangleMesh {
            vertices,
            faces,
            normals,
        }
    }

    /// Keeps only faces with `keep[f]` and drops vertices no face uses.
    pub fn retain_faces(&self, keep: &[bool]) -> TriangleMesh {
        let mut used = vec![false; self.vertices.len()];
        for (f, &k) in self.faces.iter().zip(keep) {
            if k {
                for &v in f {
                    used[v as usize] = true;
                }
            }
        }
        let kept_faces: Vec<[u32; 3]> = self
            .faces
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(f, _)| *f)
            .collect();
        let tmp = TriangleMesh {
            vertices: self.vertices.clone(),
            faces: kept_faces,
            normals: self.normals.clone(),
        };
        tmp.retain_vertices(&used)
    }

    /// Concatenates meshes without merging vertices.
    pub fn merged(parts: &[&TriangleMesh]) -> TriangleMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for m in parts {
            let off = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
        }
        TriangleMesh {
            vertices,
            faces,
            normals: None,
        }
    }

    /// Replaces vertex positions, keeping the topology.
    pub fn with_positions(&self, vertices: Vec<Point3>) -> Result<TriangleMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::CountMismatch {
                left: vertices.len(),
                right: self.vertices.len(),
            });
        }
        Ok(TriangleMesh {
            vertices,
            faces: self.faces.clone(),
            normals: None,
        })
    }

    /// Connected components over shared vertices, as face-index lists.
    pub fn face_components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for f in &self.faces {
            let a = find(&mut parent, f[0] as usize);
            for &v in &f[1..] {
                let b = find(&mut parent, v as usize);
                if a != b {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    parent[hi] = lo;
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut order = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            let r = find(&mut parent, f[0] as usize);
            groups
                .entry(r)
                .or_insert_with(|| {
                    order.push(r);
                    Vec::new()
                })
                .push(fi);
        }
        order.into_iter().map(|r| groups.remove(&r).unwrap()).collect()
    }
}

pub(crate) fn edge_key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Area-weighted vertex normals. Vertices with no incident face area get
/// the zero vector; check with [`Vector3::norm`] or use
/// [`vertex_normals_checked`].
pub fn vertex_normals(mesh: &TriangleMesh) -> Vec<Vector3> {
    vertex_normals_checked(mesh).0
}

/// Vertex normals plus a validity flag per vertex.
pub fn vertex_normals_checked(mesh: &TriangleMesh) -> (Vec<Vector3>, Vec<bool>) {
    let mut acc = vec![Vector3::zeros(); mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let n = mesh.face_area_vector(fi);
        for &v in f {
            acc[v as usize] += n;
        }
    }
    let mut valid = vec![true; acc.len()];
    for (n, ok) in acc.iter_mut().zip(valid.iter_mut()) {
        let len = n.norm();
        if len > 1e-300 {
            *n /= len;
        } else {
            *n = Vector3::zeros();
            *ok = false;
        }
    }
    (acc, valid)
}

/// Stored normals if present, else freshly computed ones.
pub fn normals_or_computed(mesh: &TriangleMesh) -> Vec<Vector3> {
    match mesh.normals() {
        Some(n) => n.to_vec(),
        None => vertex_normals(mesh),
    }
}

/// Arithmetic mean of the vertex positions.
pub fn centroid(mesh: &TriangleMesh) -> Result<Point3> {
    centroid_of(mesh.vertices()).ok_or(Error::EmptyMesh)
}

pub fn centroid_of(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::primitives;
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_faces() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn sphere_normals_are_radial() {
        let m = primitives::icosphere(1.0, 3);
        for (p, n) in m.vertices().iter().zip(vertex_normals(&m)) {
            let radial = p.coords.normalize();
            assert!(radial.dot(&n).clamp(-1.0, 1.0).acos() < 2f64.to_radians());
        }
    }

    #[test]
    fn flat_grid_normals_point_up() {
        let m = primitives::grid(5, 5, 1.0);
        for n in vertex_normals(&m) {
            assert_relative_eq!(n, Vector3::z(), epsilon = 1e-12);
        }
    }

    #[test]
    fn cube_corner_normal_is_diagonal() {
        // three unit right triangles meeting at the origin, one per
        // coordinate plane, wound so normals face +x, +y, +z
        let v = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3], [0, 3, 1]]).unwrap();
        let n = vertex_normals(&m)[0];
        let expect = Vector3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        assert!((n - expect).norm() < 1e-9);
    }

    #[test]
    fn isolated_vertex_gets_invalid_normal() {
        let v = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(5.0, 5.0, 5.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let (n, ok) = vertex_normals_checked(&m);
        assert_eq!(ok, vec![true, true, true, false]);
        assert_eq!(n[3], Vector3::zeros());
    }

    #[test]
    fn normals_flip_with_orientation() {
        let m = primitives::icosphere(2.0, 2);
        let a = vertex_normals(&m);
        let b = vertex_normals(&m.flipped());
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(*x, -*y, epsilon = 1e-12);
        }
    }

    #[test]
    fn centroid_cases() {
        let cube: Vec<Point3> = (0..8)
            .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        assert_relative_eq!(centroid_of(&cube).unwrap(), Point3::new(0.5, 0.5, 0.5));
        assert_eq!(
            centroid_of(&[Point3::new(3.0, 4.0, 5.0)]).unwrap(),
            Point3::new(3.0, 4.0, 5.0)
        );
        assert!(centroid_of(&[]).is_none());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cloud: Vec<Point3> = (0..100)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()) * 100.0)
            .collect();
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        for p in &cloud {
            sx += p.x;
            sy += p.y;
            sz += p.z;
        }
        let c = centroid_of(&cloud).unwrap();
        assert!((c.x - sx / 100.0).abs() < 1e-12);
        assert!((c.y - sy / 100.0).abs() < 1e-12);
        assert!((c.z - sz / 100.0).abs() < 1e-12);
    }

    #[test]
    fn components_split_disjoint_parts() {
        let a = primitives::icosphere(1.0, 1);
        let b = a.transformed(&RigidTransform::translation_only(
            Vector3::new(10.0, 0.0, 0.0),
            "a",
            "a",
        ));
        let m = TriangleMesh::merged(&[&a, &b]);
        let comps = m.face_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), a.face_count());
    }
}
