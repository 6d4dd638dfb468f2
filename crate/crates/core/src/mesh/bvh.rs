//! Bounding-volume hierarchy over mesh faces and vertices.

use super::TriangleMesh;
use crate::par::{self, Execution};
use crate::{Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Aabb::empty();
        for p in pts {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&o.min),
            max: self.max.sup(&o.max),
        }
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] - tol && p[k] <= self.max[k] + tol)
    }

    fn distance_squared(&self, p: &Point3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Parameter interval where the line `o + t·d` is inside the box.
    fn line_interval(&self, o: &Point3, inv_d: &Vector3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for k in 0..3 {
            if inv_d[k].is_infinite() {
                if o[k] < self.min[k] || o[k] > self.max[k] {
                    return None;
                }
                continue;
            }
            let a = (self.min[k] - o[k]) * inv_d[k];
            let b = (self.max[k] - o[k]) * inv_d[k];
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: u32, end: u32 },
    Inner { bounds: Aabb, left: u32, right: u32 },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
struct Bvh {
    nodes: Vec<Node>,
    prims: Vec<u32>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    fn build(boxes: &[Aabb]) -> Bvh {
        let mut prims: Vec<u32> = (0..boxes.len() as u32).collect();
        let centers: Vec<Point3> = boxes.iter().map(Aabb::center).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            Self::build_rec(boxes, &centers, &mut prims, 0, &mut nodes);
        }
        Bvh { nodes, prims }
    }

    fn build_rec(boxes: &[Aabb], centers: &[Point3], prims: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
        let bounds = prims.iter().fold(Aabb::empty(), |b, &i| b.union(&boxes[i as usize]));
        let me = nodes.len() as u32;
        if prims.len() <= LEAF_SIZE {
            nodes.push(Node::Leaf {
                bounds,
                start: offset as u32,
                end: (offset + prims.len()) as u32,
            });
            return me;
        }
        let cb = Aabb::from_points(prims.iter().map(|&i| &centers[i as usize]));
        let ext = cb.max - cb.min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = prims.len() / 2;
        prims.select_nth_unstable_by(mid, |&a, &b| {
            centers[a as usize][axis]
                .total_cmp(&centers[b as usize][axis])
                .then(a.cmp(&b))
        });
        nodes.push(Node::Inner {
            bounds,
            left: 0,
            right: 0,
        });
        let (lo, hi) = prims.split_at_mut(mid);
        let l = Self::build_rec(boxes, centers, lo, offset, nodes);
        let r = Self::build_rec(boxes, centers, hi, offset + mid, nodes);
        if let Node::Inner { left, right, .. } = &mut nodes[me as usize] {
            *left = l;
            *right = r;
        }
        me
    }

    /// Nearest primitive under `dist2`, which must return the squared
    /// distance from the query to a primitive. Ties go to the lower index.
    fn nearest<F>(&self, q: &Point3, mut dist2: F) -> Option<(u32, f64)>
    where
        F: FnMut(u32) -> f64,
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(u32, f64)> = None;
        let mut stack: Vec<(u32, f64)> = vec![(0, self.nodes[0].bounds().distance_squared(q))];
        while let Some((ni, bd)) = stack.pop() {
            if let Some((_, bd2)) = best {
                if bd > bd2 {
                    continue;
                }
            }
            match &self.nodes[ni as usize] {
                Node::Leaf { start, end, .. } => {
                    for &p in &self.prims[*start as usize..*end as usize] {
                        let d = dist2(p);
                        let better = match best {
                            None => true,
                            Some((bp, bd2)) => d < bd2 || (d == bd2 && p < bp),
                        };
                        if better {
                            best = Some((p, d));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left as usize].bounds().distance_squared(q);
                    let dr = self.nodes[*right as usize].bounds().distance_squared(q);
                    // visit the closer child first
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        best
    }

    fn line_candidates(&self, o: &Point3, d: &Vector3, out: &mut Vec<u32>) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vector3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds().line_interval(o, &inv).is_none() {
                continue;
            }
            match node {
                Node::Leaf { start, end, .. } => out.extend_from_slice(&self.prims[*start as usize..*end as usize]),
                Node::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
    }
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub point: Point3,
    pub face: usize,
    pub distance: f64,
}

/// Intersection of a line with a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Signed parameter along the direction vector.
    pub t: f64,
    pub point: Point3,
    pub face: usize,
}

/// Immutable acceleration structure over one mesh. Queries take `&self`
/// and can run from many threads at once.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    mesh: TriangleMesh,
    faces: Bvh,
    verts: Bvh,
}

impl SpatialIndex {
    pub fn new(mesh: TriangleMesh) -> Self {
        let face_boxes: Vec<Aabb> = (0..mesh.face_count())
            .map(|f| Aabb::from_points(mesh.triangle(f).iter()))
            .collect();
        let vert_boxes: Vec<Aabb> = mesh.vertices().iter().map(|p| Aabb { min: *p, max: *p }).collect();
        SpatialIndex {
            faces: Bvh::build(&face_boxes),
            verts: Bvh::build(&vert_boxes),
            mesh,
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Closest point on the surface. `None` only for a mesh without faces.
    pub fn closest_point(&self, q: &Point3) -> Option<ClosestHit> {
        let (face, d2) = self.faces.nearest(q, |f| {
            let [a, b, c] = self.mesh.triangle(f as usize);
            (closest_point_on_triangle(q, &a, &b, &c) - q).norm_squared()
        })?;
        let [a, b, c] = self.mesh.triangle(face as usize);
        Some(ClosestHit {
            point: closest_point_on_triangle(q, &a, &b, &c),
            face: face as usize,
            distance: d2.sqrt(),
        })
    }

    /// Closest mesh vertex: `(vertex index, distance)`.
    pub fn closest_vertex(&self, q: &Point3) -> Option<(usize, f64)> {
        let v = self.mesh.vertices();
        self.verts
            .nearest(q, |i| (v[i as usize] - q).norm_squared())
            .map(|(i, d2)| (i as usize, d2.sqrt()))
    }

    /// Batch closest-point queries, in input order.
    pub fn closest_points(&self, queries: &[Point3], exec: Execution) -> Vec<ClosestHit> {
        par::map(exec, queries, |q| {
            self.closest_point(q).expect("index over a non-empty mesh")
        })
    }

    /// Every intersection of the infinite line `origin + t·dir` with the
    /// surface, sorted by `t`.
    pub fn line_hits(&self, origin: &Point3, dir: &Vector3) -> Vec<RayHit> {
        let mut cand = Vec::new();
        self.faces.line_candidates(origin, dir, &mut cand);
        let mut hits: Vec<RayHit> = cand
            .into_iter()
            .filter_map(|f| {
                let [a, b, c] = self.mesh.triangle(f as usize);
                line_triangle(origin, dir, &a, &b, &c).map(|t| RayHit {
                    t,
                    point: origin + dir * t,
                    face: f as usize,
                })
            })
            .collect();
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
        hits
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Möller–Trumbore against the infinite line; returns the line parameter.
fn line_triangle(o: &Point3, d: &Vector3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = d.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm() * d.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = o - a;
    let u = tvec.dot(&pvec) * inv;
    const EPS: f64 = 1e-12;
    if !(-EPS..=1.0 + EPS).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = d.dot(&qvec) * inv;
    if v < -EPS || u + v > 1.0 + EPS {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}
