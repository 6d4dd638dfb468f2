//! Discrete mean curvature from the cotangent Laplacian with mixed
//! Voronoi areas (Meyer, Desbrun, Schröder, Barr 2003).

use super::TriangleMesh;
use crate::error::Result;
use crate::Vector3;

/// One scalar per vertex, plus a flag for vertices whose value is not
/// trustworthy (mesh boundary, zero area).
#[derive(Debug, Clone, PartialEq)]
pub struct VertexScalarField {
    pub values: Vec<f64>,
    pub unreliable: Vec<bool>,
}

impl VertexScalarField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `q`-quantile (0..=1) of the reliable values, linear interpolation.
    pub fn percentile(&self, q: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .values
            .iter()
            .zip(&self.unreliable)
            .filter(|(_, &bad)| !bad)
            .map(|(&x, _)| x)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
    }
}

/// Per-vertex |H| in 1/mm.
///
/// `K(x_i) = 1/(2·A_mixed) Σ_j (cot α_ij + cot β_ij)(x_i − x_j)` is the
/// mean-curvature normal `2·H·n`, so `|H| = |K| / 2`. Boundary vertices get
/// a value computed from their partial one-ring but are flagged.
pub fn mean_curvature(mesh: &TriangleMesh) -> Result<VertexScalarField> {
    let edges = mesh.check_manifold_edges()?;
    let n = mesh.vertex_count();
    let v = mesh.vertices();
    let mut lap = vec![Vector3::zeros(); n];
    let mut area = vec![0.0f64; n];

    for f in mesh.faces() {
        let idx = [f[0] as usize, f[1] as usize, f[2] as usize];
        let p = [v[idx[0]], v[idx[1]], v[idx[2]]];
        let twice_area = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        if twice_area <= 1e-300 {
            continue;
        }
        let tri_area = 0.5 * twice_area;
        // cot of the angle at corner k, and whether it is obtuse
        let mut cot = [0.0; 3];
        let mut obtuse = [false; 3];
        for k in 0..3 {
            let a = p[(k + 1) % 3] - p[k];
            let b = p[(k + 2) % 3] - p[k];
            let d = a.dot(&b);
            cot[k] = d / twice_area;
            obtuse[k] = d < 0.0;
        }
        for k in 0..3 {
            // edge opposite corner k joins k+1 and k+2
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let e = p[i] - p[j];
            lap[idx[i]] += cot[k] * e;
            lap[idx[j]] -= cot[k] * e;
        }
        let any_obtuse = obtuse.iter().any(|&o| o);
        for k in 0..3 {
            area[idx[k]] += if !any_obtuse {
                // Voronoi region of corner k
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                ((p[i] - p[k]).norm_squared() * cot[j] + (p[j] - p[k]).norm_squared() * cot[i]) / 8.0
            } else if obtuse[k] {
                tri_area / 2.0
            } else {
                tri_area / 4.0
            };
        }
    }

    let mut unreliable = vec![false; n];
    for (&(a, b), fs) in &edges {
        if fs.len() == 1 {
            unreliable[a as usize] = true;
            unreliable[b as usize] = true;
        }
    }
    let values = lap
        .iter()
        .zip(&area)
        .zip(unreliable.iter_mut())
        .map(|((l, &a), bad)| {
            if a <= 1e-300 {
                *bad = true;
                0.0
            } else {
                l.norm() / (4.0 * a)
            }
        })
        .collect();
    Ok(VertexScalarField { values, unreliable })
}
