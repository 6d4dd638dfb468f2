use std::collections::BTreeMap;

use super::TriangleMesh;
use crate::error::Result;
use crate::Point3;

/// Closed chain of boundary vertices, in face-winding order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub vertices: Vec<u32>,
    pub length: f64,
}

impl BoundaryLoop {
    pub fn points(&self, mesh: &TriangleMesh) -> Vec<Point3> {
        self.vertices.iter().map(|&v| mesh.vertices()[v as usize]).collect()
    }
}

/// All boundary loops, longest first.
///
/// A boundary edge is an edge with exactly one incident face. Loops follow
/// the winding of that face. Vertices where several loops touch are
/// resolved by taking outgoing edges in index order.
pub fn boundary_loops(mesh: &TriangleMesh) -> Result<Vec<BoundaryLoop>> {
    let edges = mesh.check_manifold_edges()?;
    // directed boundary half-edges a -> b as they appear in their face
    let mut next: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if edges[&super::edge_key(a, b)].len() == 1 {
                next.entry(a).or_default().push(b);
            }
        }
    }
    for outs in next.values_mut() {
        outs.sort_unstable();
        outs.reverse();
    }
    let mut loops = Vec::new();
    while let Some((&start, _)) = next.iter().find(|(_, v)| !v.is_empty()) {
        let mut chain = vec![start];
        let mut cur = start;
        loop {
            let outs = next.get_mut(&cur).expect("chain vertex has outgoing edge");
            let nxt = match outs.pop() {
                Some(n) => n,
                None => break,
            };
            if nxt == start {
                break;
            }
            chain.push(nxt);
            cur = nxt;
            if next.get(&cur).is_none_or(|v| v.is_empty()) {
                break;
            }
        }
        let pts: Vec<Point3> = chain.iter().map(|&v| mesh.vertices()[v as usize]).collect();
        let length = (0..pts.len()).map(|i| (pts[(i + 1) % pts.len()] - pts[i]).norm()).sum();
        loops.push(BoundaryLoop {
            vertices: chain,
            length,
        });
    }
    loops.sort_by(|a, b| b.length.total_cmp(&a.length));
    Ok(loops)
}
