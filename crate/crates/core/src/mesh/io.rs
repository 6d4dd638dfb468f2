//! STL (binary, ASCII) and PLY (ASCII, binary little-endian) reading and
//! writing.
//!
//! STL input has its vertices welded at [`STL_MERGE_TOLERANCE`]. PLY keeps
//! indexing and, when written with doubles, round-trips exactly.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::{Point3, Vector3};

/// Vertices of STL input closer than this (mm) are merged.
pub const STL_MERGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    StlBinary,
    StlAscii,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    /// Guess from the file extension; `.stl` writes binary, `.ply` writes
    /// binary little-endian.
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "stl" => Some(MeshFormat::StlBinary),
            "ply" => Some(MeshFormat::PlyBinary),
            _ => None,
        }
    }

    fn is_stl(self) -> bool {
        matches!(self, MeshFormat::StlBinary | MeshFormat::StlAscii)
    }
}

/// Reads a mesh. For STL the binary/ASCII flavour is detected from the
/// content; for PLY the header decides, so either PLY variant may be passed.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let mesh = if format.is_stl() {
        parse_stl(&bytes, &ctx)?
    } else {
        parse_ply(&bytes, &ctx)?
    };
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(mesh)
}

pub fn save_mesh(mesh: &TriangleMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let bytes = encode_mesh(mesh, format, None);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// PLY output with an extra per-vertex `quality` property (e.g. |H|).
pub fn save_mesh_with_quality(mesh: &TriangleMesh, quality: &[f64], path: &Path, format: MeshFormat) -> Result<()> {
    if quality.len() != mesh.vertex_count() {
        return Err(Error::CountMismatch {
            left: quality.len(),
            right: mesh.vertex_count(),
        });
    }
    if format.is_stl() {
        return Err(Error::InvalidParams("STL cannot carry per-vertex quality".into()));
    }
    let bytes = encode_mesh(mesh, format, Some(quality));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_mesh(mesh: &TriangleMesh, format: MeshFormat, quality: Option<&[f64]>) -> Vec<u8> {
    match format {
        MeshFormat::StlBinary => encode_stl_binary(mesh),
        MeshFormat::StlAscii => encode_stl_ascii(mesh).into_bytes(),
        MeshFormat::PlyAscii => encode_ply(mesh, quality, false),
        MeshFormat::PlyBinary => encode_ply(mesh, quality, true),
    }
}

// ---------------------------------------------------------------- STL

fn face_normal(mesh: &TriangleMesh, f: usize) -> Vector3 {
    let n = mesh.face_area_vector(f);
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vector3::zeros()
    }
}

fn encode_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.face_count());
    let mut header = [0u8; 80];
    let tag = b"binary STL written by craniofit";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.face_count() as u32).to_le_bytes());
    for f in 0..mesh.face_count() {
        let n = face_normal(mesh, f);
        for c in n.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for p in mesh.triangle(f) {
            for c in p.coords.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

fn encode_stl_ascii(mesh: &TriangleMesh) -> String {
    let mut s = String::from("solid craniofit\n");
    for f in 0..mesh.face_count() {
        let n = face_normal(mesh, f);
        s.push_str(&format!(
            "  facet normal {:e} {:e} {:e}\n    outer loop\n",
            n.x, n.y, n.z
        ));
        for p in mesh.triangle(f) {
            s.push_str(&format!("      vertex {:e} {:e} {:e}\n", p.x, p.y, p.z));
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    s.push_str("endsolid craniofit\n");
    s
}

fn parse_stl(bytes: &[u8], ctx: &str) -> Result<TriangleMesh> {
    let looks_ascii = bytes.len() >= 5 && &bytes[..5] == b"solid" && {
        // binary files may also start with "solid"; trust the size check
        if bytes.len() >= 84 {
            let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
            84 + 50 * n != bytes.len()
        } else {
            true
        }
    };
    let soup = if looks_ascii {
        parse_stl_ascii(bytes, ctx)?
    } else {
        parse_stl_binary(bytes, ctx)?
    };
    weld(soup, STL_MERGE_TOLERANCE)
}

fn parse_stl_binary(bytes: &[u8], ctx: &str) -> Result<Vec<[Point3; 3]>> {
    if bytes.len() < 84 {
        return Err(Error::parse(ctx, "binary STL shorter than its header"));
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    let need = 84 + 50 * n;
    if bytes.len() < need {
        return Err(Error::parse(
            ctx,
            format!(
                "binary STL truncated: {n} facets need {need} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let rd = |off: usize| f32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]]) as f64;
    let mut soup = Vec::with_capacity(n);
    for i in 0..n {
        let base = 84 + 50 * i + 12;
        let mut tri = [Point3::origin(); 3];
        for (k, p) in tri.iter_mut().enumerate() {
            let o = base + 12 * k;
            *p = Point3::new(rd(o), rd(o + 4), rd(o + 8));
        }
        soup.push(tri);
    }
    Ok(soup)
}

fn parse_stl_ascii(bytes: &[u8], ctx: &str) -> Result<Vec<[Point3; 3]>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::parse(ctx, "ASCII STL is not UTF-8"))?;
    let mut soup = Vec::new();
    let mut cur: Vec<Point3> = Vec::with_capacity(3);
    let mut saw_end = false;
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("vertex") => {
                let c: Vec<f64> = it
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(ctx, format!("line {}: bad vertex", ln + 1)))?;
                if c.len() != 3 {
                    return Err(Error::parse(ctx, format!("line {}: vertex needs 3 numbers", ln + 1)));
                }
                cur.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("endloop") => {
                if cur.len() != 3 {
                    return Err(Error::parse(ctx, format!("line {}: facet without 3 vertices", ln + 1)));
                }
                soup.push([cur[0], cur[1], cur[2]]);
                cur.clear();
            }
            Some("endsolid") => saw_end = true,
            _ => {}
        }
    }
    if !cur.is_empty() || !saw_end {
        return Err(Error::parse(ctx, "ASCII STL ends mid-facet or lacks 'endsolid'"));
    }
    Ok(soup)
}

/// Welds a triangle soup: points within `tol` share one vertex (first
/// occurrence wins). Faces that collapse are dropped.
fn weld(soup: Vec<[Point3; 3]>, tol: f64) -> Result<TriangleMesh> {
    let cell = |p: &Point3| -> [i64; 3] {
        [
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut verts: Vec<Point3> = Vec::new();
    let mut faces = Vec::with_capacity(soup.len());
    for tri in soup {
        let mut f = [0u32; 3];
        for (k, p) in tri.iter().enumerate() {
            let c = cell(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                            for &vi in list {
                                if (verts[vi as usize] - p).norm() <= tol {
                                    found = Some(vi);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            f[k] = match found {
                Some(vi) => vi,
                None => {
                    verts.push(*p);
                    let vi = (verts.len() - 1) as u32;
                    grid.entry(c).or_default().push(vi);
                    vi
                }
            };
        }
        if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
            faces.push(f);
        }
    }
    TriangleMesh::new(verts, faces)
}

// ---------------------------------------------------------------- PLY

fn encode_ply(mesh: &TriangleMesh, quality: Option<&[f64]>, binary: bool) -> Vec<u8> {
    let normals = mesh.normals();
    let mut h = String::from("ply\n");
    h.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    h.push_str("comment craniofit mesh, millimeters\n");
    h.push_str(&format!("element vertex {}\n", mesh.vertex_count()));
    h.push_str("property double x\nproperty double y\nproperty double z\n");
    if normals.is_some() {
        h.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if quality.is_some() {
        h.push_str("property double quality\n");
    }
    h.push_str(&format!("element face {}\n", mesh.face_count()));
    h.push_str("property list uchar int vertex_indices\nend_header\n");
    let mut out = h.into_bytes();
    for (i, p) in mesh.vertices().iter().enumerate() {
        let mut vals = vec![p.x, p.y, p.z];
        if let Some(ns) = normals {
            vals.extend_from_slice(ns[i].as_slice());
        }
        if let Some(q) = quality {
            vals.push(q[i]);
        }
        if binary {
            for v in vals {
                out.extend_from_slice(&v.to_le_bytes());
            }
        } else {
            let line: Vec<String> = vals.iter().map(|v| crate::textio::fmt_f64(*v)).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    for f in mesh.faces() {
        if binary {
            out.push(3u8);
            for &i in f {
                out.extend_from_slice(&(i as i32).to_le_bytes());
            }
        } else {
            writeln!(out, "3 {} {} {}", f[0], f[1], f[2]).expect("write to Vec");
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Pulls values either from whitespace tokens or little-endian bytes.
enum Reader<'a> {
    Ascii(std::str::SplitAsciiWhitespace<'a>),
    Binary(&'a [u8], usize),
}

impl Reader<'_> {
    fn next(&mut self, ty: Scalar, ctx: &str) -> Result<f64> {
        match self {
            Reader::Ascii(it) => it
                .next()
                .ok_or_else(|| Error::parse(ctx, "PLY body ended early"))?
                .parse::<f64>()
                .map_err(|_| Error::parse(ctx, "bad number in PLY body")),
            Reader::Binary(buf, pos) => {
                let n = ty.size();
                if *pos + n > buf.len() {
                    return Err(Error::parse(ctx, "PLY body ended early"));
                }
                let v = ty.read_le(&buf[*pos..*pos + n]);
                *pos += n;
                Ok(v)
            }
        }
    }
}

fn parse_ply(bytes: &[u8], ctx: &str) -> Result<TriangleMesh> {
    let marker = b"end_header";
    let hend = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::parse(ctx, "PLY header has no end_header"))?;
    let mut body_start = hend + marker.len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..hend]).map_err(|_| Error::parse(ctx, "PLY header is not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::parse(ctx, "missing 'ply' magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(Error::parse(ctx, format!("unsupported PLY format '{other}'"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(ctx, format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", cty, ity, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(ctx, "property before element"))?;
                let c = Scalar::parse(cty).ok_or_else(|| Error::parse(ctx, format!("bad type '{cty}'")))?;
                let i = Scalar::parse(ity).ok_or_else(|| Error::parse(ctx, format!("bad type '{ity}'")))?;
                el.props.push(Property::List(name.to_string(), c, i));
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(ctx, "property before element"))?;
                let t = Scalar::parse(ty).ok_or_else(|| Error::parse(ctx, format!("bad type '{ty}'")))?;
                el.props.push(Property::Scalar(name.to_string(), t));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(Error::parse(ctx, format!("unrecognized header line '{line}'"))),
        }
    }
    let binary = binary.ok_or_else(|| Error::parse(ctx, "PLY header lacks a format line"))?;
    let body = &bytes[body_start..];
    let mut reader = if binary {
        Reader::Binary(body, 0)
    } else {
        let text = std::str::from_utf8(body).map_err(|_| Error::parse(ctx, "ASCII PLY body is not UTF-8"))?;
        Reader::Ascii(text.split_ascii_whitespace())
    };

    let mut verts = Vec::new();
    let mut normals: Vec<Vector3> = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let scalar_pos = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
        };
        let xyz = [scalar_pos("x"), scalar_pos("y"), scalar_pos("z")];
        let nxyz = [scalar_pos("nx"), scalar_pos("ny"), scalar_pos("nz")];
        let has_normals = nxyz.iter().all(Option::is_some);
        if el.name == "vertex" && xyz.iter().any(Option::is_none) {
            return Err(Error::parse(ctx, "vertex element lacks x, y or z"));
        }
        for _ in 0..el.count {
            let mut scalars = vec![0.0; el.props.len()];
            let mut list: Option<Vec<u32>> = None;
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_, t) => scalars[pi] = reader.next(*t, ctx)?,
                    Property::List(name, ct, it) => {
                        let n = reader.next(*ct, ctx)? as usize;
                        let mut items = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = reader.next(*it, ctx)?;
                            if v < 0.0 {
                                return Err(Error::parse(ctx, "negative vertex index"));
                            }
                            items.push(v as u32);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            list = Some(items);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    verts.push(Point3::new(
                        scalars[xyz[0].unwrap()],
                        scalars[xyz[1].unwrap()],
                        scalars[xyz[2].unwrap()],
                    ));
                    if has_normals {
                        normals.push(Vector3::new(
                            scalars[nxyz[0].unwrap()],
                            scalars[nxyz[1].unwrap()],
                            scalars[nxyz[2].unwrap()],
                        ));
                    }
                }
                "face" => {
                    let poly = list.ok_or_else(|| Error::parse(ctx, "face element lacks vertex_indices"))?;
                    if poly.len() < 3 {
                        return Err(Error::parse(ctx, "face with fewer than 3 vertices"));
                    }
                    // fan-triangulate polygons
                    for k in 1..poly.len() - 1 {
                        faces.push([poly[0], poly[k], poly[k + 1]]);
                    }
                }
                _ => {}
            }
        }
    }
    let mesh = TriangleMesh::new(verts, faces).map_err(|e| Error::parse(ctx, e.to_string()))?;
    if !normals.is_empty() {
        let unit: Vec<Vector3> = normals
            .iter()
            .map(|n| {
                let l = n.norm();
                if l > 0.0 {
                    n / l
                } else {
                    *n
                }
            })
            .collect();
        if unit.iter().all(|n| (n.norm() - 1.0).abs() <= 1e-9) {
            return mesh.with_normals(unit);
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use std::collections::BTreeSet;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn single_triangle_ascii_stl() {
        let d = tmp();
        let p = d.path().join("tri.stl");
        fs::write(
            &p,
            "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n",
        )
        .unwrap();
        let m = load_mesh(&p, MeshFormat::StlAscii).unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.face_count(), 1);
    }

    #[test]
    fn icosphere_ply_round_trip_is_exact() {
        let d = tmp();
        let m = primitives::icosphere(13.7, 3);
        for fmt in [MeshFormat::PlyAscii, MeshFormat::PlyBinary] {
            let p = d.path().join("s.ply");
            save_mesh(&m, &p, fmt).unwrap();
            let back = load_mesh(&p, MeshFormat::PlyBinary).unwrap();
            assert_eq!(back.vertex_count(), 642);
            assert_eq!(back.face_count(), 1280);
            assert_eq!(back.faces(), m.faces());
            let worst = back
                .vertices()
                .iter()
                .zip(m.vertices())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert_eq!(worst, 0.0);
        }
    }

    fn adjacency(m: &TriangleMesh) -> BTreeSet<([i64; 3], [i64; 3])> {
        // edges keyed by rounded endpoint positions so that vertex order
        // does not matter
        let key = |p: &Point3| {
            [
                (p.x * 1e4).round() as i64,
                (p.y * 1e4).round() as i64,
                (p.z * 1e4).round() as i64,
            ]
        };
        m.edge_faces()
            .keys()
            .map(|&(a, b)| {
                let (ka, kb) = (key(&m.vertices()[a as usize]), key(&m.vertices()[b as usize]));
                if ka < kb {
                    (ka, kb)
                } else {
                    (kb, ka)
                }
            })
            .collect()
    }

    #[test]
    fn binary_stl_round_trip_keeps_topology() {
        let d = tmp();
        let m = primitives::icosphere(20.0, 3);
        for fmt in [MeshFormat::StlBinary, MeshFormat::StlAscii] {
            let p = d.path().join("s.stl");
            save_mesh(&m, &p, fmt).unwrap();
            let back = load_mesh(&p, fmt).unwrap();
            assert_eq!(back.vertex_count(), m.vertex_count());
            assert_eq!(back.face_count(), m.face_count());
            assert_eq!(adjacency(&back), adjacency(&m));
        }
    }

    #[test]
    fn truncated_binary_stl_is_a_parse_error() {
        let d = tmp();
        let p = d.path().join("t.stl");
        let mut bytes = encode_mesh(&primitives::icosphere(1.0, 1), MeshFormat::StlBinary, None);
        bytes.truncate(bytes.len() - 20);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::StlBinary), Err(Error::Parse { .. })));
    }

    #[test]
    fn read_only_target_is_io_error() {
        let m = primitives::icosphere(1.0, 0);
        let r = save_mesh(&m, Path::new("/proc/no-such-dir/x.ply"), MeshFormat::PlyBinary);
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn float_ply_with_normals_and_quality() {
        let d = tmp();
        let p = d.path().join("q.ply");
        fs::write(
            &p,
            "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n\
             property float nx\nproperty float ny\nproperty float nz\nproperty float quality\n\
             element face 1\nproperty list uchar int vertex_indices\nend_header\n\
             0 0 0 0 0 1 0.5\n1 0 0 0 0 1 0.5\n0 1 0 0 0 1 0.5\n3 0 1 2\n",
        )
        .unwrap();
        let m = load_mesh(&p, MeshFormat::PlyAscii).unwrap();
        assert_eq!(m.normals().unwrap()[0], Vector3::z());

        let q = vec![1.0, 2.0, 3.0];
        save_mesh_with_quality(&m, &q, &p, MeshFormat::PlyAscii).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("property double quality"));
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let d = tmp();
        let p = d.path().join("e.stl");
        fs::write(&p, "solid e\nendsolid e\n").unwrap();
        assert!(matches!(load_mesh(&p, MeshFormat::StlAscii), Err(Error::EmptyMesh)));
    }
}
