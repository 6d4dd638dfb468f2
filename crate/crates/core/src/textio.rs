//! Shared helpers for the line-oriented text formats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Point3;

/// Shortest representation that parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}

/// Lines that are neither blank nor `#` comments, trimmed.
pub fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_floats(line: &str, context: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(context, format!("bad number '{tok}' in line '{line}'")))
        })
        .collect()
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes one `x y z` line per point.
pub fn points_to_text(points: &[Point3]) -> String {
    let mut s = String::with_capacity(points.len() * 48);
    for p in points {
        s.push_str(&format!("{} {} {}\n", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z)));
    }
    s
}

pub fn points_from_text(text: &str, context: &str) -> Result<Vec<Point3>> {
    content_lines(text)
        .map(|line| {
            let v = parse_floats(line, context)?;
            if v.len() != 3 {
                return Err(Error::parse(context, format!("expected 'x y z', got '{line}'")));
            }
            Ok(Point3::new(v[0], v[1], v[2]))
        })
        .collect()
}
