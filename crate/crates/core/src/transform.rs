//! Rigid motions between labeled coordinate frames.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit};

use crate::error::{Error, Result};
use crate::textio;
use crate::{Point3, Vector3};

/// Name of a coordinate frame such as `scan`, `ct`, `base`, `ee`, `tcp`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame(String);

impl Frame {
    pub const SCAN: &'static str = "scan";
    pub const CT: &'static str = "ct";
    pub const BASE: &'static str = "base";
    pub const EE: &'static str = "ee";
    pub const TCP: &'static str = "tcp";
    pub const REF: &'static str = "ref";

    pub fn new(name: impl Into<String>) -> Self {
        Frame(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Frame {
    fn from(s: &str) -> Self {
        Frame::new(s)
    }
}

/// Proper rigid motion mapping points expressed in `from` into `to`.
///
/// The rotation is kept orthonormal with determinant +1; constructors that
/// take a raw matrix re-project it onto SO(3).
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3,
    from: Frame,
    to: Frame,
}

impl RigidTransform {
    pub fn identity(from: impl Into<Frame>, to: impl Into<Frame>) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            from: from.into(),
            to: to.into(),
        }
    }

    /// Builds a transform from a rotation matrix, which must already be a
    /// proper rotation within 1e-6.
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3,
        from: impl Into<Frame>,
        to: impl Into<Frame>,
    ) -> Result<Self> {
        let orth = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if orth > 1e-6 || (det - 1.0).abs() > 1e-6 || !rotation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "rotation is not proper orthonormal (orthogonality error {orth:.2e}, det {det:.6})"
            )));
        }
        Ok(RigidTransform {
            rotation: orthonormalize(&rotation),
            translation,
            from: from.into(),
            to: to.into(),
        })
    }

    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3, from: Frame, to: Frame) -> Self {
        RigidTransform {
            rotation,
            translation,
            from,
            to,
        }
    }

    /// Rotation of `angle` radians about `axis`, followed by `translation`.
    pub fn from_axis_angle(
        axis: Vector3,
        angle: f64,
        translation: Vector3,
        from: impl Into<Frame>,
        to: impl Into<Frame>,
    ) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        RigidTransform {
            rotation: *rot.matrix(),
            translation,
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn translation_only(t: Vector3, from: impl Into<Frame>, to: impl Into<Frame>) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: t,
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3 {
        &self.translation
    }

    pub fn from_frame(&self) -> &Frame {
        &self.from
    }

    pub fn to_frame(&self) -> &Frame {
        &self.to
    }

    /// Same motion with new frame labels.
    pub fn relabeled(mut self, from: impl Into<Frame>, to: impl Into<Frame>) -> Self {
        self.from = from.into();
        self.to = to.into();
        self
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
            from: self.to.clone(),
            to: self.from.clone(),
        }
    }

    /// `self ∘ inner`: applies `inner` first. Requires
    /// `inner.to == self.from`.
    pub fn compose(&self, inner: &RigidTransform) -> Result<RigidTransform> {
        if inner.to != self.from {
            return Err(Error::FrameMismatch {
                expected: self.from.to_string(),
                found: inner.to.to_string(),
            });
        }
        Ok(RigidTransform {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
            from: inner.from.clone(),
            to: self.to.clone(),
        })
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation angle of this motion in radians.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Serializes as a 4x4 row-major matrix with a frame header.
    pub fn to_text(&self) -> String {
        let m = self.to_homogeneous();
        let mut s = String::new();
        s.push_str("# rigid-transform\n");
        s.push_str(&format!("from {}\n", self.from));
        s.push_str(&format!("to {}\n", self.to));
        for r in 0..4 {
            let row: Vec<String> = (0..4).map(|c| textio::fmt_f64(m[(r, c)])).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<RigidTransform> {
        let ctx = "rigid transform";
        let mut from = None;
        let mut to = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in textio::content_lines(text) {
            let mut it = line.split_whitespace();
            let head = it.next().unwrap_or_default();
            match head {
                "from" => from = it.next().map(Frame::new),
                "to" => to = it.next().map(Frame::new),
                _ => rows.push(textio::parse_floats(line, ctx)?),
            }
        }
        let from = from.ok_or_else(|| Error::parse(ctx, "missing 'from' header"))?;
        let to = to.ok_or_else(|| Error::parse(ctx, "missing 'to' header"))?;
        if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
            return Err(Error::parse(ctx, "expected 4 rows of 4 numbers"));
        }
        let rot = Matrix3::from_fn(|r, c| rows[r][c]);
        let t = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
        RigidTransform::new(rot, t, from, to).map_err(|e| Error::parse(ctx, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        textio::write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<RigidTransform> {
        RigidTransform::from_text(&textio::read_file(path)?)
    }
}

/// Nearest rotation matrix in the Frobenius sense.
pub(crate) fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> RigidTransform {
        RigidTransform::from_axis_angle(
            Vector3::new(1.0, 2.0, 3.0),
            0.7,
            Vector3::new(4.0, -5.0, 6.0),
            "scan",
            "ct",
        )
    }

    #[test]
    fn inverse_round_trips() {
        let t = sample();
        let p = Point3::new(1.0, 2.0, 3.0);
        let back = t.inverse().apply_point(&t.apply_point(&p));
        assert_relative_eq!(back, p, epsilon = 1e-12);
        assert_eq!(t.inverse().from_frame().as_str(), "ct");
    }

    #[test]
    fn composition_checks_frames() {
        let t = sample();
        assert!(t.compose(&t).is_err());
        let id = t.inverse().compose(&t).unwrap();
        assert_relative_eq!(id.rotation(), &Matrix3::identity(), epsilon = 1e-12);
        assert_eq!(id.from_frame(), id.to_frame());
    }

    #[test]
    fn compose_matches_matrix_product() {
        let a = sample();
        let b = RigidTransform::from_axis_angle(
            Vector3::new(0.0, 1.0, 0.0),
            -1.1,
            Vector3::new(0.5, 0.5, 0.5),
            "ct",
            "base",
        );
        let c = b.compose(&a).unwrap();
        assert_relative_eq!(
            c.to_homogeneous(),
            b.to_homogeneous() * a.to_homogeneous(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let t = sample();
        let back = RigidTransform::from_text(&t.to_text()).unwrap();
        assert_eq!(back.from_frame(), t.from_frame());
        assert_relative_eq!(back.to_homogeneous(), t.to_homogeneous(), epsilon = 1e-15);
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(m, Vector3::zeros(), "a", "b").is_err());
    }
}
