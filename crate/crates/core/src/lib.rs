//! Geometry pipeline that turns a scanned skull-defect mesh and a reference
//! CT mesh into a beveled, radius-compensated cutting toolpath for resizing
//! an oversized cranial implant.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`mesh`]: triangle meshes, STL/PLY I/O, normals, mean curvature,
//!   closest-point queries and boundary loops.
//! - [`registration`]: outer-layer extraction, SVD point-set registration,
//!   ICP and registration error metrics.
//! - [`contour`]: curvature filtering, automatic cleanup, plane fitting and
//!   closed Fourier-curve fitting of the defect rim.
//! - [`toolpath`]: spline conversion, surface projection, tilted tool axes,
//!   tool-radius offset and export.
//! - [`calibration`]: pivot calibration, TCP chaining, marker localization.
//! - [`evaluation`]: synthetic specimens, virtual cutting, gap analysis.
//! - [`pipeline`]: config-driven orchestration used by the CLI.
//!
//! All lengths are millimeters.

pub mod calibration;
pub mod contour;
pub mod error;
pub mod evaluation;
pub mod mesh;
pub mod par;
pub mod pipeline;
pub mod registration;
pub mod textio;
pub mod toolpath;
pub mod transform;

pub use error::{Error, ErrorClass, Result};
pub use mesh::{SpatialIndex, TriangleMesh, VertexScalarField};
pub use transform::{Frame, RigidTransform};

/// Position in millimeters.
pub type Point3 = nalgebra::Point3<f64>;
/// Direction or displacement.
pub type Vector3 = nalgebra::Vector3<f64>;
