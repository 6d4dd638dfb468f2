use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, mapped to process exit statuses by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("non-manifold edge ({0}, {1}) has more than two incident faces")]
    NonManifold(u32, u32),
    #[error("no vertex survived outer-layer extraction (inverted normals?)")]
    EmptyResult,
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no correspondences: source is empty")]
    NoCorrespondences,
    #[error("initial ICP rms {rms:.3} mm exceeds divergence gate {gate:.3} mm")]
    DivergedInit { rms: f64, gate: f64 },
    #[error("point count mismatch: {left} vs {right}")]
    CountMismatch { left: usize, right: usize },
    #[error("selection is empty: {0}")]
    EmptySelection(String),
    #[error("angular coverage gap of {gap_deg:.1} degrees exceeds 90 degrees")]
    InsufficientCoverage { gap_deg: f64 },
    #[error("least-squares system is rank deficient: {0}")]
    RankDeficient(String),
    #[error("fitted radius is not positive at theta = {theta:.4} rad")]
    NonPositiveRadius { theta: f64 },
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("control point {index} could not be projected onto the surface")]
    ProjectionMiss { index: usize },
    #[error("curve tangent has zero in-plane length at sample {index}")]
    DegenerateTangent { index: usize },
    #[error("curve passes through the frame center at sample {index}")]
    CenterOnCurve { index: usize },
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: String, found: String },
    #[error("toolpath has no waypoints")]
    EmptyToolpath,
    #[error("toolpath is not closed")]
    OpenToolpath,
    #[error("pose samples lack rotational diversity (smallest singular value {sigma_min:.3e})")]
    InsufficientDiversity { sigma_min: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("mesh has no boundary loop around the frame center")]
    NoBoundary,
    #[error("ambiguous boundary loops: {0}")]
    AmbiguousLoops(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Stage { source, .. } => source.class(),
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyMesh
            | Error::InvalidMesh(_)
            | Error::NonManifold(..)
            | Error::CountMismatch { .. }
            | Error::FrameMismatch { .. }
            | Error::EmptyToolpath
            | Error::OpenToolpath
            | Error::InvalidParams(_)
            | Error::NoBoundary
            | Error::AmbiguousLoops(_)
            | Error::NoCorrespondences
            | Error::TooFewPoints { .. } => ErrorClass::Data,
            Error::EmptyResult
            | Error::DegenerateConfiguration(_)
            | Error::DivergedInit { .. }
            | Error::EmptySelection(_)
            | Error::InsufficientCoverage { .. }
            | Error::RankDeficient(_)
            | Error::NonPositiveRadius { .. }
            | Error::ProjectionMiss { .. }
            | Error::DegenerateTangent { .. }
            | Error::CenterOnCurve { .. }
            | Error::InsufficientDiversity { .. } => ErrorClass::Numerical,
        }
    }
}
