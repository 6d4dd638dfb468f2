//! Synthetic specimens, virtual cutting and gap analysis.

pub mod cut;
pub mod gap;
pub mod specimen;

pub use cut::virtual_cut;
pub use gap::{gap_analysis, GapReport};
pub use specimen::{generate_specimen, DefectSpecimen, SpecimenParams};
