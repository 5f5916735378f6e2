//! Lipschitz multiscale decompositions and their application to branching profiles.

mod family;
mod good;
mod lipschitz;

pub use family::{decompose_family, FamilyDecomposition, LayerReport};
pub use good::{good_intervals, ScalePartition};
pub use lipschitz::{lip_decompose, lip_decompose_with_stride, random_monotone, LipDecomposition, LipschitzFn};
