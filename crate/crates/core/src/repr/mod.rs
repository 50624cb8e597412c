//! Dense frame-based event representations and the multi-view transforms
//! applied on top of them.

mod est;
mod hats;
mod views;
mod voxel;

pub use est::{est, EstKernel};
pub use hats::{hats, HatsConfig};
pub use views::{group_views, rotate, ungroup_views, Rotation, ViewSet};
pub use voxel::voxel_grid;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReprError {
    #[error("stream has no events")]
    EmptyStream,
    #[error("last timestamp is zero, cannot normalize")]
    ZeroLastTimestamp,
    #[error("invalid rotation angle {0}, expected one of 0, 90, 180, 270")]
    InvalidAngle(u32),
    #[error("invalid representation config: {0}")]
    InvalidConfig(String),
}
