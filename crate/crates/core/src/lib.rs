//! Event-camera toolkit for studying the sim-to-real gap at feature level.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`events`]: the asynchronous event-stream data model, validation and
//!   timestamp utilities.
//! - [`codec`]: binary/text codecs (EVT1, ATIS-style N-Caltech `.bin`, CSV).
//! - [`simulator`]: contrast-threshold event simulation from intensity frame
//!   sequences, including saccade-style frame synthesis from still images.
//! - [`repr`]: dense frame-based representations (voxel grid, HATS, EST),
//!   multi-view channel grouping and right-angle rotations.
//! - [`tensor`]: the dense tensor container plus the TEN1 file format.
//! - [`metrics`]: closed-form domain-discrepancy quantities on feature
//!   matrices (MMD, MMFND, entropy) and rotation pretext labels.
//! - [`datasets`]: manifest scanning, reproducible splits, source/target
//!   pairing and batch conversion.
//! - [`diag`]: the end-to-end source-vs-target shift diagnostic.

pub mod codec;
pub mod datasets;
pub mod diag;
pub mod events;
pub mod metrics;
pub mod repr;
pub mod simulator;
pub mod tensor;

pub use events::{Event, EventStream};
pub use tensor::Tensor;
