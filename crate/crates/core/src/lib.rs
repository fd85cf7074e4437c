//! Multi-object tracking by detection with shape-constrained IoU
//! association and confidence-weighted Kalman updates.
//!
//! The pieces:
//!
//! - [`geometry`]: boxes, IoU, the shape-constrained distance and cost matrices
//! - [`kalman`]: constant-velocity filter with confidence-scaled noise
//! - [`assignment`]: gated Hungarian matching
//! - [`tracker`]: the per-frame two-stage association state machine
//! - [`motio`]: MOTChallenge file I/O and config loading
//! - [`metrics`]: CLEAR MOTA / IDSW and IDF1
//! - [`synth`]: seeded synthetic scenes
//! - [`ablation`]: paired on/off comparisons over synthetic scenes

pub mod ablation;
pub mod assignment;
pub mod geometry;
pub mod kalman;
pub mod metrics;
pub mod motio;
pub mod synth;
pub mod tracker;

pub use geometry::{BoundingBox, Detection, ShapeIoUParams};
pub use kalman::{KalmanFilter, KalmanState, NoiseConfig};
pub use metrics::MetricsReport;
pub use tracker::{run_sequence, FrameResult, Track, TrackStatus, Tracker, TrackerConfig};
