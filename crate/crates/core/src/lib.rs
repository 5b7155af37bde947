//! Vibration-based tactile sensing with a sparse microphone array.
//!
//! The crate covers the whole offline workflow:
//!
//! * [`sim`] generates labeled drag and tap episodes for a 10-microphone array;
//! * [`signal`] turns episodes into filtered, labeled training windows;
//! * [`model`] is a small strided-conv + transformer encoder with
//!   hand-written reverse-mode gradients;
//! * [`harness`] builds leakage-free splits, trains, evaluates and runs the
//!   non-learned baselines;
//! * [`detect`] holds the realtime microphone onset detector, the offline F/T
//!   contact heuristic and the response-time study;
//! * [`storage`] and [`pipeline`] provide the on-disk formats and the
//!   end-to-end commands used by the CLI.

pub mod detect;
mod error;
pub mod harness;
pub mod model;
pub mod pipeline;
pub mod signal;
pub mod sim;
pub mod stats;
pub mod storage;
pub mod task;

pub use error::{Error, Result};
pub use task::Task;
pub use sim::{DragEpisode, EpisodeKind, Point, SensorLayout, TextureId, TextureSpec};
