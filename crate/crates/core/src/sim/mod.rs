//! Synthetic drag and tap episodes with labeled ground truth.

pub mod adc;
mod drag;
mod episode;
pub mod layout;
mod params;
mod tap;
mod texture;

pub use adc::adc_quantize;
pub use drag::{drag_episode_id, simulate_drag, TrapezoidProfile};
pub use episode::{DragEpisode, EpisodeKind, EpisodeMeta, FT_FZ};
pub use layout::{build_layout, LayoutConfig, Point, Rect, SensorLayout, NUM_MICS};
pub use params::{DragParams, SimConfig, TapParams};
pub use tap::{onset_delay_s, simulate_tap, tap_amplitude, tap_episode_id, tap_pulse};
pub use texture::{TextureId, TextureSpec};

/// Velocity grid used for drag collection, mm/s.
pub const DRAG_VELOCITIES: [f64; 9] = [20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0];

/// Held-out velocity profiles for cross-validation, mm/s.
pub const HELD_OUT_VELOCITIES: [f64; 5] = [20.0, 30.0, 40.0, 50.0, 60.0];

/// Tap study grid.
pub const TAP_DISTANCES_MM: [f64; 4] = [0.0, 2.0, 4.0, 6.0];
pub const TAP_VELOCITIES: [f64; 3] = [10.0, 55.0, 100.0];
