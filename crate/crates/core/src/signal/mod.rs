//! Episode to training-window conversion: baseline removal, drag
//! segmentation, sliding windows, zero-phase high-pass filtering and labels.

mod baseline;
pub mod filter;
mod label;
mod segment;
mod window;

use serde::{Deserialize, Serialize};

pub use baseline::{
    subtract_baseline, BaselineWarning, CenteredEpisode, DEFAULT_BASELINE_LEN,
};
pub use filter::Highpass;
pub use label::{label_window, WindowLabels};
pub use segment::{motion_runs, segment_drags, Segment, DEFAULT_VEL_THRESHOLD_MM_S};
pub use window::{window_slice, window_starts};

use crate::sim::{DragEpisode, TextureId, NUM_MICS};
use crate::{Error, Result, Task};

pub const DEFAULT_WINDOW_OFFSET: usize = 50;
/// Segments shorter than the largest window length are dropped.
pub const DEFAULT_MIN_SEGMENT_LEN: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window: usize,
    pub offset: usize,
    pub baseline_len: usize,
    pub vel_threshold_mm_s: f64,
    pub min_segment_len: usize,
    /// Also keep the unfiltered, baseline-centered samples of each window.
    pub keep_raw: bool,
}

impl WindowConfig {
    pub fn for_task(task: Task) -> Self {
        Self::with_window(task.default_window())
    }

    pub fn with_window(window: usize) -> Self {
        Self {
            window,
            offset: DEFAULT_WINDOW_OFFSET,
            baseline_len: DEFAULT_BASELINE_LEN,
            vel_threshold_mm_s: DEFAULT_VEL_THRESHOLD_MM_S,
            min_segment_len: DEFAULT_MIN_SEGMENT_LEN,
            keep_raw: false,
        }
    }
}

/// One filtered `n x 10` window with its labels.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub episode_id: String,
    pub drag_id: String,
    /// First sample of the window in the source episode.
    pub start: usize,
    pub n: usize,
    pub sample_rate_hz: f64,
    /// Row-major `n x NUM_MICS`, filtered and zero-mean, in ADC counts.
    pub data: Vec<f32>,
    /// Baseline-centered but unfiltered samples; empty unless requested.
    pub raw: Vec<f32>,
    /// Per-channel noise RMS from the episode's quiet baseline span.
    pub noise_floor: [f64; NUM_MICS],
    pub label_texture: Option<TextureId>,
    pub label_pos_mm: [f64; 2],
    pub label_vel_mm_s: f64,
    pub nominal_velocity_mm_s: f64,
}

impl WindowSample {
    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * NUM_MICS..(t + 1) * NUM_MICS]
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        (0..self.n).map(|t| self.data[t * NUM_MICS + c] as f64).collect()
    }
}

/// High-pass filters a centered `n x NUM_MICS` block and removes the residual
/// per-channel mean.
pub fn filter_window(filter: &Highpass, block: &[f64]) -> Result<Vec<f64>> {
    let mut y = filter.filtfilt_block(block, NUM_MICS)?;
    let n = y.len() / NUM_MICS;
    for c in 0..NUM_MICS {
        let m = (0..n).map(|t| y[t * NUM_MICS + c]).sum::<f64>() / n as f64;
        for t in 0..n {
            y[t * NUM_MICS + c] -= m;
        }
    }
    Ok(y)
}

/// Converts one episode into labeled windows.
pub fn extract_windows(
    episode: &DragEpisode,
    cfg: &WindowConfig,
    filter: &Highpass,
) -> Result<Vec<WindowSample>> {
    if cfg.window == 0 || cfg.offset == 0 {
        return Err(Error::InvalidArgument(
            "window length and offset must be positive".into(),
        ));
    }
    episode.check_consistent()?;
    let centered = subtract_baseline(episode, cfg.baseline_len, cfg.vel_threshold_mm_s)?;
    let segments = segment_drags(
        episode,
        cfg.vel_threshold_mm_s,
        cfg.min_segment_len.max(cfg.window),
    );
    let mut out = Vec::new();
    for seg in &segments {
        for span in window_slice(&seg.span, cfg.window, cfg.offset) {
            let block = centered.rows(span.start, cfg.window);
            let filtered = filter_window(filter, block)?;
            let labels = label_window(
                &span,
                &episode.robot_pos_mm,
                &episode.robot_vel_mm_s,
                episode.texture,
            )?;
            out.push(WindowSample {
                episode_id: episode.episode_id.clone(),
                drag_id: seg.drag_id.clone(),
                start: span.start,
                n: cfg.window,
                sample_rate_hz: episode.sample_rate_hz,
                data: filtered.iter().map(|&v| v as f32).collect(),
                raw: if cfg.keep_raw {
                    block.iter().map(|&v| v as f32).collect()
                } else {
                    Vec::new()
                },
                noise_floor: centered.noise_floor,
                label_texture: labels.texture,
                label_pos_mm: labels.pos_mm,
                label_vel_mm_s: labels.vel_mm_s,
                nominal_velocity_mm_s: episode.nominal_velocity_mm_s,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn test_episode(mic: Vec<[u16; NUM_MICS]>, speeds: Vec<f64>) -> DragEpisode {
    let t = mic.len();
    DragEpisode {
        episode_id: "test".into(),
        kind: crate::sim::EpisodeKind::Drag,
        texture: None,
        nominal_velocity_mm_s: 40.0,
        sample_rate_hz: 2000.0,
        rng_seed: 0,
        mic_counts: mic,
        robot_pos_mm: vec![[0.0; 3]; t],
        robot_vel_mm_s: speeds.into_iter().map(|s| [s, 0.0, 0.0]).collect(),
        ft_n: vec![[0.0; 6]; t],
        meta: crate::sim::EpisodeMeta::default(),
    }
}
