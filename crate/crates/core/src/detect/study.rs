use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ft::{bias_episode, ft_onset_index, has_flatline, FlatlineConfig, FtDetectorConfig};
use super::mic::{onset_index, MicDetectorConfig};
use super::{relative_response_time, ContactEvent, DetectionMethod, EventSource};
use crate::sim::{
    simulate_tap, DragEpisode, EpisodeKind, Point, SensorLayout, TapParams, FT_FZ,
    TAP_DISTANCES_MM, TAP_VELOCITIES,
};
use crate::stats;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub distances_mm: Vec<f64>,
    pub velocities_mm_s: Vec<f64>,
    pub episodes_per_cell: usize,
    pub seed: u64,
    /// Microphone whose stream feeds the realtime detector.
    pub mic: usize,
    /// Cells below this detection rate are reported as "-".
    pub min_detection_rate: f64,
    /// Quiet span used to tare the F/T stream, ending this long before contact.
    pub quiet_guard_s: f64,
    pub mic_detector: MicDetectorConfig,
    pub ft_detector: FtDetectorConfig,
    pub flatline: FlatlineConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            distances_mm: TAP_DISTANCES_MM.to_vec(),
            velocities_mm_s: TAP_VELOCITIES.to_vec(),
            episodes_per_cell: 45,
            seed: 42,
            mic: 0,
            min_detection_rate: 0.5,
            quiet_guard_s: 0.05,
            mic_detector: MicDetectorConfig::default(),
            ft_detector: FtDetectorConfig::default(),
            flatline: FlatlineConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub distance_mm: f64,
    pub velocity_mm_s: f64,
    pub episodes: usize,
    /// Episodes dropped for an F/T flat-line during contact.
    pub dropped_flatline: usize,
    /// Episodes where the offline F/T heuristic found no contact.
    pub ft_missing: usize,
    pub detected: usize,
    pub response_ms: Vec<f64>,
    pub mean_ms: Option<f64>,
    pub std_ms: Option<f64>,
    pub reported: bool,
}

impl CellStats {
    /// Detection rate over episodes with a usable F/T label.
    pub fn detection_rate(&self) -> f64 {
        let usable = self.episodes - self.dropped_flatline - self.ft_missing;
        if usable == 0 {
            0.0
        } else {
            self.detected as f64 / usable as f64
        }
    }

    /// `"mean (std)"` in ms, or `"-"` when the cell is not reported.
    pub fn display(&self) -> String {
        match (self.reported, self.mean_ms, self.std_ms) {
            (true, Some(m), Some(s)) => format!("{m:.1} ({s:.1})"),
            _ => "-".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub distances_mm: Vec<f64>,
    pub velocities_mm_s: Vec<f64>,
    /// `cells[velocity][distance]`.
    pub cells: Vec<Vec<CellStats>>,
}

impl ResponseTable {
    pub fn cell(&self, velocity_mm_s: f64, distance_mm: f64) -> Option<&CellStats> {
        let r = self.velocities_mm_s.iter().position(|&v| v == velocity_mm_s)?;
        let c = self.distances_mm.iter().position(|&d| d == distance_mm)?;
        Some(&self.cells[r][c])
    }

    /// Plain-text table: one row per velocity, one column per distance.
    pub fn to_text(&self) -> String {
        let mut s = String::from("velocity \\ distance");
        for d in &self.distances_mm {
            s.push_str(&format!("\t{d} mm"));
        }
        s.push('\n');
        for (v, row) in self.velocities_mm_s.iter().zip(&self.cells) {
            s.push_str(&format!("{v} mm/s"));
            for cell in row {
                s.push('\t');
                s.push_str(&cell.display());
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "velocity_mm_s,distance_mm,episodes,detected,dropped_flatline,ft_missing,mean_ms,std_ms,reported\n",
        );
        for row in &self.cells {
            for c in row {
                let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    c.velocity_mm_s,
                    c.distance_mm,
                    c.episodes,
                    c.detected,
                    c.dropped_flatline,
                    c.ft_missing,
                    opt(c.mean_ms),
                    opt(c.std_ms),
                    c.reported
                ));
            }
        }
        s
    }
}

/// Tap location `distance_mm` from `mic`, towards the center of the sensing area.
pub fn tap_location(layout: &SensorLayout, mic: usize, distance_mm: f64) -> Point {
    let m = layout.mic_positions[mic];
    let c = layout.sensing_area.center();
    let (dx, dy) = (c.x - m.x, c.y - m.y);
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        return Point::new(m.x + distance_mm, m.y);
    }
    Point::new(m.x + distance_mm * dx / norm, m.y + distance_mm * dy / norm)
}

/// Result of analyzing one tap episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TapOutcome {
    /// Dropped for an F/T flat-line during contact.
    Flatline,
    /// The offline F/T heuristic found no contact.
    FtMissing,
    /// The microphone detector never fired.
    Missed,
    /// Microphone response time relative to the F/T label, in ms.
    Detected(f64),
}

/// Runs both detectors on one tap. `pre_contact_s` is the nominal contact
/// time of the protocol; the F/T stream is tared on the quiet span before it.
pub fn analyze_tap(ep: &DragEpisode, cfg: &StudyConfig, pre_contact_s: f64) -> Result<TapOutcome> {
    if has_flatline(ep, &cfg.flatline) {
        return Ok(TapOutcome::Flatline);
    }
    let quiet_end = ((pre_contact_s - cfg.quiet_guard_s) * ep.sample_rate_hz).floor() as usize;
    let tared = bias_episode(ep, 0..quiet_end.max(1), &cfg.ft_detector)?;
    let Some(ft_idx) = ft_onset_index(&tared.ft_channel(FT_FZ), &cfg.ft_detector) else {
        log::warn!("{}: no F/T contact found, needs manual review", ep.episode_id);
        return Ok(TapOutcome::FtMissing);
    };
    let Some(mic_idx) = onset_index(&ep.mic_channel(cfg.mic), &cfg.mic_detector) else {
        return Ok(TapOutcome::Missed);
    };
    let fs = ep.sample_rate_hz;
    let mic = ContactEvent::new(&ep.episode_id, mic_idx, fs, EventSource::Mic(cfg.mic), DetectionMethod::RealtimeMic);
    let ft = ContactEvent::new(&ep.episode_id, ft_idx, fs, EventSource::Ft, DetectionMethod::OfflineFt);
    Ok(TapOutcome::Detected(relative_response_time(&mic, &ft)?))
}

/// Seed of the `k`-th tap in grid cell (velocity `vi`, distance `di`).
pub fn tap_seed(cfg: &StudyConfig, vi: usize, di: usize, k: usize) -> u64 {
    cfg.seed
        .wrapping_mul(1_000_003)
        .wrapping_add(((vi * cfg.distances_mm.len() + di) * 100_000) as u64)
        .wrapping_add(k as u64)
}

fn cell_stats(cfg: &StudyConfig, distance_mm: f64, velocity_mm_s: f64, outcomes: &[TapOutcome]) -> CellStats {
    let mut cell = CellStats {
        distance_mm,
        velocity_mm_s,
        episodes: outcomes.len(),
        dropped_flatline: 0,
        ft_missing: 0,
        detected: 0,
        response_ms: Vec::new(),
        mean_ms: None,
        std_ms: None,
        reported: false,
    };
    for o in outcomes {
        match *o {
            TapOutcome::Flatline => cell.dropped_flatline += 1,
            TapOutcome::FtMissing => cell.ft_missing += 1,
            TapOutcome::Missed => {}
            TapOutcome::Detected(ms) => {
                cell.detected += 1;
                cell.response_ms.push(ms);
            }
        }
    }
    cell.mean_ms = stats::mean(&cell.response_ms);
    cell.std_ms = cell.mean_ms.map(|_| stats::std_dev(&cell.response_ms));
    cell.reported = cell.detected > 0 && cell.detection_rate() >= cfg.min_detection_rate;
    cell
}

/// Builds the table from outcomes grouped as `outcomes[velocity][distance]`.
pub fn tabulate(cfg: &StudyConfig, outcomes: &[Vec<Vec<TapOutcome>>]) -> ResponseTable {
    let cells = cfg
        .velocities_mm_s
        .iter()
        .zip(outcomes)
        .map(|(&v, row)| {
            cfg.distances_mm
                .iter()
                .zip(row)
                .map(|(&d, o)| cell_stats(cfg, d, v, o))
                .collect()
        })
        .collect();
    ResponseTable {
        distances_mm: cfg.distances_mm.clone(),
        velocities_mm_s: cfg.velocities_mm_s.clone(),
        cells,
    }
}

/// Simulates taps over the distance x velocity grid and tabulates the
/// microphone response time relative to the F/T contact label.
pub fn response_time_study(
    layout: &SensorLayout,
    params: &TapParams,
    cfg: &StudyConfig,
) -> Result<ResponseTable> {
    let mut outcomes = Vec::with_capacity(cfg.velocities_mm_s.len());
    for (vi, &v) in cfg.velocities_mm_s.iter().enumerate() {
        let mut row = Vec::with_capacity(cfg.distances_mm.len());
        for (di, &d) in cfg.distances_mm.iter().enumerate() {
            let location = tap_location(layout, cfg.mic, d);
            let cell: Vec<TapOutcome> = (0..cfg.episodes_per_cell)
                .into_par_iter()
                .map(|k| {
                    let ep = simulate_tap(layout, location, v, tap_seed(cfg, vi, di, k), params)?;
                    analyze_tap(&ep, cfg, params.pre_contact_s)
                })
                .collect::<Result<_>>()?;
            row.push(cell);
        }
        outcomes.push(row);
    }
    Ok(tabulate(cfg, &outcomes))
}

/// Grid cell of a stored tap: its approach velocity and its distance from the study microphone.
pub fn tap_cell(ep: &DragEpisode, layout: &SensorLayout, cfg: &StudyConfig) -> Option<(usize, usize)> {
    let location = ep.meta.tap_location_mm?;
    let d = layout.mic_positions.get(cfg.mic)?.dist(&location);
    let vi = cfg
        .velocities_mm_s
        .iter()
        .position(|&v| (v - ep.nominal_velocity_mm_s).abs() < 1e-9)?;
    let di = cfg.distances_mm.iter().position(|&g| (g - d).abs() < 1e-6)?;
    Some((vi, di))
}

/// Runs the study over recorded tap episodes, grouping them into grid cells.
/// Taps that match no cell are skipped with a warning.
pub fn study_from_episodes(
    episodes: &[DragEpisode],
    layout: &SensorLayout,
    pre_contact_s: f64,
    cfg: &StudyConfig,
) -> Result<ResponseTable> {
    let taps: Vec<&DragEpisode> = episodes.iter().filter(|e| e.kind == EpisodeKind::Tap).collect();
    if taps.is_empty() {
        return Err(Error::Empty("no tap episodes found".into()));
    }
    let analyzed: Vec<Option<((usize, usize), TapOutcome)>> = taps
        .par_iter()
        .map(|ep| match tap_cell(ep, layout, cfg) {
            Some(cell) => Ok(Some((cell, analyze_tap(ep, cfg, pre_contact_s)?))),
            None => {
                log::warn!("{}: tap does not match any study cell, skipped", ep.episode_id);
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut outcomes = vec![vec![Vec::new(); cfg.distances_mm.len()]; cfg.velocities_mm_s.len()];
    for ((vi, di), o) in analyzed.into_iter().flatten() {
        outcomes[vi][di].push(o);
    }
    Ok(tabulate(cfg, &outcomes))
}

