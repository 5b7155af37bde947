use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::sim::{DragEpisode, FT_FZ};
use crate::{Error, Result};

/// Offline force/torque contact heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtDetectorConfig {
    pub window: usize,
    /// Some sample in the window must fall below this force.
    pub contact_force_n: f64,
    /// The force must start decreasing within this many samples...
    pub decrease_within: usize,
    /// ...by at least this much, which separates a real decrease from noise.
    pub decrease_n: f64,
    /// Lag for the significant-drop check.
    pub drop_lag: usize,
    pub drop_n: f64,
}

impl Default for FtDetectorConfig {
    fn default() -> Self {
        Self {
            window: 30,
            contact_force_n: -1.0,
            decrease_within: 4,
            decrease_n: 0.03,
            drop_lag: 25,
            drop_n: 0.5,
        }
    }
}

/// Earliest index whose forward window satisfies all contact conditions.
///
/// Non-causal: each candidate looks `window - 1` samples ahead.
pub fn ft_onset_index(fz: &[f64], cfg: &FtDetectorConfig) -> Option<usize> {
    let w = cfg.window.max(cfg.drop_lag + 1).max(cfg.decrease_within + 1);
    if fz.len() < w {
        return None;
    }
    (0..=fz.len() - w).find(|&i| {
        let win = &fz[i..i + w];
        let cur = win[0];
        win.iter().any(|&f| f < cfg.contact_force_n)
            && win[1..].iter().all(|&f| f < cur)
            && (1..=cfg.decrease_within).any(|j| win[j] <= cur - cfg.decrease_n)
            && win[cfg.drop_lag] <= cur - cfg.drop_n
    })
}

/// First sample strictly below `level`, as a realtime threshold detector sees it.
pub fn first_crossing(fz: &[f64], level: f64) -> Option<usize> {
    fz.iter().position(|&f| f < level)
}

/// Subtracts each F/T channel's mean over `quiet` from the whole episode.
pub fn bias_episode(
    episode: &DragEpisode,
    quiet: Range<usize>,
    cfg: &FtDetectorConfig,
) -> Result<DragEpisode> {
    if quiet.is_empty() || quiet.end > episode.ft_n.len() {
        return Err(Error::InvalidArgument(format!(
            "quiet span {quiet:?} does not fit an episode of {} samples",
            episode.ft_n.len()
        )));
    }
    let mut mean = [0.0; 6];
    for row in &episode.ft_n[quiet.clone()] {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= quiet.len() as f64;
    }
    let mut out = episode.clone();
    for row in out.ft_n.iter_mut() {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    if let Some(contact) = ft_onset_index(&out.ft_channel(FT_FZ), cfg) {
        if contact < quiet.end {
            return Err(Error::QuietSpanOverlapsContact {
                start: quiet.start,
                end: quiet.end,
                contact,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatlineConfig {
    /// Minimum run of identical consecutive F/T rows that counts as a dropout.
    pub min_run: usize,
    /// Tared |Fz| above which the episode is in contact.
    pub contact_level_n: f64,
    /// Samples before the first contact-level reading included in the region.
    pub margin: usize,
    /// Leading samples used to tare Fz before locating the contact region.
    pub quiet_len: usize,
}

impl Default for FlatlineConfig {
    fn default() -> Self {
        Self {
            min_run: 12,
            contact_level_n: 0.2,
            margin: 30,
            quiet_len: 200,
        }
    }
}

/// Span from shortly before the first contact-level force to the end of the episode.
pub fn contact_region(episode: &DragEpisode, cfg: &FlatlineConfig) -> Option<Range<usize>> {
    let fz = episode.ft_channel(FT_FZ);
    let q = cfg.quiet_len.clamp(1, fz.len().max(1));
    if fz.is_empty() {
        return None;
    }
    let offset = fz[..q.min(fz.len())].iter().sum::<f64>() / q.min(fz.len()) as f64;
    let first = fz.iter().position(|&f| f - offset < -cfg.contact_level_n)?;
    Some(first.saturating_sub(cfg.margin)..fz.len())
}

/// Longest run of identical consecutive F/T rows inside `region`.
pub fn longest_flat_run(ft: &[[f64; 6]], region: Range<usize>) -> usize {
    let region = region.start.min(ft.len())..region.end.min(ft.len());
    let mut best = usize::from(!region.is_empty());
    let mut run = 1;
    for i in region.start + 1..region.end {
        if ft[i] == ft[i - 1] {
            run += 1;
            best = best.max(run);
        } else {
            run = 1;
        }
    }
    best
}

pub fn has_flatline(episode: &DragEpisode, cfg: &FlatlineConfig) -> bool {
    contact_region(episode, cfg)
        .map(|r| longest_flat_run(&episode.ft_n, r) >= cfg.min_run)
        .unwrap_or(false)
}

/// Drops episodes whose F/T stream freezes during contact.
pub fn remove_flatline(episodes: Vec<DragEpisode>, cfg: &FlatlineConfig) -> Vec<DragEpisode> {
    episodes
        .into_iter()
        .filter(|e| {
            let bad = has_flatline(e, cfg);
            if bad {
                log::info!("dropping {}: F/T flat-line during contact", e.episode_id);
            }
            !bad
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic pseudo-noise in [-amp, amp].
    fn wiggle(i: usize, amp: f64) -> f64 {
        amp * ((i as f64 * 12.9898).sin() * 43758.5453).fract()
    }

    fn ramp_trace(start: usize, depth: f64, ramp_len: usize, len: usize, noise: f64) -> Vec<f64> {
        (0..len)
            .map(|i| {
                let k = i.saturating_sub(start).min(ramp_len) as f64;
                -depth * k / ramp_len as f64 + wiggle(i, noise)
            })
            .collect()
    }

    #[test]
    fn ramp_detected_near_start_and_before_crossing() {
        let fz = ramp_trace(300, 3.0, 50, 600, 0.05);
        let cfg = FtDetectorConfig::default();
        let i = ft_onset_index(&fz, &cfg).unwrap();
        assert!((i as i64 - 300).abs() <= 2, "{i}");
        assert!(i < first_crossing(&fz, -1.0).unwrap());
    }

    #[test]
    fn flat_trace_has_no_contact() {
        assert_eq!(ft_onset_index(&vec![0.0; 500], &Default::default()), None);
    }

    #[test]
    fn shallow_ramp_fails() {
        let fz = ramp_trace(300, 0.4, 50, 600, 0.0);
        assert_eq!(ft_onset_index(&fz, &Default::default()), None);
    }

    fn ft_episode(fz: Vec<f64>) -> DragEpisode {
        let mut ep = crate::signal::test_episode(vec![[0; 10]; fz.len()], vec![0.0; fz.len()]);
        ep.ft_n = fz
            .iter()
            .enumerate()
            .map(|(i, &f)| [wiggle(i + 7, 0.01), wiggle(i + 3, 0.01), f, 0.0, 0.0, 0.0])
            .collect();
        ep
    }

    #[test]
    fn taring_removes_offset() {
        let fz: Vec<f64> = ramp_trace(400, 3.0, 50, 700, 0.01).iter().map(|f| f + 0.3).collect();
        let ep = ft_episode(fz);
        let tared = bias_episode(&ep, 0..300, &Default::default()).unwrap();
        let quiet = &tared.ft_channel(FT_FZ)[..300];
        assert!(crate::stats::mean(quiet).unwrap().abs() < 1e-12);
    }

    #[test]
    fn different_drifts_give_same_quiet_stats() {
        let base = ramp_trace(400, 3.0, 50, 700, 0.01);
        let a = ft_episode(base.iter().map(|f| f + 0.2).collect());
        let b = ft_episode(base.iter().map(|f| f - 0.4).collect());
        let cfg = FtDetectorConfig::default();
        let ta = bias_episode(&a, 0..300, &cfg).unwrap().ft_channel(FT_FZ);
        let tb = bias_episode(&b, 0..300, &cfg).unwrap().ft_channel(FT_FZ);
        for (x, y) in ta.iter().zip(&tb).take(300) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn quiet_span_over_onset_errors() {
        let ep = ft_episode(ramp_trace(200, 3.0, 50, 600, 0.01));
        assert!(matches!(
            bias_episode(&ep, 0..300, &Default::default()),
            Err(Error::QuietSpanOverlapsContact { .. })
        ));
    }

    fn freeze(ep: &mut DragEpisode, start: usize, len: usize) {
        let held = ep.ft_n[start];
        for row in ep.ft_n.iter_mut().skip(start).take(len) {
            *row = held;
        }
    }

    #[test]
    fn flatline_during_onset_removed_elsewhere_kept() {
        let fz = ramp_trace(500, 3.0, 60, 900, 0.01);
        let mut onset = ft_episode(fz.clone());
        freeze(&mut onset, 495, 20);
        let healthy = ft_episode(fz.clone());
        let mut early = ft_episode(fz);
        freeze(&mut early, 250, 20);
        let kept = remove_flatline(vec![onset, healthy, early], &Default::default());
        assert_eq!(kept.len(), 2);
        assert!(!has_flatline(&kept[0], &Default::default()));
        assert!(!has_flatline(&kept[1], &Default::default()));
    }
}
