//! Contact timing: the realtime microphone detector, the offline F/T label
//! heuristic, F/T episode conditioning and the response-time study.

mod ft;
mod mic;
mod study;

use serde::{Deserialize, Serialize};

pub use ft::{
    bias_episode, contact_region, first_crossing, ft_onset_index, has_flatline, longest_flat_run,
    remove_flatline, FlatlineConfig, FtDetectorConfig,
};
pub use mic::{onset_index, MicDetector, MicDetectorConfig};
pub use study::{
    analyze_tap, response_time_study, study_from_episodes, tabulate, tap_cell, tap_location,
    tap_seed, CellStats, ResponseTable, StudyConfig, TapOutcome,
};

use crate::sim::{DragEpisode, FT_FZ};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    Mic(usize),
    Ft,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMethod {
    RealtimeMic,
    OfflineFt,
    GroundTruthSim,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub episode_id: String,
    pub time_index: usize,
    pub time_s: f64,
    pub source: EventSource,
    pub method: DetectionMethod,
}

impl ContactEvent {
    pub fn new(
        episode_id: &str,
        time_index: usize,
        sample_rate_hz: f64,
        source: EventSource,
        method: DetectionMethod,
    ) -> Self {
        Self {
            episode_id: episode_id.to_string(),
            time_index,
            time_s: time_index as f64 / sample_rate_hz,
            source,
            method,
        }
    }
}

/// Microphone time minus F/T time, in milliseconds.
pub fn relative_response_time(mic: &ContactEvent, ft: &ContactEvent) -> Result<f64> {
    if mic.episode_id != ft.episode_id {
        return Err(Error::MismatchedEpisodes(
            mic.episode_id.clone(),
            ft.episode_id.clone(),
        ));
    }
    Ok((mic.time_s - ft.time_s) * 1000.0)
}

/// First realtime microphone event on `channel` of a stored episode.
pub fn mic_contact_detect(
    episode: &DragEpisode,
    channel: usize,
    cfg: &MicDetectorConfig,
) -> Option<ContactEvent> {
    onset_index(&episode.mic_channel(channel), cfg).map(|i| {
        ContactEvent::new(
            &episode.episode_id,
            i,
            episode.sample_rate_hz,
            EventSource::Mic(channel),
            DetectionMethod::RealtimeMic,
        )
    })
}

/// Offline F/T contact label of a (tared) episode.
pub fn ft_contact_detect_offline(
    episode: &DragEpisode,
    cfg: &FtDetectorConfig,
) -> Option<ContactEvent> {
    ft_onset_index(&episode.ft_channel(FT_FZ), cfg).map(|i| {
        ContactEvent::new(
            &episode.episode_id,
            i,
            episode.sample_rate_hz,
            EventSource::Ft,
            DetectionMethod::OfflineFt,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_time_arithmetic_and_mismatch() {
        let mic = ContactEvent {
            episode_id: "e".into(),
            time_index: 0,
            time_s: 1.0030,
            source: EventSource::Mic(0),
            method: DetectionMethod::RealtimeMic,
        };
        let ft = ContactEvent {
            time_s: 1.0,
            source: EventSource::Ft,
            method: DetectionMethod::OfflineFt,
            ..mic.clone()
        };
        assert!((relative_response_time(&mic, &ft).unwrap() - 3.0).abs() < 1e-9);
        let other = ContactEvent {
            episode_id: "f".into(),
            ..ft
        };
        assert!(relative_response_time(&mic, &other).is_err());
    }
}
