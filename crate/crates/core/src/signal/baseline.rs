use crate::detect::{onset_index, MicDetectorConfig};
use crate::sim::{DragEpisode, NUM_MICS};
use crate::{Error, Result};

pub const DEFAULT_BASELINE_LEN: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineWarning {
    /// Motion or a microphone onset happens inside the baseline span, so the
    /// baseline estimate is biased.
    OnsetInBaseline { index: usize },
}

/// Episode with each microphone channel centered on its own baseline.
#[derive(Clone, Debug)]
pub struct CenteredEpisode {
    /// Row-major `T x NUM_MICS`.
    pub data: Vec<f64>,
    pub baseline: [f64; NUM_MICS],
    /// Per-channel standard deviation over the baseline span.
    pub noise_floor: [f64; NUM_MICS],
    pub warnings: Vec<BaselineWarning>,
}

impl CenteredEpisode {
    pub fn len(&self) -> usize {
        self.data.len() / NUM_MICS
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self, start: usize, n: usize) -> &[f64] {
        &self.data[start * NUM_MICS..(start + n) * NUM_MICS]
    }
}

/// Subtracts, per microphone, the mean of the first `baseline_len` samples.
///
/// `vel_threshold_mm_s` is the speed above which the robot counts as moving
/// when checking the baseline span for an onset.
pub fn subtract_baseline(
    episode: &DragEpisode,
    baseline_len: usize,
    vel_threshold_mm_s: f64,
) -> Result<CenteredEpisode> {
    let t = episode.len();
    if baseline_len == 0 || t < baseline_len {
        return Err(Error::EpisodeTooShort {
            needed: baseline_len.max(1),
            have: t,
        });
    }
    let mut baseline = [0.0; NUM_MICS];
    for row in &episode.mic_counts[..baseline_len] {
        for (b, &c) in baseline.iter_mut().zip(row) {
            *b += c as f64;
        }
    }
    for b in baseline.iter_mut() {
        *b /= baseline_len as f64;
    }

    let mut data = Vec::with_capacity(t * NUM_MICS);
    for row in &episode.mic_counts {
        data.extend(row.iter().zip(&baseline).map(|(&c, b)| c as f64 - b));
    }

    let mut noise_floor = [0.0; NUM_MICS];
    for i in 0..baseline_len {
        for (c, nf) in noise_floor.iter_mut().enumerate() {
            let v = data[i * NUM_MICS + c];
            *nf += v * v;
        }
    }
    for nf in noise_floor.iter_mut() {
        *nf = (*nf / baseline_len as f64).sqrt();
    }

    let mut warnings = Vec::new();
    let moving = (0..baseline_len.min(episode.robot_vel_mm_s.len()))
        .find(|&i| episode.planar_speed(i) >= vel_threshold_mm_s);
    let mic_onset = (0..NUM_MICS)
        .filter_map(|c| {
            let ch: Vec<u16> = episode.mic_counts[..baseline_len].iter().map(|r| r[c]).collect();
            onset_index(&ch, &MicDetectorConfig::default())
        })
        .min();
    if let Some(index) = [moving, mic_onset].into_iter().flatten().min() {
        log::warn!(
            "episode {}: onset at sample {index} inside the {baseline_len}-sample baseline",
            episode.episode_id
        );
        warnings.push(BaselineWarning::OnsetInBaseline { index });
    }

    Ok(CenteredEpisode {
        data,
        baseline,
        noise_floor,
        warnings,
    })
}
