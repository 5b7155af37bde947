use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Drag-episode signal and motion model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DragParams {
    pub sample_rate_hz: f64,
    /// Static contact before the motion starts; must cover the baseline span.
    pub pre_motion_s: f64,
    pub post_motion_s: f64,
    pub min_path_mm: f64,
    pub accel_range_mm_s2: [f64; 2],
    pub force_range_n: [f64; 2],
    pub rotation_range_deg: [f64; 2],
    pub noise_sigma_counts: f64,
    pub bias_jitter_counts: f64,
    /// Fundamental bump amplitude per mm of bump diameter.
    pub bump_gain_counts_per_mm: f64,
    /// Harmonic k has relative weight `(sharpness * spacing / 4.5 mm)^(k-1)`.
    pub harmonic_sharpness: f64,
    pub ridge_pitch_mm: f64,
    /// Amplitude of the ridge tone at `speed / ridge_pitch`, relative to the bump fundamental.
    pub ridge_gain: f64,
    pub amplitude_jitter: f64,
    /// Friction noise standard deviation at the reference speed.
    pub friction_counts: f64,
    pub friction_ref_speed_mm_s: f64,
    /// Below this speed the bump excitation fades out linearly.
    pub vibration_gate_mm_s: f64,
    pub force_ref_n: f64,
    pub force_exponent: f64,
    pub contact_stiffness_n_per_mm: f64,
    pub friction_coeff: f64,
    pub ft_noise_n: f64,
}

impl Default for DragParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: 2000.0,
            pre_motion_s: 0.15,
            post_motion_s: 0.05,
            min_path_mm: 15.0,
            accel_range_mm_s2: [300.0, 400.0],
            force_range_n: [1.0, 5.0],
            rotation_range_deg: [0.0, 45.0],
            noise_sigma_counts: 2.0,
            bias_jitter_counts: 30.0,
            bump_gain_counts_per_mm: 60.0,
            harmonic_sharpness: 0.8,
            ridge_pitch_mm: 2.0,
            ridge_gain: 0.0,
            amplitude_jitter: 0.15,
            friction_counts: 12.0,
            friction_ref_speed_mm_s: 40.0,
            vibration_gate_mm_s: 5.0,
            force_ref_n: 3.0,
            force_exponent: 0.3,
            contact_stiffness_n_per_mm: 2.0,
            friction_coeff: 0.3,
            ft_noise_n: 0.01,
        }
    }
}

/// Tap (indentation) model used for response-time analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TapParams {
    pub sample_rate_hz: f64,
    pub pre_contact_s: f64,
    pub hold_s: f64,
    pub noise_sigma_counts: f64,
    pub bias_jitter_counts: f64,
    /// Peak mic excitation at the contact point: base + per_velocity * v.
    pub amplitude_base_counts: f64,
    pub amplitude_per_velocity: f64,
    pub rise_ms: f64,
    pub decay_ms: f64,
    pub base_latency_ms: f64,
    /// Elastomer propagation latency per mm of contact-to-mic distance.
    pub latency_per_mm_ms: f64,
    /// Indentation depth before the microphone sees pressure.
    pub compression_threshold_mm: f64,
    pub contact_stiffness_n_per_mm: f64,
    pub plateau_range_n: [f64; 2],
    pub ft_noise_n: f64,
    pub ft_offset_n: f64,
    pub ft_drift_n_per_s: f64,
    pub flatline_prob: f64,
    pub flatline_len: usize,
}

impl Default for TapParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: 2300.0,
            pre_contact_s: 0.3,
            hold_s: 1.0,
            noise_sigma_counts: 2.0,
            bias_jitter_counts: 30.0,
            amplitude_base_counts: 150.0,
            amplitude_per_velocity: 8.0,
            rise_ms: 1.0,
            decay_ms: 20.0,
            base_latency_ms: 1.0,
            latency_per_mm_ms: 0.4,
            compression_threshold_mm: 0.03,
            contact_stiffness_n_per_mm: 10.0,
            plateau_range_n: [2.0, 3.0],
            ft_noise_n: 0.005,
            ft_offset_n: 0.5,
            ft_drift_n_per_s: 0.05,
            flatline_prob: 0.0,
            flatline_len: 20,
        }
    }
}

/// Full simulator configuration as read from a TOML file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub layout: super::layout::LayoutConfig,
    pub drag: DragParams,
    pub tap: TapParams,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("simulation config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Independent deterministic random stream derived from an episode seed.
pub(crate) fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const STREAM_PATH: u64 = 0;
pub(crate) const STREAM_NOISE: u64 = 1;
pub(crate) const STREAM_TEXTURE: u64 = 2;
pub(crate) const STREAM_FT: u64 = 3;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_partial_file() {
        let cfg = SimConfig::from_toml("[drag]\nnoise_sigma_counts = 3.5\n").unwrap();
        assert_eq!(cfg.drag.noise_sigma_counts, 3.5);
        assert_eq!(cfg.drag.sample_rate_hz, 2000.0);
        let back = SimConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_toml_is_a_format_error() {
        assert!(matches!(
            SimConfig::from_toml("[drag]\nnoise_sigma_counts = \"x\""),
            Err(Error::Format(_))
        ));
    }
}
