use crate::model::ModelParams;
use crate::signal::{filter_window, Highpass, WindowSample};
use crate::sim::{Point, SensorLayout, NUM_MICS};
use crate::stats::rms;
use crate::{Error, Result};

/// Index of the channel with the highest RMS-to-noise ratio; ties go to the
/// lowest index.
pub fn snr_argmax(channel_rms: &[f64], noise_floor: &[f64]) -> Result<usize> {
    if channel_rms.len() != noise_floor.len() || channel_rms.is_empty() {
        return Err(Error::ShapeMismatch("one noise floor per channel required".into()));
    }
    if noise_floor.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
        return Err(Error::MissingNoiseFloor);
    }
    let mut best = 0;
    let mut best_snr = f64::NEG_INFINITY;
    for (c, (r, n)) in channel_rms.iter().zip(noise_floor).enumerate() {
        let snr = r / n;
        if snr > best_snr {
            best = c;
            best_snr = snr;
        }
    }
    Ok(best)
}

/// Position of the microphone with the highest SNR over the window.
pub fn snr_baseline_localize(window: &WindowSample, layout: &SensorLayout) -> Result<Point> {
    let channel_rms: Vec<f64> = (0..NUM_MICS).map(|c| rms(&window.channel(c))).collect();
    let mic = snr_argmax(&channel_rms, &window.noise_floor)?;
    Ok(layout.mic_positions[mic])
}

/// Speed from the distance between position estimates of the first and the
/// second half of a window.
///
/// Each half of the baseline-centered `raw` window is filtered on its own
/// and localized by `position_model`. The two estimates refer to the last
/// samples of the halves, which lie `half` samples apart.
pub fn velocity_from_position_baseline(
    position_model: &ModelParams,
    raw: &[f32],
    filter: &Highpass,
    sample_rate_hz: f64,
) -> Result<f64> {
    let half = position_model.config.window;
    if raw.len() != 2 * half * NUM_MICS {
        return Err(Error::ShapeMismatch(format!(
            "velocity baseline needs a {}-sample window, got {}",
            2 * half,
            raw.len() / NUM_MICS
        )));
    }
    let mut estimates = Vec::with_capacity(2);
    for part in raw.chunks(half * NUM_MICS) {
        let block: Vec<f64> = part.iter().map(|&v| v as f64).collect();
        let filtered = filter_window(filter, &block)?;
        let f32s: Vec<f32> = filtered.iter().map(|&v| v as f32).collect();
        estimates.push(position_model.forward(&f32s)?);
    }
    let dist = (estimates[1][0] - estimates[0][0]).hypot(estimates[1][1] - estimates[0][1]);
    Ok(dist / (half as f64 / sample_rate_hz))
}
