//! Vertical indentation ("tap") episodes for response-time analysis.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::adc::{adc_quantize, counts_to_volts};
use super::episode::{DragEpisode, EpisodeKind, EpisodeMeta, FT_FZ};
use super::layout::{Point, SensorLayout, NUM_MICS};
use super::params::{rng_stream, TapParams, STREAM_FT, STREAM_NOISE, STREAM_PATH};
use crate::{Error, Result};

pub fn tap_episode_id(location: Point, velocity_mm_s: f64, seed: u64) -> String {
    format!(
        "tap-x{:.2}-y{:.2}-v{}-s{}",
        location.x, location.y, velocity_mm_s, seed
    )
}

/// Microphone onset time after contact, in seconds, for a mic `distance_mm` away.
pub fn onset_delay_s(params: &TapParams, distance_mm: f64, velocity_mm_s: f64) -> f64 {
    (params.base_latency_ms + params.latency_per_mm_ms * distance_mm) / 1000.0
        + params.compression_threshold_mm / velocity_mm_s
}

/// Peak excitation (counts) before the receptive-field decay.
pub fn tap_amplitude(params: &TapParams, velocity_mm_s: f64) -> f64 {
    params.amplitude_base_counts + params.amplitude_per_velocity * velocity_mm_s
}

/// Normalized pulse shape of the microphone response `tau` seconds after onset.
pub fn tap_pulse(params: &TapParams, tau: f64) -> f64 {
    if tau < 0.0 {
        return 0.0;
    }
    let rise = params.rise_ms / 1000.0;
    let decay = params.decay_ms / 1000.0;
    (1.0 - (-tau / rise).exp()) * (-tau / decay).exp()
}

/// Simulates the indenter descending onto `location` at `approach_velocity_mm_s`.
pub fn simulate_tap(
    layout: &SensorLayout,
    location: Point,
    approach_velocity_mm_s: f64,
    seed: u64,
    params: &TapParams,
) -> Result<DragEpisode> {
    if !layout.sensing_area.contains(&location) {
        return Err(Error::InvalidArgument(format!(
            "tap location ({}, {}) lies outside the sensing area",
            location.x, location.y
        )));
    }
    if !(approach_velocity_mm_s > 0.0) || !approach_velocity_mm_s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "approach velocity must be positive, got {approach_velocity_mm_s}"
        )));
    }
    let v = approach_velocity_mm_s;
    let fs = params.sample_rate_hz;
    let mut path_rng = rng_stream(seed, STREAM_PATH);
    let contact_t = params.pre_contact_s + path_rng.random_range(0.0..1.0) / fs;
    let plateau = if params.plateau_range_n[1] > params.plateau_range_n[0] {
        path_rng.random_range(params.plateau_range_n[0]..=params.plateau_range_n[1])
    } else {
        params.plateau_range_n[0]
    };
    let final_depth = plateau / params.contact_stiffness_n_per_mm;
    let n = ((params.pre_contact_s + params.hold_s) * fs).round() as usize;
    let contact_index = (contact_t * fs).ceil() as usize;

    let mut noise_rng = rng_stream(seed, STREAM_NOISE);
    let bias: Vec<f64> = (0..NUM_MICS)
        .map(|_| params.bias_jitter_counts * noise_rng.random_range(-1.0..=1.0))
        .collect();
    let amp = tap_amplitude(params, v);
    let mics: Vec<(f64, f64)> = (0..NUM_MICS)
        .map(|m| {
            let d = layout.mic_positions[m].dist(&location);
            (
                contact_t + onset_delay_s(params, d, v),
                amp * layout.receptive_gain(m, &location),
            )
        })
        .collect();

    let mut ft_rng = rng_stream(seed, STREAM_FT);
    let offsets: Vec<f64> = (0..6)
        .map(|_| params.ft_offset_n * ft_rng.random_range(-1.0..=1.0))
        .collect();
    let drifts: Vec<f64> = (0..6)
        .map(|_| params.ft_drift_n_per_s * ft_rng.random_range(-1.0..=1.0))
        .collect();
    let flatline = if params.flatline_prob > 0.0 && ft_rng.random_bool(params.flatline_prob.min(1.0))
    {
        let start = contact_index.saturating_sub(5) + ft_rng.random_range(0..15);
        Some((start, params.flatline_len))
    } else {
        None
    };

    let mut mic_counts = Vec::with_capacity(n);
    let mut robot_pos = Vec::with_capacity(n);
    let mut robot_vel = Vec::with_capacity(n);
    let mut ft: Vec<[f64; 6]> = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let mut row = [0u16; NUM_MICS];
        for (m, slot) in row.iter_mut().enumerate() {
            let (onset, gain) = mics[m];
            let eps: f64 = StandardNormal.sample(&mut noise_rng);
            let dev = gain * tap_pulse(params, t - onset) + bias[m] + params.noise_sigma_counts * eps;
            *slot = adc_quantize(counts_to_volts(dev));
        }
        mic_counts.push(row);

        let since = t - contact_t;
        let depth = (v * since).clamp(0.0, final_depth);
        let z = if since < 0.0 { -v * since } else { -depth };
        let vz = if depth < final_depth { -v } else { 0.0 };
        robot_pos.push([location.x, location.y, z]);
        robot_vel.push([0.0, 0.0, vz]);

        let mut f = [0.0; 6];
        f[FT_FZ] = -params.contact_stiffness_n_per_mm * depth;
        for c in 0..6 {
            let e: f64 = StandardNormal.sample(&mut ft_rng);
            f[c] += offsets[c] + drifts[c] * t + params.ft_noise_n * e;
        }
        ft.push(f);
    }
    if let Some((start, len)) = flatline {
        let start = start.min(n.saturating_sub(1));
        let held = ft[start];
        for row in ft.iter_mut().skip(start).take(len) {
            *row = held;
        }
    }

    Ok(DragEpisode {
        episode_id: tap_episode_id(location, v, seed),
        kind: EpisodeKind::Tap,
        texture: None,
        nominal_velocity_mm_s: v,
        sample_rate_hz: fs,
        rng_seed: seed,
        mic_counts,
        robot_pos_mm: robot_pos,
        robot_vel_mm_s: robot_vel,
        ft_n: ft,
        meta: EpisodeMeta {
            normal_force_n: plateau,
            mic_bias_counts: bias,
            contact_time_s: Some(contact_t),
            contact_index: Some(contact_index),
            tap_location_mm: Some(location),
            plateau_force_n: Some(plateau),
            ft_flatline: flatline,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_outside_location() {
        let layout = SensorLayout::default();
        let r = simulate_tap(&layout, Point::new(30.0, 5.0), 55.0, 0, &TapParams::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sample_rate_and_ground_truth() {
        let layout = SensorLayout::default();
        let ep = simulate_tap(&layout, Point::new(10.0, 10.0), 55.0, 3, &TapParams::default())
            .unwrap();
        assert_eq!(ep.kind, EpisodeKind::Tap);
        assert_eq!(ep.sample_rate_hz, 2300.0);
        assert_eq!(ep.len(), (1.3f64 * 2300.0).round() as usize);
        let tc = ep.meta.contact_time_s.unwrap();
        assert!((0.3..0.3 + 1.0 / 2300.0).contains(&tc));
        let plateau = ep.meta.plateau_force_n.unwrap();
        assert!((2.0..=3.0).contains(&plateau));
    }

    #[test]
    fn pulse_is_zero_before_onset_and_positive_after() {
        let p = TapParams::default();
        assert_eq!(tap_pulse(&p, -1e-3), 0.0);
        assert_eq!(tap_pulse(&p, 0.0), 0.0);
        assert!(tap_pulse(&p, 1e-3) > 0.5);
    }
}
