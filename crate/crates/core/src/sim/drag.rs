//! Straight-line drag episodes with a trapezoidal velocity profile.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::adc::{adc_quantize, counts_to_volts};
use super::episode::{DragEpisode, EpisodeKind, EpisodeMeta};
use super::layout::{Point, SensorLayout, NUM_MICS};
use super::params::{rng_stream, DragParams, STREAM_NOISE, STREAM_PATH, STREAM_TEXTURE};
use super::texture::TextureSpec;
use crate::{Error, Result};

/// Trapezoidal (or triangular, for short paths) motion along a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapezoidProfile {
    pub length_mm: f64,
    pub accel_mm_s2: f64,
    pub peak_speed_mm_s: f64,
    pub ramp_s: f64,
    pub cruise_s: f64,
}

impl TrapezoidProfile {
    pub fn new(length_mm: f64, speed_mm_s: f64, accel_mm_s2: f64) -> Self {
        let peak = speed_mm_s.min((accel_mm_s2 * length_mm).sqrt());
        let ramp_s = peak / accel_mm_s2;
        let ramp_len = 0.5 * accel_mm_s2 * ramp_s * ramp_s;
        let cruise_s = ((length_mm - 2.0 * ramp_len) / peak).max(0.0);
        Self {
            length_mm,
            accel_mm_s2,
            peak_speed_mm_s: peak,
            ramp_s,
            cruise_s,
        }
    }

    pub fn duration_s(&self) -> f64 {
        2.0 * self.ramp_s + self.cruise_s
    }

    /// Distance travelled and speed at time `t` since motion start.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let a = self.accel_mm_s2;
        let total = self.duration_s();
        let (s, v) = if t <= 0.0 {
            (0.0, 0.0)
        } else if t < self.ramp_s {
            (0.5 * a * t * t, a * t)
        } else if t < self.ramp_s + self.cruise_s {
            let ramp_len = 0.5 * a * self.ramp_s * self.ramp_s;
            (ramp_len + self.peak_speed_mm_s * (t - self.ramp_s), self.peak_speed_mm_s)
        } else if t < total {
            let rem = total - t;
            (self.length_mm - 0.5 * a * rem * rem, a * rem)
        } else {
            (self.length_mm, 0.0)
        };
        (s.clamp(0.0, self.length_mm), v)
    }
}

pub fn drag_episode_id(texture: &TextureSpec, velocity_mm_s: f64, seed: u64) -> String {
    format!("drag-{}-v{}-s{}", texture.id, velocity_mm_s, seed)
}

/// Generates one labeled drag of `texture` across the sensor at `velocity_mm_s`.
pub fn simulate_drag(
    layout: &SensorLayout,
    texture: &TextureSpec,
    velocity_mm_s: f64,
    seed: u64,
    params: &DragParams,
) -> Result<DragEpisode> {
    if !(velocity_mm_s > 0.0) || !velocity_mm_s.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "drag velocity must be positive, got {velocity_mm_s}"
        )));
    }
    let fs = params.sample_rate_hz;
    let area = layout.sensing_area;
    if params.min_path_mm > area.width().hypot(area.height()) {
        return Err(Error::InvalidArgument(format!(
            "minimum path {} mm cannot fit in the sensing area",
            params.min_path_mm
        )));
    }

    // Path, depth, rotation and acceleration depend on the seed only.
    let mut path_rng = rng_stream(seed, STREAM_PATH);
    let perimeter = area.perimeter();
    let start = area.border_point(path_rng.random_range(0.0..perimeter));
    let end = loop {
        let p = area.border_point(path_rng.random_range(0.0..perimeter));
        if p.dist(&start) >= params.min_path_mm {
            break p;
        }
    };
    let force = uniform(&mut path_rng, params.force_range_n);
    let rotation = uniform(&mut path_rng, params.rotation_range_deg);
    let accel = uniform(&mut path_rng, params.accel_range_mm_s2);

    let length = start.dist(&end);
    let dir = ((end.x - start.x) / length, (end.y - start.y) / length);
    let profile = TrapezoidProfile::new(length, velocity_mm_s, accel);

    let n_pre = (params.pre_motion_s * fs).round() as usize;
    let total_s = params.pre_motion_s + profile.duration_s() + params.post_motion_s;
    let n = (total_s * fs).round() as usize;
    let t0 = n_pre as f64 / fs;

    let mut noise_rng = rng_stream(seed, STREAM_NOISE);
    let mut tex_rng = rng_stream(seed, STREAM_TEXTURE);
    let bias: Vec<f64> = (0..NUM_MICS)
        .map(|_| params.bias_jitter_counts * noise_rng.random_range(-1.0..=1.0))
        .collect();

    let force_factor = (force / params.force_ref_n).powf(params.force_exponent);
    let diameter = texture.bump_diameter_mm;
    let spacing = texture.bump_spacing_mm;
    let ratio = if texture.is_flat() {
        0.0
    } else {
        params.harmonic_sharpness * spacing / super::texture::MAX_BUMP_SPACING_MM
    };
    let harmonics = [1.0, ratio, ratio * ratio];
    // Bumps share one profile; only where the path meets the grid is random.
    let grid_phase = tex_rng.random_range(0.0..2.0 * PI);
    let jitter: Vec<f64> = if texture.is_flat() {
        Vec::new()
    } else {
        let bumps = (length / spacing).ceil() as usize + 2;
        (0..bumps)
            .map(|_| 1.0 + params.amplitude_jitter * tex_rng.random_range(-1.0..=1.0))
            .collect()
    };
    let ridge_phase = tex_rng.random_range(0.0..2.0 * PI);
    let bump_amp = params.bump_gain_counts_per_mm * diameter * force_factor;

    let z = -force / params.contact_stiffness_n_per_mm;
    let center = area.center();
    let mut ft_rng = rng_stream(seed, super::params::STREAM_FT);

    let mut mic_counts = Vec::with_capacity(n);
    let mut robot_pos = Vec::with_capacity(n);
    let mut robot_vel = Vec::with_capacity(n);
    let mut ft = Vec::with_capacity(n);
    let mut motion_end = n;
    for i in 0..n {
        let t = i as f64 / fs - t0;
        let (s, speed) = profile.at(t);
        if t >= profile.duration_s() && motion_end == n && i >= n_pre {
            motion_end = i;
        }
        let p = Point::new(start.x + dir.0 * s, start.y + dir.1 * s);
        robot_pos.push([p.x, p.y, z]);
        robot_vel.push([dir.0 * speed, dir.1 * speed, 0.0]);

        let gate = (speed / params.vibration_gate_mm_s).min(1.0);
        let mut source = 0.0;
        if !texture.is_flat() {
            let k = ((s / spacing) as usize).min(jitter.len() - 1);
            let phase = 2.0 * PI * s / spacing + grid_phase;
            let wave: f64 = harmonics
                .iter()
                .enumerate()
                .map(|(h, w)| w * ((h + 1) as f64 * phase).cos())
                .sum::<f64>()
                + params.ridge_gain * (2.0 * PI * s / params.ridge_pitch_mm + ridge_phase).sin();
            source += gate * bump_amp * jitter[k] * wave;
        }
        let friction_sd = params.friction_counts
            * force_factor
            * (speed / params.friction_ref_speed_mm_s).sqrt();
        let fric: f64 = StandardNormal.sample(&mut noise_rng);
        source += friction_sd * fric;

        let mut row = [0u16; NUM_MICS];
        for (m, slot) in row.iter_mut().enumerate() {
            let eps: f64 = StandardNormal.sample(&mut noise_rng);
            let dev = layout.receptive_gain(m, &p) * source
                + bias[m]
                + params.noise_sigma_counts * eps;
            *slot = adc_quantize(counts_to_volts(dev));
        }
        mic_counts.push(row);

        let mut f = [0.0; 6];
        let slide = gate * params.friction_coeff * force;
        f[0] = -slide * dir.0;
        f[1] = -slide * dir.1;
        f[2] = -force;
        f[3] = f[2] * (p.y - center.y);
        f[4] = -f[2] * (p.x - center.x);
        for (c, v) in f.iter_mut().enumerate() {
            let scale = if c < 3 { 1.0 } else { 10.0 };
            let e: f64 = StandardNormal.sample(&mut ft_rng);
            *v += scale * params.ft_noise_n * e;
        }
        ft.push(f);
    }

    Ok(DragEpisode {
        episode_id: drag_episode_id(texture, velocity_mm_s, seed),
        kind: EpisodeKind::Drag,
        texture: Some(texture.id),
        nominal_velocity_mm_s: velocity_mm_s,
        sample_rate_hz: fs,
        rng_seed: seed,
        mic_counts,
        robot_pos_mm: robot_pos,
        robot_vel_mm_s: robot_vel,
        ft_n: ft,
        meta: EpisodeMeta {
            start_mm: Some(start),
            end_mm: Some(end),
            normal_force_n: force,
            z_rotation_deg: rotation,
            accel_mm_s2: accel,
            motion_span: Some((n_pre, motion_end)),
            mic_bias_counts: bias,
            ..Default::default()
        },
    })
}

fn uniform<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}
