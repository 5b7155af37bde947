use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::layout::{Point, NUM_MICS};
use super::texture::TextureId;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeKind {
    Drag,
    Tap,
}

impl fmt::Display for EpisodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EpisodeKind::Drag => "drag",
            EpisodeKind::Tap => "tap",
        })
    }
}

impl FromStr for EpisodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drag" => Ok(EpisodeKind::Drag),
            "tap" => Ok(EpisodeKind::Tap),
            _ => Err(Error::InvalidArgument(format!("unknown episode kind `{s}`"))),
        }
    }
}

/// Ground truth recorded by the simulator alongside the streams.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub start_mm: Option<Point>,
    pub end_mm: Option<Point>,
    pub normal_force_n: f64,
    pub z_rotation_deg: f64,
    pub accel_mm_s2: f64,
    /// First and one-past-last sample of commanded motion.
    pub motion_span: Option<(usize, usize)>,
    pub mic_bias_counts: Vec<f64>,
    pub contact_time_s: Option<f64>,
    pub contact_index: Option<usize>,
    pub tap_location_mm: Option<Point>,
    pub plateau_force_n: Option<f64>,
    /// Injected F/T dropout as (start, length).
    pub ft_flatline: Option<(usize, usize)>,
}

/// Time-aligned multichannel recording of one drag or tap.
#[derive(Clone, Debug, PartialEq)]
pub struct DragEpisode {
    pub episode_id: String,
    pub kind: EpisodeKind,
    pub texture: Option<TextureId>,
    pub nominal_velocity_mm_s: f64,
    pub sample_rate_hz: f64,
    pub rng_seed: u64,
    pub mic_counts: Vec<[u16; NUM_MICS]>,
    pub robot_pos_mm: Vec<[f64; 3]>,
    pub robot_vel_mm_s: Vec<[f64; 3]>,
    /// Fx, Fy, Fz in N followed by Tx, Ty, Tz in N·mm.
    pub ft_n: Vec<[f64; 6]>,
    pub meta: EpisodeMeta,
}

pub const FT_FZ: usize = 2;

impl DragEpisode {
    pub fn len(&self) -> usize {
        self.mic_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mic_counts.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    pub fn planar_speed(&self, i: usize) -> f64 {
        let v = self.robot_vel_mm_s[i];
        v[0].hypot(v[1])
    }

    pub fn planar_speeds(&self) -> Vec<f64> {
        (0..self.robot_vel_mm_s.len())
            .map(|i| self.planar_speed(i))
            .collect()
    }

    pub fn mic_channel(&self, ch: usize) -> Vec<u16> {
        self.mic_counts.iter().map(|row| row[ch]).collect()
    }

    pub fn ft_channel(&self, ch: usize) -> Vec<f64> {
        self.ft_n.iter().map(|row| row[ch]).collect()
    }

    /// Checks that every stream has the same length.
    pub fn check_consistent(&self) -> Result<()> {
        let t = self.mic_counts.len();
        if self.robot_pos_mm.len() != t || self.robot_vel_mm_s.len() != t || self.ft_n.len() != t
        {
            return Err(Error::ShapeMismatch(format!(
                "episode {}: stream lengths differ (mic {t}, pos {}, vel {}, ft {})",
                self.episode_id,
                self.robot_pos_mm.len(),
                self.robot_vel_mm_s.len(),
                self.ft_n.len()
            )));
        }
        Ok(())
    }
}
