use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{decode, encode, read_file, write_file, Reader};
use crate::signal::{WindowConfig, WindowSample};
use crate::sim::{TextureId, NUM_MICS};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MTWD";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct WindowRecord {
    episode_id: String,
    drag_id: String,
    start: usize,
    sample_rate_hz: f64,
    noise_floor: [f64; NUM_MICS],
    label_texture: Option<TextureId>,
    label_pos_mm: [f64; 2],
    label_vel_mm_s: f64,
    nominal_velocity_mm_s: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: WindowConfig,
    has_raw: bool,
    records: Vec<WindowRecord>,
}

/// Windows extracted with one configuration, ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowDataset {
    pub config: WindowConfig,
    pub samples: Vec<WindowSample>,
}

impl WindowDataset {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let n = self.config.window;
        let has_raw = self.config.keep_raw;
        let mut payload = Vec::with_capacity(self.samples.len() * n * NUM_MICS * 4 * (1 + has_raw as usize));
        let mut records = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            if s.n != n || s.data.len() != n * NUM_MICS || (has_raw && s.raw.len() != n * NUM_MICS) {
                return Err(Error::ShapeMismatch(format!(
                    "window {}@{} does not match the dataset shape",
                    s.drag_id, s.start
                )));
            }
            for v in s.data.iter().chain(if has_raw { &s.raw[..] } else { &[][..] }) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            records.push(WindowRecord {
                episode_id: s.episode_id.clone(),
                drag_id: s.drag_id.clone(),
                start: s.start,
                sample_rate_hz: s.sample_rate_hz,
                noise_floor: s.noise_floor,
                label_texture: s.label_texture,
                label_pos_mm: s.label_pos_mm,
                label_vel_mm_s: s.label_vel_mm_s,
                nominal_velocity_mm_s: s.nominal_velocity_mm_s,
            });
        }
        let header = Header {
            config: self.config.clone(),
            has_raw,
            records,
        };
        encode(MAGIC, VERSION, &header, &payload)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let (h, payload): (Header, _) = decode(bytes, MAGIC, VERSION, path)?;
        let len = h.config.window * NUM_MICS;
        let mut r = Reader::new(payload, path);
        let mut samples = Vec::with_capacity(h.records.len());
        for rec in h.records {
            let data = r.f32s(len)?;
            let raw = if h.has_raw { r.f32s(len)? } else { Vec::new() };
            samples.push(WindowSample {
                episode_id: rec.episode_id,
                drag_id: rec.drag_id,
                start: rec.start,
                n: h.config.window,
                sample_rate_hz: rec.sample_rate_hz,
                data,
                raw,
                noise_floor: rec.noise_floor,
                label_texture: rec.label_texture,
                label_pos_mm: rec.label_pos_mm,
                label_vel_mm_s: rec.label_vel_mm_s,
                nominal_velocity_mm_s: rec.nominal_velocity_mm_s,
            });
        }
        r.finish()?;
        Ok(Self {
            config: h.config,
            samples,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }
}
