use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{decode, encode, read_file, write_file, Reader};
use crate::sim::{DragEpisode, EpisodeKind, EpisodeMeta, TextureId, NUM_MICS};
use crate::Result;

const MAGIC: &[u8; 4] = b"MTEP";
const VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    episode_id: String,
    kind: EpisodeKind,
    texture: Option<TextureId>,
    nominal_velocity_mm_s: f64,
    sample_rate_hz: f64,
    rng_seed: u64,
    samples: usize,
    meta: EpisodeMeta,
}

/// Serializes an episode: header JSON followed by the microphone (`u16`),
/// position, velocity and F/T (`f64`) blocks, all time-major.
pub fn encode_episode(ep: &DragEpisode) -> Result<Vec<u8>> {
    ep.check_consistent()?;
    let t = ep.len();
    let header = Header {
        episode_id: ep.episode_id.clone(),
        kind: ep.kind,
        texture: ep.texture,
        nominal_velocity_mm_s: ep.nominal_velocity_mm_s,
        sample_rate_hz: ep.sample_rate_hz,
        rng_seed: ep.rng_seed,
        samples: t,
        meta: ep.meta.clone(),
    };
    let mut payload = Vec::with_capacity(t * (2 * NUM_MICS + 8 * 12));
    for row in &ep.mic_counts {
        for v in row {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    for block in [&ep.robot_pos_mm, &ep.robot_vel_mm_s] {
        for row in block.iter() {
            for v in row {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    for row in &ep.ft_n {
        for v in row {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    encode(MAGIC, VERSION, &header, &payload)
}

pub fn decode_episode(bytes: &[u8], path: &Path) -> Result<DragEpisode> {
    let (h, payload): (Header, _) = decode(bytes, MAGIC, VERSION, path)?;
    let t = h.samples;
    let mut r = Reader::new(payload, path);
    let mic = r.u16s(t * NUM_MICS)?;
    let pos = r.f64s(t * 3)?;
    let vel = r.f64s(t * 3)?;
    let ft = r.f64s(t * 6)?;
    r.finish()?;
    let ep = DragEpisode {
        episode_id: h.episode_id,
        kind: h.kind,
        texture: h.texture,
        nominal_velocity_mm_s: h.nominal_velocity_mm_s,
        sample_rate_hz: h.sample_rate_hz,
        rng_seed: h.rng_seed,
        mic_counts: mic.chunks_exact(NUM_MICS).map(|c| c.try_into().expect("row")).collect(),
        robot_pos_mm: pos.chunks_exact(3).map(|c| c.try_into().expect("row")).collect(),
        robot_vel_mm_s: vel.chunks_exact(3).map(|c| c.try_into().expect("row")).collect(),
        ft_n: ft.chunks_exact(6).map(|c| c.try_into().expect("row")).collect(),
        meta: h.meta,
    };
    ep.check_consistent()?;
    Ok(ep)
}

pub fn write_episode(path: &Path, ep: &DragEpisode) -> Result<()> {
    write_file(path, &encode_episode(ep)?)
}

pub fn read_episode(path: &Path) -> Result<DragEpisode> {
    decode_episode(&read_file(path)?, path)
}
