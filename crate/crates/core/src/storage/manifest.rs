use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::container::{read_file, write_file_atomic};
use super::episode::decode_episode;
use crate::sim::{DragEpisode, EpisodeKind, TextureId};
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: String,
    /// Path relative to the manifest's directory.
    pub file: String,
    pub texture: Option<TextureId>,
    pub nominal_velocity_mm_s: f64,
    pub kind: EpisodeKind,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub episodes: Vec<EpisodeRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl DatasetManifest {
    pub fn new() -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            episodes: Vec::new(),
        }
    }

    pub fn record(ep: &DragEpisode, file: String, bytes: &[u8]) -> EpisodeRecord {
        EpisodeRecord {
            episode_id: ep.episode_id.clone(),
            file,
            texture: ep.texture,
            nominal_velocity_mm_s: ep.nominal_velocity_mm_s,
            kind: ep.kind,
            seed: ep.rng_seed,
            sample_rate_hz: ep.sample_rate_hz,
            sha256: sha256_hex(bytes),
        }
    }

    pub fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.episodes {
            if !seen.insert(&r.episode_id) {
                return Err(Error::Format(format!("duplicate episode id {}", r.episode_id)));
            }
        }
        Ok(())
    }

    /// Writes the manifest atomically, so readers never see a partial file.
    pub fn write(&self, path: &Path) -> Result<()> {
        self.check_unique()?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        write_file_atomic(path, json.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let m: Self = serde_json::from_slice(&bytes).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!("bad manifest: {e}"),
        })?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Corrupt {
                path: path.to_path_buf(),
                reason: format!("unsupported manifest version {}", m.format_version),
            });
        }
        m.check_unique()?;
        Ok(m)
    }
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self::new()
    }
}

fn resolve(manifest_path: &Path, file: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new(".")).join(file)
}

/// Reads one episode and verifies its hash against the record.
pub fn load_record(manifest_path: &Path, rec: &EpisodeRecord) -> Result<DragEpisode> {
    let path = resolve(manifest_path, &rec.file);
    let bytes = read_file(&path)?;
    let actual = sha256_hex(&bytes);
    if actual != rec.sha256 {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            expected: rec.sha256.clone(),
            actual,
        });
    }
    let ep = decode_episode(&bytes, &path)?;
    if ep.episode_id != rec.episode_id {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!("holds episode {} instead of {}", ep.episode_id, rec.episode_id),
        });
    }
    Ok(ep)
}

/// Loads every episode listed in a manifest, verifying hashes.
pub fn load_episodes(manifest_path: &Path) -> Result<(DatasetManifest, Vec<DragEpisode>)> {
    use rayon::prelude::*;
    let m = DatasetManifest::read(manifest_path)?;
    let eps = m
        .episodes
        .par_iter()
        .map(|r| load_record(manifest_path, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, eps))
}
