use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{tap_location, tap_seed, StudyConfig};
use crate::signal::{extract_windows, Highpass, WindowConfig, WindowSample};
use crate::sim::{
    build_layout, simulate_drag, simulate_tap, DragEpisode, SimConfig, TextureId, DRAG_VELOCITIES,
};
use crate::storage::{encode_episode, write_artifact, DatasetManifest, EpisodeRecord};
use crate::{Error, Result};

pub const DESK_DRAGS_PER_CELL: usize = 40;
pub const FULL_DRAGS_PER_CELL: usize = 200;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SIM_CONFIG_FILE: &str = "sim_config.toml";
const EPISODE_DIR: &str = "episodes";

/// Texture x velocity grid of drags to simulate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragGrid {
    pub textures: Vec<TextureId>,
    pub velocities_mm_s: Vec<f64>,
    pub drags_per_cell: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DragJob {
    pub texture: TextureId,
    pub velocity_mm_s: f64,
    pub seed: u64,
}

/// Seed of drag `k` in cell (`texture`, `velocity_index`).
pub fn drag_seed(base: u64, texture: TextureId, velocity_index: usize, k: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add(((texture.index() * 100 + velocity_index) * 100_000 + k) as u64)
}

impl DragGrid {
    /// Full texture and velocity grid with `drags_per_cell` drags each.
    pub fn standard(drags_per_cell: usize, seed: u64) -> Self {
        Self {
            textures: TextureId::ALL.to_vec(),
            velocities_mm_s: DRAG_VELOCITIES.to_vec(),
            drags_per_cell,
            seed,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self::standard(DESK_DRAGS_PER_CELL, seed)
    }

    pub fn full(seed: u64) -> Self {
        Self::standard(FULL_DRAGS_PER_CELL, seed)
    }

    pub fn len(&self) -> usize {
        self.textures.len() * self.velocities_mm_s.len() * self.drags_per_cell
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Texture-major list of every drag in the grid.
    pub fn jobs(&self) -> Vec<DragJob> {
        let mut jobs = Vec::with_capacity(self.len());
        for &texture in &self.textures {
            for (vi, &v) in self.velocities_mm_s.iter().enumerate() {
                for k in 0..self.drags_per_cell {
                    jobs.push(DragJob {
                        texture,
                        velocity_mm_s: v,
                        seed: drag_seed(self.seed, texture, vi, k),
                    });
                }
            }
        }
        jobs
    }
}

fn simulate_job(sim: &SimConfig, layout: &crate::sim::SensorLayout, job: &DragJob) -> Result<DragEpisode> {
    simulate_drag(layout, &job.texture.spec(), job.velocity_mm_s, job.seed, &sim.drag)
}

/// Simulates the grid and extracts windows in memory, without touching disk.
pub fn grid_windows(grid: &DragGrid, sim: &SimConfig, window: &WindowConfig) -> Result<Vec<WindowSample>> {
    let layout = build_layout(&sim.layout)?;
    let filter = Highpass::preprocessing_at(sim.drag.sample_rate_hz)?;
    let per_job: Vec<Vec<WindowSample>> = grid
        .jobs()
        .par_iter()
        .map(|job| extract_windows(&simulate_job(sim, &layout, job)?, window, &filter))
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Which episodes a corpus run generates.
#[derive(Clone, Debug, PartialEq)]
pub enum CorpusSpec {
    Drags(DragGrid),
    /// The response-time study grid, with the study's seeds.
    Taps(StudyConfig),
}

fn write_one(out_dir: &Path, ep: &DragEpisode) -> Result<EpisodeRecord> {
    let bytes = encode_episode(ep)?;
    let file = format!("{EPISODE_DIR}/{}.mtep", ep.episode_id);
    write_artifact(&out_dir.join(&file), &bytes)?;
    Ok(DatasetManifest::record(ep, file, &bytes))
}

/// Generates the requested episodes into `out_dir/episodes`, then writes
/// the simulator config and the manifest. Episodes are written in parallel,
/// each to its own file; the manifest is written once at the end.
pub fn simulate_corpus(spec: &CorpusSpec, sim: &SimConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let layout = build_layout(&sim.layout)?;
    let records: Vec<EpisodeRecord> = match spec {
        CorpusSpec::Drags(grid) => grid
            .jobs()
            .par_iter()
            .map(|job| write_one(out_dir, &simulate_job(sim, &layout, job)?))
            .collect::<Result<_>>()?,
        CorpusSpec::Taps(study) => {
            if study.mic >= layout.mic_positions.len() {
                return Err(Error::InvalidArgument(format!("no microphone {}", study.mic)));
            }
            let mut jobs = Vec::new();
            for (vi, &v) in study.velocities_mm_s.iter().enumerate() {
                for (di, &d) in study.distances_mm.iter().enumerate() {
                    let location = tap_location(&layout, study.mic, d);
                    for k in 0..study.episodes_per_cell {
                        jobs.push((location, v, tap_seed(study, vi, di, k)));
                    }
                }
            }
            jobs.par_iter()
                .map(|&(loc, v, seed)| write_one(out_dir, &simulate_tap(&layout, loc, v, seed, &sim.tap)?))
                .collect::<Result<_>>()?
        }
    };
    write_artifact(&out_dir.join(SIM_CONFIG_FILE), sim.to_toml().as_bytes())?;
    let manifest = DatasetManifest {
        episodes: records,
        ..DatasetManifest::new()
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    log::info!("wrote {} episodes to {}", manifest.episodes.len(), out_dir.display());
    Ok(manifest)
}

/// The simulator config stored next to a manifest, or the defaults.
pub fn corpus_sim_config(manifest_path: &Path) -> Result<SimConfig> {
    let path = manifest_path.parent().unwrap_or(Path::new(".")).join(SIM_CONFIG_FILE);
    if !path.exists() {
        return Ok(SimConfig::default());
    }
    let text = crate::storage::read_artifact(&path)?;
    SimConfig::from_toml(&String::from_utf8_lossy(&text))
}
