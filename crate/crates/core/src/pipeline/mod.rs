//! End-to-end commands over on-disk artifacts: corpus generation,
//! preprocessing, training, evaluation, contact-detection studies and
//! report aggregation. The CLI is a thin wrapper around these.

mod corpus;
mod run;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

pub use corpus::{
    corpus_sim_config, drag_seed, grid_windows, simulate_corpus, CorpusSpec, DragGrid, DragJob,
    DESK_DRAGS_PER_CELL, FULL_DRAGS_PER_CELL, MANIFEST_FILE, SIM_CONFIG_FILE,
};
pub use run::{
    checkpoint_path, eval_run, train_run, PooledVelocity, RunConfig, RunInputs, RunSummary,
    RUN_CONFIG_FILE, VELOCITY_POOLED_FILE,
};

use crate::detect::{study_from_episodes, ResponseTable, StudyConfig};
use crate::harness::EvalReport;
use crate::signal::{extract_windows, Highpass, WindowConfig};
use crate::sim::{build_layout, EpisodeKind, DRAG_VELOCITIES};
use crate::storage::{load_record, read_artifact, write_artifact, DatasetManifest, WindowDataset};
use crate::{Error, Result};

/// Runs the signal pipeline over every drag listed in a manifest.
///
/// Episodes are loaded (and hash-checked) one at a time per worker, so the
/// whole corpus never sits in memory. An empty manifest yields an empty
/// dataset and a warning.
pub fn preprocess(manifest_path: &Path, window: &WindowConfig) -> Result<WindowDataset> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let drags: Vec<_> = manifest.episodes.iter().filter(|r| r.kind == EpisodeKind::Drag).collect();
    if drags.is_empty() {
        log::warn!("{}: no drag episodes, writing an empty dataset", manifest_path.display());
    }
    let per_episode: Vec<Vec<_>> = drags
        .par_iter()
        .map(|rec| {
            let ep = load_record(manifest_path, rec)?;
            extract_windows(&ep, window, &Highpass::preprocessing_at(ep.sample_rate_hz)?)
        })
        .collect::<Result<_>>()?;
    Ok(WindowDataset {
        config: window.clone(),
        samples: per_episode.into_iter().flatten().collect(),
    })
}

/// Window counts per texture (or `none`) and per nominal velocity.
pub fn dataset_summary(ds: &WindowDataset) -> String {
    let mut by_texture: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_velocity: BTreeMap<i64, usize> = BTreeMap::new();
    for s in &ds.samples {
        let t = s.label_texture.map_or("none".to_string(), |t| t.to_string());
        *by_texture.entry(t).or_default() += 1;
        *by_velocity.entry((s.nominal_velocity_mm_s * 1000.0).round() as i64).or_default() += 1;
    }
    let drags = crate::harness::drag_infos(&ds.samples).len();
    let mut out = format!(
        "{} windows of {} samples from {drags} drags\n",
        ds.samples.len(),
        ds.config.window
    );
    for (t, n) in by_texture {
        out.push_str(&format!("  texture {t}: {n}\n"));
    }
    for (v, n) in by_velocity {
        out.push_str(&format!("  {} mm/s: {n}\n", v as f64 / 1000.0));
    }
    out
}

/// Response-time study over the tap episodes of a stored corpus.
pub fn detect_from_manifest(manifest_path: &Path, cfg: &StudyConfig) -> Result<ResponseTable> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let sim = corpus_sim_config(manifest_path)?;
    let layout = build_layout(&sim.layout)?;
    let taps: Vec<_> = manifest.episodes.iter().filter(|r| r.kind == EpisodeKind::Tap).collect();
    if taps.is_empty() {
        return Err(Error::Empty(format!("no tap episodes in {}", manifest_path.display())));
    }
    let episodes = taps
        .par_iter()
        .map(|r| load_record(manifest_path, r))
        .collect::<Result<Vec<_>>>()?;
    study_from_episodes(&episodes, &layout, sim.tap.pre_contact_s, cfg)
}

/// Writes the study table as text, CSV and JSON, plus the config used.
pub fn write_study(dir: &Path, cfg: &StudyConfig, table: &ResponseTable) -> Result<()> {
    run::write_json(&dir.join("study_config.json"), cfg)?;
    run::write_json(&dir.join("response_times.json"), table)?;
    write_artifact(&dir.join("response_times.csv"), table.to_csv().as_bytes())?;
    write_artifact(&dir.join("response_times.txt"), table.to_text().as_bytes())
}

/// Velocity error grid: one row per history length, one column per grid
/// velocity, cells `mean/median` in mm/s or `-` for empty bins.
pub fn velocity_table_csv(rows: &[PooledVelocity]) -> String {
    let mut s = String::from("history_s");
    for v in DRAG_VELOCITIES {
        s.push_str(&format!(",{v}"));
    }
    s.push('\n');
    let mut rows: Vec<&PooledVelocity> = rows.iter().collect();
    rows.sort_by(|a, b| a.history_s.total_cmp(&b.history_s));
    for r in rows {
        s.push_str(&format!("{}", r.history_s));
        for v in DRAG_VELOCITIES {
            match r.bins.iter().find(|b| b.bin_mm_s == v) {
                Some(b) => s.push_str(&format!(",{:.2}/{:.2}", b.errors.mean, b.errors.median)),
                None => s.push_str(",-"),
            }
        }
        s.push('\n');
    }
    s
}

/// Everything `report` found in a set of run directories.
#[derive(Clone, Debug, Default)]
pub struct Collected {
    pub reports: Vec<EvalReport>,
    pub velocity: Vec<PooledVelocity>,
    pub studies: Vec<ResponseTable>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_artifact(path)?).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Gathers fold reports, pooled velocity errors and study tables from run
/// directories, in the order given.
pub fn collect_runs(dirs: &[&Path]) -> Result<Collected> {
    let mut c = Collected::default();
    for dir in dirs {
        let mut found = false;
        let reports = dir.join("reports.json");
        if reports.exists() {
            c.reports.extend(read_json::<Vec<EvalReport>>(&reports)?);
            found = true;
        }
        let pooled = dir.join(VELOCITY_POOLED_FILE);
        if pooled.exists() {
            c.velocity.push(read_json(&pooled)?);
        }
        let study = dir.join("response_times.json");
        if study.exists() {
            c.studies.push(read_json(&study)?);
            found = true;
        }
        if !found {
            return Err(Error::InvalidArgument(format!("{} holds no run outputs", dir.display())));
        }
    }
    Ok(c)
}

/// Writes the combined summary of collected runs into `out_dir`.
pub fn write_report(out_dir: &Path, c: &Collected) -> Result<()> {
    if !c.reports.is_empty() {
        write_artifact(&out_dir.join("summary.csv"), crate::harness::reports_csv(&c.reports).as_bytes())?;
    }
    if !c.velocity.is_empty() {
        write_artifact(&out_dir.join("velocity_table.csv"), velocity_table_csv(&c.velocity).as_bytes())?;
    }
    for (i, t) in c.studies.iter().enumerate() {
        write_artifact(&out_dir.join(format!("response_times_{i}.csv")), t.to_csv().as_bytes())?;
    }
    Ok(())
}

/// Velocity runs at several history lengths from one corpus, each in its own
/// `h<seconds>` subdirectory of `base.output_dir`, plus the combined grid.
pub fn velocity_history_runs(
    manifest_path: &Path,
    base: &RunConfig,
    histories_s: &[f64],
    inputs: RunInputs<'_>,
) -> Result<Vec<RunSummary>> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let fs = manifest
        .episodes
        .iter()
        .find(|r| r.kind == EpisodeKind::Drag)
        .map(|r| r.sample_rate_hz)
        .ok_or_else(|| Error::Empty(format!("no drag episodes in {}", manifest_path.display())))?;
    let mut out = Vec::with_capacity(histories_s.len());
    for &h in histories_s {
        let window = (h * fs).round() as usize;
        let mut cfg = base.clone().with_window(window);
        cfg.output_dir = base.output_dir.join(format!("h{h}"));
        let wcfg = WindowConfig {
            keep_raw: true,
            ..WindowConfig::with_window(window)
        };
        let ds = preprocess(manifest_path, &wcfg)?;
        out.push(train_run(&ds, &cfg, inputs)?);
    }
    let pooled: Vec<PooledVelocity> = out.iter().filter_map(|s| s.velocity.clone()).collect();
    write_artifact(&base.output_dir.join("velocity_table.csv"), velocity_table_csv(&pooled).as_bytes())?;
    Ok(out)
}
