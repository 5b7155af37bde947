use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::{
    binned_errors, confusion_svg, drag_infos, evaluate_params, make_held_out_velocity_splits,
    make_velocity_cv_splits, reports_csv, run_fold, select, velocity_errors, BinSummary,
    EvalContext, EvalReport, Fold, SplitPlan, SplitStrategy, TrainConfig,
};
use crate::model::{ModelConfig, ModelParams};
use crate::signal::Highpass;
use crate::sim::{SensorLayout, HELD_OUT_VELOCITIES};
use crate::storage::{load_checkpoint, read_artifact, save_checkpoint, write_artifact, WindowDataset};
use crate::{Error, Result, Task};

pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const VELOCITY_POOLED_FILE: &str = "velocity_pooled.json";

/// Everything needed to reproduce a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub window: usize,
    pub split: SplitStrategy,
    /// Folds of velocity cross-validation.
    pub cv_rounds: usize,
    pub val_fraction: f64,
    pub split_seed: u64,
    /// Fold names to run; empty runs every fold of the plan.
    pub folds: Vec<String>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Task defaults: held-out-velocity folds for texture and localization,
    /// ten-fold velocity cross-validation for velocity.
    pub fn for_task(task: Task, output_dir: impl Into<PathBuf>) -> Self {
        let train = TrainConfig::for_task(task);
        Self {
            task,
            window: task.default_window(),
            split: match task {
                Task::Velocity => SplitStrategy::VelocityCv,
                _ => SplitStrategy::HeldOutVelocity,
            },
            cv_rounds: 10,
            val_fraction: 0.1,
            split_seed: train.seed,
            folds: Vec::new(),
            model: ModelConfig::for_task(task),
            train,
            output_dir: output_dir.into(),
        }
    }

    /// Overrides the window length, keeping the model in step.
    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self.model.window = window;
        self
    }

    pub fn history_s(&self, sample_rate_hz: f64) -> f64 {
        self.window as f64 / sample_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if self.model.task != self.task || self.model.window != self.window {
            return Err(Error::InvalidArgument(format!(
                "model is configured for {} with {} samples, run for {} with {}",
                self.model.task, self.model.window, self.task, self.window
            )));
        }
        self.model.validate()
    }

    pub fn split_plan(&self, dataset: &WindowDataset) -> Result<SplitPlan> {
        let drags = drag_infos(&dataset.samples);
        let mut plan = match self.split {
            SplitStrategy::HeldOutVelocity => make_held_out_velocity_splits(
                self.task,
                &drags,
                &HELD_OUT_VELOCITIES,
                self.val_fraction,
                self.split_seed,
            )?,
            SplitStrategy::VelocityCv => make_velocity_cv_splits(
                self.task,
                &drags,
                self.cv_rounds,
                self.val_fraction,
                self.split_seed,
            )?,
        };
        if !self.folds.is_empty() {
            for name in &self.folds {
                if !plan.folds.iter().any(|f| &f.name == name) {
                    return Err(Error::InvalidArgument(format!("no fold named `{name}` in the plan")));
                }
            }
            plan.folds.retain(|f| self.folds.contains(&f.name));
        }
        Ok(plan)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(RUN_CONFIG_FILE), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(RUN_CONFIG_FILE);
        serde_json::from_slice(&read_artifact(&path)?).map_err(|e| Error::Corrupt {
            path,
            reason: e.to_string(),
        })
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    write_artifact(path, json.as_bytes())
}

pub fn checkpoint_path(run_dir: &Path, fold: &str) -> PathBuf {
    run_dir.join("checkpoints").join(format!("{fold}.mtck"))
}

/// Velocity errors pooled over every fold of a run, binned by nominal velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PooledVelocity {
    pub history_s: f64,
    pub window: usize,
    pub bins: Vec<BinSummary>,
}

/// Outputs of a training run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub plan: SplitPlan,
    pub reports: Vec<EvalReport>,
    pub velocity: Option<PooledVelocity>,
}

/// Inputs shared by training and evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RunInputs<'a> {
    pub layout: &'a SensorLayout,
    /// Run directory whose per-fold localization checkpoints feed the
    /// velocity baseline.
    pub position_run: Option<&'a Path>,
}

fn position_model(inputs: &RunInputs<'_>, fold: &Fold) -> Result<Option<ModelParams>> {
    match inputs.position_run {
        Some(dir) => {
            let p = load_checkpoint(&checkpoint_path(dir, &fold.name))?;
            if p.config.task != Task::Localize {
                return Err(Error::InvalidArgument(format!(
                    "position checkpoint for fold {} was trained for {}",
                    fold.name, p.config.task
                )));
            }
            Ok(Some(p))
        }
        None => Ok(None),
    }
}

fn write_fold_artifacts(dir: &Path, report: &EvalReport) -> Result<()> {
    write_json(&dir.join("reports").join(format!("{}.json", report.fold)), report)?;
    if let Some(t) = &report.texture {
        let title = format!("{} (accuracy {:.1}%)", report.fold, 100.0 * t.accuracy);
        write_artifact(
            &dir.join("confusion").join(format!("{}.svg", report.fold)),
            confusion_svg(&t.confusion, &title).as_bytes(),
        )?;
    }
    if let Some(csv) = report.velocity_bins_csv() {
        write_artifact(&dir.join("velocity_bins").join(format!("{}.csv", report.fold)), csv.as_bytes())?;
    }
    Ok(())
}

fn write_run_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    write_json(&dir.join("split_plan.json"), &summary.plan)?;
    write_json(&dir.join("reports.json"), &summary.reports)?;
    write_artifact(&dir.join("reports.csv"), reports_csv(&summary.reports).as_bytes())?;
    if let Some(v) = &summary.velocity {
        write_json(&dir.join(VELOCITY_POOLED_FILE), v)?;
        write_artifact(&dir.join("velocity_table.csv"), super::velocity_table_csv(std::slice::from_ref(v)).as_bytes())?;
    }
    Ok(())
}

fn check_dataset(cfg: &RunConfig, dataset: &WindowDataset) -> Result<f64> {
    cfg.validate()?;
    if dataset.config.window != cfg.window {
        return Err(Error::InvalidArgument(format!(
            "dataset windows have {} samples but the run expects {}",
            dataset.config.window, cfg.window
        )));
    }
    let first = dataset
        .samples
        .first()
        .ok_or_else(|| Error::Empty("dataset has no windows".into()))?;
    if cfg.task == Task::Texture && first.label_texture.is_none() {
        return Err(Error::InvalidArgument("dataset windows carry no texture labels".into()));
    }
    Ok(first.sample_rate_hz)
}

/// Trains and evaluates every selected fold, writing checkpoints, curves
/// and reports under `cfg.output_dir`.
pub fn train_run(dataset: &WindowDataset, cfg: &RunConfig, inputs: RunInputs<'_>) -> Result<RunSummary> {
    let fs = check_dataset(cfg, dataset)?;
    let plan = cfg.split_plan(dataset)?;
    let dir = &cfg.output_dir;
    cfg.write(dir)?;
    let filter = Highpass::preprocessing_at(fs)?;
    let mut reports = Vec::with_capacity(plan.folds.len());
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for fold in &plan.folds {
        let pos = position_model(&inputs, fold)?;
        let ctx = EvalContext {
            layout: Some(inputs.layout),
            position_model: pos.as_ref(),
            filter: Some(&filter),
        };
        let run = run_fold(&dataset.samples, fold, plan.strategy, cfg.model.clone(), &cfg.train, ctx)?;
        save_checkpoint(&checkpoint_path(dir, &fold.name), &run.outcome.params)?;
        write_artifact(
            &dir.join("curves").join(format!("{}.csv", fold.name)),
            run.outcome.curves_csv().as_bytes(),
        )?;
        write_fold_artifacts(dir, &run.report)?;
        if cfg.task == Task::Velocity {
            let test = select(&dataset.samples, &fold.test);
            let errors = velocity_errors(&run.outcome.params, &test)?;
            pooled.extend(test.iter().map(|s| s.nominal_velocity_mm_s).zip(errors));
        }
        log::info!("fold {} done: {}", fold.name, run.report.csv_row());
        reports.push(run.report);
    }
    let velocity = pooled_velocity(cfg, fs, &pooled)?;
    let summary = RunSummary { plan, reports, velocity };
    write_run_summary(dir, &summary)?;
    Ok(summary)
}

fn pooled_velocity(cfg: &RunConfig, fs: f64, pooled: &[(f64, f64)]) -> Result<Option<PooledVelocity>> {
    if pooled.is_empty() {
        return Ok(None);
    }
    let (v, e): (Vec<f64>, Vec<f64>) = pooled.iter().copied().unzip();
    Ok(Some(PooledVelocity {
        history_s: cfg.history_s(fs),
        window: cfg.window,
        bins: binned_errors(&v, &e)?,
    }))
}

/// Re-evaluates the checkpoints of an existing run on `dataset`, writing
/// reports under `out_dir`.
pub fn eval_run(
    run_dir: &Path,
    dataset: &WindowDataset,
    out_dir: &Path,
    inputs: RunInputs<'_>,
) -> Result<RunSummary> {
    let cfg = RunConfig::read(run_dir)?;
    let fs = check_dataset(&cfg, dataset)?;
    let plan = cfg.split_plan(dataset)?;
    let filter = Highpass::preprocessing_at(fs)?;
    let mut reports = Vec::with_capacity(plan.folds.len());
    let mut pooled = Vec::new();
    for fold in &plan.folds {
        let params = load_checkpoint(&checkpoint_path(run_dir, &fold.name))?;
        if params.config != cfg.model {
            return Err(Error::InvalidArgument(format!(
                "checkpoint for fold {} does not match the run's model config",
                fold.name
            )));
        }
        let pos = position_model(&inputs, fold)?;
        let ctx = EvalContext {
            layout: Some(inputs.layout),
            position_model: pos.as_ref(),
            filter: Some(&filter),
        };
        let test = select(&dataset.samples, &fold.test);
        let best_epoch = best_epoch_from_curves(run_dir, &fold.name)?;
        let report = evaluate_params(&params, best_epoch, fold, plan.strategy, &test, cfg.window, ctx)?;
        if cfg.task == Task::Velocity {
            let errors = velocity_errors(&params, &test)?;
            pooled.extend(test.iter().map(|s| s.nominal_velocity_mm_s).zip(errors));
        }
        write_fold_artifacts(out_dir, &report)?;
        reports.push(report);
    }
    let velocity = pooled_velocity(&cfg, fs, &pooled)?;
    let summary = RunSummary { plan, reports, velocity };
    write_run_summary(out_dir, &summary)?;
    Ok(summary)
}

/// Epoch with the lowest validation loss in a run's curve file; 0 if absent.
fn best_epoch_from_curves(run_dir: &Path, fold: &str) -> Result<usize> {
    let path = run_dir.join("curves").join(format!("{fold}.csv"));
    if !path.exists() {
        return Ok(0);
    }
    let text = String::from_utf8_lossy(&read_artifact(&path)?).into_owned();
    let mut best: Option<(f64, usize)> = None;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (Some(e), Some(v)) = (cols.first(), cols.get(2)) else { continue };
        let (Ok(e), Ok(v)) = (e.parse::<usize>(), v.parse::<f64>()) else { continue };
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, e));
        }
    }
    Ok(best.map_or(0, |(_, e)| e))
}
