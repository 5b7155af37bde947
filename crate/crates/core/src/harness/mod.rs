//! Experimental protocol: drag-level splits, training, evaluation metrics,
//! non-learned baselines and report emission.

mod baselines;
mod metrics;
mod report;
mod splits;
mod train;

use std::collections::HashSet;

pub use baselines::{snr_argmax, snr_baseline_localize, velocity_from_position_baseline};
pub use metrics::{
    binned_errors, position_error, velocity_bin, BinSummary, ConfusionMatrix, ErrorSummary,
    NUM_CLASSES,
};
pub use report::{
    confusion_svg, real_data_reference, reports_csv, EvalReport, ReferenceValue, TextureEval,
    VelocityEval,
};
pub use splits::{
    default_held_out_splits, make_held_out_velocity_splits, make_velocity_cv_splits, DragInfo,
    Fold, SplitPlan, SplitStrategy,
};
pub use train::{evaluate_loss, target_for, train, EpochStats, TrainConfig, TrainOutcome};

use crate::model::{predict, ModelConfig, ModelParams};
use crate::signal::{Highpass, WindowSample};
use crate::sim::SensorLayout;
use crate::{Error, Result, Task};

/// One entry per drag, in order of first appearance.
pub fn drag_infos(samples: &[WindowSample]) -> Vec<DragInfo> {
    let mut seen = HashSet::new();
    samples
        .iter()
        .filter(|s| seen.insert(s.drag_id.as_str()))
        .map(|s| DragInfo {
            drag_id: s.drag_id.clone(),
            velocity_mm_s: s.nominal_velocity_mm_s,
        })
        .collect()
}

/// Windows whose drag is listed in `ids`, in dataset order.
pub fn select<'a>(samples: &'a [WindowSample], ids: &[String]) -> Vec<&'a WindowSample> {
    let set: HashSet<&str> = ids.iter().map(|s| s.as_str()).collect();
    samples.iter().filter(|s| set.contains(s.drag_id.as_str())).collect()
}

fn outputs(params: &ModelParams, test: &[&WindowSample]) -> Result<Vec<Vec<f64>>> {
    if test.is_empty() {
        return Err(Error::Empty("test set is empty".into()));
    }
    let windows: Vec<&[f32]> = test.iter().map(|s| s.data.as_slice()).collect();
    predict(params, &windows)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn eval_texture(params: &ModelParams, test: &[&WindowSample]) -> Result<TextureEval> {
    let out = outputs(params, test)?;
    let pairs = out
        .iter()
        .zip(test)
        .map(|(o, s)| match target_for(s, Task::Texture)? {
            crate::model::Target::Class(c) => Ok((c, argmax(o))),
            crate::model::Target::Values(_) => unreachable!("texture targets are classes"),
        })
        .collect::<Result<Vec<_>>>()?;
    let confusion = ConfusionMatrix::from_pairs(pairs)?;
    Ok(TextureEval {
        accuracy: confusion.accuracy(),
        adjacent_error_share: confusion.adjacent_error_share(),
        confusion,
    })
}

/// Per-window Euclidean errors of the position head.
pub fn localization_errors(params: &ModelParams, test: &[&WindowSample]) -> Result<Vec<f64>> {
    let out = outputs(params, test)?;
    Ok(out.iter().zip(test).map(|(o, s)| position_error(o, &s.label_pos_mm)).collect())
}

pub fn snr_baseline_errors(test: &[&WindowSample], layout: &SensorLayout) -> Result<Vec<f64>> {
    test.iter()
        .map(|s| {
            let p = snr_baseline_localize(s, layout)?;
            Ok(position_error(&[p.x, p.y], &s.label_pos_mm))
        })
        .collect()
}

fn velocity_eval(test: &[&WindowSample], errors: &[f64]) -> Result<VelocityEval> {
    let nominal: Vec<f64> = test.iter().map(|s| s.nominal_velocity_mm_s).collect();
    Ok(VelocityEval {
        overall: ErrorSummary::from_errors(errors)?,
        bins: binned_errors(&nominal, errors)?,
    })
}

/// Per-window absolute errors of the velocity head.
pub fn velocity_errors(params: &ModelParams, test: &[&WindowSample]) -> Result<Vec<f64>> {
    let out = outputs(params, test)?;
    Ok(out.iter().zip(test).map(|(o, s)| (o[0] - s.label_vel_mm_s).abs()).collect())
}

pub fn eval_velocity(params: &ModelParams, test: &[&WindowSample]) -> Result<VelocityEval> {
    velocity_eval(test, &velocity_errors(params, test)?)
}

/// Velocity errors of the position-derivative baseline; windows must carry raw samples.
pub fn eval_position_derivative(
    position_model: &ModelParams,
    test: &[&WindowSample],
    filter: &Highpass,
) -> Result<VelocityEval> {
    use rayon::prelude::*;
    if test.is_empty() {
        return Err(Error::Empty("test set is empty".into()));
    }
    let errors: Vec<f64> = test
        .par_iter()
        .map(|s| {
            if s.raw.is_empty() {
                return Err(Error::InvalidArgument(
                    "position-derivative baseline needs raw window samples".into(),
                ));
            }
            let v = velocity_from_position_baseline(position_model, &s.raw, filter, s.sample_rate_hz)?;
            Ok((v - s.label_vel_mm_s).abs())
        })
        .collect::<Result<_>>()?;
    velocity_eval(test, &errors)
}

/// Trained model and evaluation of one fold.
#[derive(Clone, Debug)]
pub struct FoldRun {
    pub outcome: TrainOutcome,
    pub report: EvalReport,
}

/// Extra inputs some evaluations need.
#[derive(Clone, Copy, Debug, Default)]
pub struct EvalContext<'a> {
    pub layout: Option<&'a SensorLayout>,
    /// Position model for the velocity baseline.
    pub position_model: Option<&'a ModelParams>,
    pub filter: Option<&'a Highpass>,
}

/// Trains on the fold's train/val drags and evaluates on its test drags.
pub fn run_fold(
    samples: &[WindowSample],
    fold: &Fold,
    strategy: SplitStrategy,
    model: ModelConfig,
    train_cfg: &TrainConfig,
    ctx: EvalContext<'_>,
) -> Result<FoldRun> {
    fold.check_disjoint()?;
    let task = model.task;
    let window = model.window;
    let train_set = select(samples, &fold.train);
    let val_set = select(samples, &fold.val);
    let test_set = select(samples, &fold.test);
    log::info!(
        "{task} fold {}: {} train / {} val / {} test windows",
        fold.name,
        train_set.len(),
        val_set.len(),
        test_set.len()
    );
    let outcome = train(model, &train_set, &val_set, train_cfg)?;
    let report = evaluate(&outcome, fold, strategy, &test_set, window, ctx)?;
    Ok(FoldRun { outcome, report })
}

/// Builds the report of a trained model on a fold's test windows.
pub fn evaluate(
    outcome: &TrainOutcome,
    fold: &Fold,
    strategy: SplitStrategy,
    test_set: &[&WindowSample],
    window: usize,
    ctx: EvalContext<'_>,
) -> Result<EvalReport> {
    evaluate_params(&outcome.params, outcome.best_epoch, fold, strategy, test_set, window, ctx)
}

/// Like [`evaluate`], for parameters loaded from a checkpoint.
pub fn evaluate_params(
    params: &ModelParams,
    best_epoch: usize,
    fold: &Fold,
    strategy: SplitStrategy,
    test_set: &[&WindowSample],
    window: usize,
    ctx: EvalContext<'_>,
) -> Result<EvalReport> {
    let task = params.config.task;
    let mut report = EvalReport {
        task,
        fold: fold.name.clone(),
        strategy,
        held_out_velocity: fold.held_out_velocity,
        window,
        history_s: window as f64 / test_set.first().map_or(2000.0, |s| s.sample_rate_hz),
        test_windows: test_set.len(),
        best_epoch,
        texture: None,
        localization: None,
        snr_baseline: None,
        velocity: None,
        position_derivative_baseline: None,
        real_data_reference: real_data_reference(task),
    };
    match task {
        Task::Texture => report.texture = Some(eval_texture(params, test_set)?),
        Task::Localize => {
            report.localization = Some(ErrorSummary::from_errors(&localization_errors(params, test_set)?)?);
            if let Some(layout) = ctx.layout {
                report.snr_baseline = Some(ErrorSummary::from_errors(&snr_baseline_errors(test_set, layout)?)?);
            }
        }
        Task::Velocity => {
            report.velocity = Some(eval_velocity(params, test_set)?);
            if let (Some(pm), Some(f)) = (ctx.position_model, ctx.filter) {
                if 2 * pm.config.window == window {
                    report.position_derivative_baseline = Some(eval_position_derivative(pm, test_set, f)?);
                }
            }
        }
    }
    Ok(report)
}
