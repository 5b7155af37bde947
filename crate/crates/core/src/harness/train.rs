use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{loss_and_grad, predict, sample_loss_grad, AdamW, AdamWConfig, ModelConfig, ModelParams, Target};
use crate::signal::WindowSample;
use crate::{Error, Result, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Seeds parameter initialization and batch shuffling.
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            max_epochs: task.default_max_epochs(),
            batch_size: 64,
            optimizer: AdamWConfig::default(),
            seed: 42,
            patience: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss, rounded to f32.
    pub params: ModelParams,
    pub curves: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainOutcome {
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.curves {
            s.push_str(&format!("{},{:.9e},{:.9e}\n", e.epoch, e.train_loss, e.val_loss));
        }
        s
    }
}

/// Supervision target of a window for `task`.
pub fn target_for(sample: &WindowSample, task: Task) -> Result<Target> {
    Ok(match task {
        Task::Texture => Target::Class(
            sample
                .label_texture
                .ok_or_else(|| Error::InvalidArgument(format!("window from {} has no texture label", sample.drag_id)))?
                .index(),
        ),
        Task::Localize => Target::Values(sample.label_pos_mm.to_vec()),
        Task::Velocity => Target::Values(vec![sample.label_vel_mm_s]),
    })
}

/// Mean loss of `params` over `samples` without gradients.
pub fn evaluate_loss(params: &ModelParams, samples: &[&WindowSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to evaluate".into()));
    }
    let windows: Vec<&[f32]> = samples.iter().map(|s| s.data.as_slice()).collect();
    let outputs = predict(params, &windows)?;
    let mut total = 0.0;
    for (o, s) in outputs.iter().zip(samples) {
        total += sample_loss_grad(o, &target_for(s, params.config.task)?, samples.len())?.0;
    }
    Ok(total)
}

fn diverged(epoch: usize, step: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { layer } => Error::Diverged {
            epoch,
            step,
            detail: format!("non-finite values in {layer}"),
        },
        other => other,
    }
}

/// Trains a fresh model and keeps the parameters with the best validation loss.
pub fn train(
    model: ModelConfig,
    train_set: &[&WindowSample],
    val_set: &[&WindowSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument("batch size and epochs must be positive".into()));
    }
    let task = model.task;
    let mut params = ModelParams::init(model, cfg.seed)?;
    let targets: Vec<Target> = train_set.iter().map(|s| target_for(s, task)).collect::<Result<_>>()?;
    let selection: &[&WindowSample] = if val_set.is_empty() { train_set } else { val_set };
    let mut opt = AdamW::new(cfg.optimizer, params.len());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let windows: Vec<&[f32]> = idx.iter().map(|&i| train_set[i].data.as_slice()).collect();
            let t: Vec<Target> = idx.iter().map(|&i| targets[i].clone()).collect();
            let (loss, grads) = loss_and_grad(&params, &windows, &t).map_err(|e| diverged(epoch, step, e))?;
            opt.step(&mut params.values, &grads);
            if !params.values.iter().all(|v| v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    detail: "non-finite parameters after optimizer step".into(),
                });
            }
            sum += loss * idx.len() as f64;
        }
        let train_loss = sum / train_set.len() as f64;
        let val_loss = evaluate_loss(&params, selection).map_err(|e| diverged(epoch, 0, e))?;
        log::info!("{task} epoch {epoch}: train {train_loss:.5} val {val_loss:.5}");
        curves.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, epoch, params.values.clone()));
        }
        if let (Some(p), Some(b)) = (cfg.patience, best.as_ref()) {
            if epoch - b.1 >= p {
                log::info!("{task}: no validation improvement for {p} epochs, stopping");
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, values) = best.expect("at least one epoch");
    params.values = values;
    params.round_to_f32();
    Ok(TrainOutcome {
        params,
        curves,
        best_epoch,
        best_val_loss,
    })
}
