use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sim::{DRAG_VELOCITIES, HELD_OUT_VELOCITIES};
use crate::{Error, Result, Task};

/// A drag segment and the nominal velocity it was recorded at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DragInfo {
    pub drag_id: String,
    pub velocity_mm_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    HeldOutVelocity,
    VelocityCv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub held_out_velocity: Option<f64>,
}

impl Fold {
    /// Checks that no drag appears in more than one part.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id) {
                return Err(Error::InvalidArgument(format!(
                    "drag {id} appears twice in fold {}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub task: Task,
    pub strategy: SplitStrategy,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

fn same_velocity(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Splits `ids` into train and validation parts, `val_fraction` of them
/// (at least one when possible) going to validation.
fn train_val(mut ids: Vec<String>, val_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    ids.shuffle(rng);
    let mut n_val = (ids.len() as f64 * val_fraction).round() as usize;
    if n_val == 0 && ids.len() > 1 && val_fraction > 0.0 {
        n_val = 1;
    }
    let train = ids.split_off(n_val);
    (train, ids)
}

/// One fold per held-out velocity; the remaining drags on the standard
/// velocity grid are split into train and validation by drag.
///
/// Drags at off-grid velocities are left out entirely.
pub fn make_held_out_velocity_splits(
    task: Task,
    drags: &[DragInfo],
    velocities: &[f64],
    val_fraction: f64,
    seed: u64,
) -> Result<SplitPlan> {
    for &v in velocities {
        if !drags.iter().any(|d| same_velocity(d.velocity_mm_s, v)) {
            return Err(Error::MissingVelocity(v));
        }
    }
    let mut folds = Vec::with_capacity(velocities.len());
    for (k, &held) in velocities.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut test = Vec::new();
        let mut rest = Vec::new();
        for d in drags {
            if same_velocity(d.velocity_mm_s, held) {
                test.push(d.drag_id.clone());
            } else if DRAG_VELOCITIES.iter().any(|&v| same_velocity(d.velocity_mm_s, v)) {
                rest.push(d.drag_id.clone());
            }
        }
        let (train, val) = train_val(rest, val_fraction, &mut rng);
        folds.push(Fold {
            name: format!("heldout-{held}"),
            train,
            val,
            test,
            held_out_velocity: Some(held),
        });
    }
    Ok(SplitPlan {
        task,
        strategy: SplitStrategy::HeldOutVelocity,
        seed,
        folds,
    })
}

/// The five-fold plan over the standard velocity grid.
pub fn default_held_out_splits(task: Task, drags: &[DragInfo], seed: u64) -> Result<SplitPlan> {
    make_held_out_velocity_splits(task, drags, &HELD_OUT_VELOCITIES, 0.1, seed)
}

/// Stratified `rounds`-fold cross-validation: drags of each velocity are
/// shuffled and dealt round-robin into the folds' test sets.
pub fn make_velocity_cv_splits(
    task: Task,
    drags: &[DragInfo],
    rounds: usize,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitPlan> {
    if rounds < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least 2 rounds".into()));
    }
    let mut by_velocity: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    for d in drags {
        by_velocity
            .entry((d.velocity_mm_s * 1000.0).round() as i64)
            .or_default()
            .push(d.drag_id.clone());
    }
    if by_velocity.is_empty() {
        return Err(Error::DatasetTooSmall("no drags to split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tests: Vec<Vec<String>> = vec![Vec::new(); rounds];
    for (v, ids) in by_velocity.iter_mut() {
        if ids.len() < rounds {
            return Err(Error::DatasetTooSmall(format!(
                "{} drags at {} mm/s, need at least {rounds}",
                ids.len(),
                *v as f64 / 1000.0
            )));
        }
        ids.shuffle(&mut rng);
        for (i, id) in ids.iter().enumerate() {
            tests[i % rounds].push(id.clone());
        }
    }
    let folds = tests
        .into_iter()
        .enumerate()
        .map(|(k, test)| {
            let held: HashSet<&String> = test.iter().collect();
            let rest: Vec<String> = drags
                .iter()
                .map(|d| &d.drag_id)
                .filter(|id| !held.contains(id))
                .cloned()
                .collect();
            let mut frng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 + k as u64));
            let (train, val) = train_val(rest, val_fraction, &mut frng);
            Fold {
                name: format!("cv-{k}"),
                train,
                val,
                test,
                held_out_velocity: None,
            }
        })
        .collect();
    Ok(SplitPlan {
        task,
        strategy: SplitStrategy::VelocityCv,
        seed,
        folds,
    })
}
