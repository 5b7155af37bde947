use serde::{Deserialize, Serialize};

use super::ops::{log_sum_exp, softmax_inplace};
use crate::{Error, Result, Task};

/// Supervision for one window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Values(Vec<f64>),
}

impl Target {
    fn matches(&self, task: Task) -> bool {
        match self {
            Target::Class(c) => task == Task::Texture && *c < task.output_dim(),
            Target::Values(v) => task.is_regression() && v.len() == task.output_dim(),
        }
    }
}

/// Loss of one sample and its gradient with respect to the output, both
/// already divided by the batch normalization of the task.
pub fn sample_loss_grad(output: &[f64], target: &Target, batch: usize) -> Result<(f64, Vec<f64>)> {
    let b = batch as f64;
    match target {
        Target::Class(c) => {
            if *c >= output.len() {
                return Err(Error::ShapeMismatch(format!(
                    "class {c} out of range for {} logits",
                    output.len()
                )));
            }
            let loss = log_sum_exp(output) - output[*c];
            let mut g = output.to_vec();
            softmax_inplace(&mut g);
            g[*c] -= 1.0;
            Ok((loss / b, g.into_iter().map(|v| v / b).collect()))
        }
        Target::Values(t) => {
            if t.len() != output.len() {
                return Err(Error::ShapeMismatch(format!(
                    "target has {} values, output has {}",
                    t.len(),
                    output.len()
                )));
            }
            let n = b * t.len() as f64;
            let loss = output.iter().zip(t).map(|(o, y)| (o - y) * (o - y)).sum::<f64>() / n;
            let g = output.iter().zip(t).map(|(o, y)| 2.0 * (o - y) / n).collect();
            Ok((loss, g))
        }
    }
}

/// Mean cross-entropy (classification) or mean squared error (regression).
pub fn loss(outputs: &[Vec<f64>], targets: &[Target], task: Task) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Empty("no outputs".into()));
    }
    if outputs.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} outputs for {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (o, t) in outputs.iter().zip(targets) {
        if !t.matches(task) {
            return Err(Error::ShapeMismatch(format!("target {t:?} does not fit task {task}")));
        }
        total += sample_loss_grad(o, t, outputs.len())?.0;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_values() {
        let uniform = loss(&[vec![0.0; 4]], &[Target::Class(2)], Task::Texture).unwrap();
        assert!((uniform - 4f64.ln()).abs() < 1e-12);
        let confident = loss(&[vec![10.0, 0.0, 0.0, 0.0]], &[Target::Class(0)], Task::Texture).unwrap();
        let want = -(10f64.exp() / (10f64.exp() + 3.0)).ln();
        assert!((confident - want).abs() < 1e-15);
        assert!((confident - 1.36e-4).abs() < 1e-6);
    }

    #[test]
    fn mse_values() {
        let t = vec![Target::Values(vec![1.0, 2.0]), Target::Values(vec![0.0, 0.0])];
        let zero = loss(&[vec![1.0, 2.0], vec![0.0, 0.0]], &t, Task::Localize).unwrap();
        assert_eq!(zero, 0.0);
        let l = loss(&[vec![2.0, 2.0], vec![0.0, 2.0]], &t, Task::Localize).unwrap();
        assert!((l - 5.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(loss(&[], &[], Task::Texture), Err(Error::Empty(_))));
        assert!(loss(&[vec![0.0; 4]], &[Target::Values(vec![1.0])], Task::Texture).is_err());
    }
}
