//! Strided-convolution + transformer window encoder with texture, position
//! and velocity heads, trained by hand-written reverse-mode gradients.

mod config;
mod loss;
mod network;
pub mod ops;
mod optim;
mod params;

use rayon::prelude::*;

pub use config::ModelConfig;
pub use loss::{loss, sample_loss_grad, Target};
pub use network::{ForwardCache, LayerCache};
pub use optim::{AdamW, AdamWConfig};
pub use params::{ModelParams, ParamLayout, TensorSpec};

use crate::{Error, Result};

/// Samples per work unit; fixed so the reduction order never depends on
/// the thread count.
const CHUNK: usize = 8;

/// Mean loss and its gradient over a batch, for the configured task.
pub fn loss_and_grad<T>(params: &ModelParams, windows: &[&[T]], targets: &[Target]) -> Result<(f64, Vec<f64>)>
where
    T: Copy + Into<f64> + Sync,
{
    if windows.is_empty() {
        return Err(Error::Empty("no windows in batch".into()));
    }
    if windows.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} windows for {} targets",
            windows.len(),
            targets.len()
        )));
    }
    let b = windows.len();
    let parts: Vec<(f64, Vec<f64>)> = windows
        .par_chunks(CHUNK)
        .zip(targets.par_chunks(CHUNK))
        .map(|(ws, ts)| {
            let mut grads = vec![0.0; params.len()];
            let mut total = 0.0;
            for (w, t) in ws.iter().zip(ts) {
                let (out, cache) = params.forward_cached(w)?;
                let (l, dout) = sample_loss_grad(&out, t, b)?;
                params.backward(&cache, &dout, &mut grads)?;
                total += l;
            }
            Ok((total, grads))
        })
        .collect::<Result<_>>()?;
    let mut grads = vec![0.0; params.len()];
    let mut total = 0.0;
    for (l, g) in parts {
        total += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite {
            layer: "loss".into(),
        });
    }
    Ok((total, grads))
}

/// Outputs for many windows, in input order.
pub fn predict<T>(params: &ModelParams, windows: &[&[T]]) -> Result<Vec<Vec<f64>>>
where
    T: Copy + Into<f64> + Sync,
{
    windows.par_iter().map(|w| params.forward(w)).collect()
}
