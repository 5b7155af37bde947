use serde::{Deserialize, Serialize};

use super::ops::{conv_out_len, Conv};
use crate::sim::NUM_MICS;
use crate::{Error, Result, Task};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    /// Input window length in samples.
    pub window: usize,
    pub in_channels: usize,
    /// Channels of every encoder convolution.
    pub conv_channels: usize,
    pub kernels: [usize; 3],
    pub strides: [usize; 3],
    pub residual_kernel: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub layers: usize,
    /// Learned positional embeddings added after the token projection.
    pub positional: bool,
    /// Multiplier applied to the raw ADC-count input.
    pub input_scale: f64,
    /// Regression outputs are `offset + scale * head`.
    pub pos_offset_mm: f64,
    pub pos_scale_mm: f64,
    pub vel_offset_mm_s: f64,
    pub vel_scale_mm_s: f64,
}

impl ModelConfig {
    pub fn for_task(task: Task) -> Self {
        Self::with_window(task, task.default_window())
    }

    pub fn with_window(task: Task, window: usize) -> Self {
        Self {
            task,
            window,
            in_channels: NUM_MICS,
            conv_channels: 10,
            kernels: [7, 5, 5],
            strides: [4, 2, 2],
            residual_kernel: 3,
            d_model: 32,
            heads: 2,
            ff_dim: 64,
            layers: 2,
            positional: true,
            input_scale: 0.02,
            pos_offset_mm: 12.0,
            pos_scale_mm: 6.0,
            vel_offset_mm_s: 40.0,
            vel_scale_mm_s: 15.0,
        }
    }

    /// Small configuration used for finite-difference gradient checks.
    pub fn tiny(task: Task) -> Self {
        Self {
            window: 40,
            conv_channels: 4,
            kernels: [5, 3, 3],
            strides: [2, 2, 2],
            d_model: 8,
            heads: 2,
            ff_dim: 16,
            input_scale: 0.05,
            ..Self::with_window(task, 40)
        }
    }

    pub fn convs(&self) -> [Conv; 3] {
        let c = self.conv_channels;
        [
            Conv { cin: self.in_channels, cout: c, kernel: self.kernels[0], stride: self.strides[0], pad: 0 },
            Conv { cin: c, cout: c, kernel: self.kernels[1], stride: self.strides[1], pad: 0 },
            Conv { cin: c, cout: c, kernel: self.kernels[2], stride: self.strides[2], pad: 0 },
        ]
    }

    pub fn residual_conv(&self) -> Conv {
        Conv {
            cin: self.conv_channels,
            cout: self.conv_channels,
            kernel: self.residual_kernel,
            stride: 1,
            pad: self.residual_kernel / 2,
        }
    }

    /// Lengths after each encoder convolution; `None` if the window is too short.
    pub fn stage_lengths(&self) -> Option<[usize; 3]> {
        let a = conv_out_len(self.window, self.kernels[0], self.strides[0])?;
        let b = conv_out_len(a, self.kernels[1], self.strides[1])?;
        let c = conv_out_len(b, self.kernels[2], self.strides[2])?;
        Some([a, b, c])
    }

    /// Number of latent tokens.
    pub fn tokens(&self) -> Option<usize> {
        self.stage_lengths().map(|s| s[2])
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.tokens().is_none() {
            return bad(format!("window of {} samples is too short for the encoder", self.window));
        }
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return bad(format!("d_model {} is not divisible by {} heads", self.d_model, self.heads));
        }
        if self.residual_kernel.is_multiple_of(2) {
            return bad("residual kernel must be odd for same padding".into());
        }
        if self.in_channels == 0 || self.conv_channels == 0 || self.ff_dim == 0 {
            return bad("layer widths must be positive".into());
        }
        if !(self.input_scale.is_finite() && self.pos_scale_mm > 0.0 && self.vel_scale_mm_s > 0.0) {
            return bad("input and target scales must be positive and finite".into());
        }
        Ok(())
    }
}
