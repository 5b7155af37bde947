//! Dense building blocks with explicit backward passes.
//!
//! Matrices are row-major slices; `x` with `rows x cols` is indexed
//! `x[r * cols + c]`. Backward functions accumulate (`+=`) into parameter
//! gradients and return or overwrite input gradients.

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub const LN_EPS: f64 = 1e-5;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn gelu_inplace(x: &mut [f64]) {
    for v in x {
        *v = gelu(*v);
    }
}

/// `dx = dy * gelu'(pre)`.
pub fn gelu_backward(pre: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter().zip(dy).map(|(&p, &g)| g * gelu_grad(p)).collect()
}

/// `y = x W + b` for `x: rows x din`, `W: din x dout`.
pub fn linear(x: &[f64], w: &[f64], b: &[f64], rows: usize, din: usize, dout: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(rows * dout);
    for r in 0..rows {
        y.extend_from_slice(b);
        let yr = &mut y[r * dout..(r + 1) * dout];
        for (k, &xv) in x[r * din..(r + 1) * din].iter().enumerate() {
            let wk = &w[k * dout..(k + 1) * dout];
            for (o, &wv) in yr.iter_mut().zip(wk) {
                *o += xv * wv;
            }
        }
    }
    y
}

/// Backward of [`linear`]; returns `dx`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    rows: usize,
    din: usize,
    dout: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * din];
    for r in 0..rows {
        let dyr = &dy[r * dout..(r + 1) * dout];
        for (d, &g) in db.iter_mut().zip(dyr) {
            *d += g;
        }
        let xr = &x[r * din..(r + 1) * din];
        let dxr = &mut dx[r * din..(r + 1) * din];
        for k in 0..din {
            let wk = &w[k * dout..(k + 1) * dout];
            dxr[k] = wk.iter().zip(dyr).map(|(a, b)| a * b).sum();
            let dwk = &mut dw[k * dout..(k + 1) * dout];
            let xv = xr[k];
            for (d, &g) in dwk.iter_mut().zip(dyr) {
                *d += xv * g;
            }
        }
    }
    dx
}

/// Output length of a valid, strided convolution.
pub fn conv_out_len(n: usize, kernel: usize, stride: usize) -> Option<usize> {
    (n >= kernel && stride >= 1).then(|| (n - kernel) / stride + 1)
}

/// Geometry of a 1-D convolution over time-major input `n x cin`.
///
/// Weights are laid out `kernel x cin x cout`. `pad` zero rows are added
/// on both ends.
#[derive(Clone, Copy, Debug)]
pub struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    pub fn out_len(&self, n: usize) -> Option<usize> {
        conv_out_len(n + 2 * self.pad, self.kernel, self.stride)
    }

    /// Input row for output `t` and tap `k`, or `None` inside the padding.
    #[inline]
    fn src(&self, t: usize, k: usize, n: usize) -> Option<usize> {
        (t * self.stride + k)
            .checked_sub(self.pad)
            .filter(|&i| i < n)
    }

    pub fn forward(&self, x: &[f64], n: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
        let m = self.out_len(n).expect("input shorter than kernel");
        let (cin, cout) = (self.cin, self.cout);
        let mut y = Vec::with_capacity(m * cout);
        for t in 0..m {
            y.extend_from_slice(b);
            let yt = &mut y[t * cout..(t + 1) * cout];
            for k in 0..self.kernel {
                let Some(i) = self.src(t, k, n) else { continue };
                let xr = &x[i * cin..(i + 1) * cin];
                for (c, &xv) in xr.iter().enumerate() {
                    let wr = &w[(k * cin + c) * cout..(k * cin + c + 1) * cout];
                    for (o, &wv) in yt.iter_mut().zip(wr) {
                        *o += xv * wv;
                    }
                }
            }
        }
        y
    }

    /// Backward pass; returns `dx` (`n x cin`).
    pub fn backward(
        &self,
        x: &[f64],
        n: usize,
        w: &[f64],
        dy: &[f64],
        dw: &mut [f64],
        db: &mut [f64],
    ) -> Vec<f64> {
        let m = self.out_len(n).expect("input shorter than kernel");
        let (cin, cout) = (self.cin, self.cout);
        let mut dx = vec![0.0; n * cin];
        for t in 0..m {
            let dyt = &dy[t * cout..(t + 1) * cout];
            for (d, &g) in db.iter_mut().zip(dyt) {
                *d += g;
            }
            for k in 0..self.kernel {
                let Some(i) = self.src(t, k, n) else { continue };
                for c in 0..cin {
                    let off = (k * cin + c) * cout;
                    let wr = &w[off..off + cout];
                    dx[i * cin + c] += wr.iter().zip(dyt).map(|(a, b)| a * b).sum::<f64>();
                    let xv = x[i * cin + c];
                    for (d, &g) in dw[off..off + cout].iter_mut().zip(dyt) {
                        *d += xv * g;
                    }
                }
            }
        }
        dx
    }
}

/// Per-row layer normalization; returns `(y, xhat, inv_std)`.
pub fn layer_norm(
    x: &[f64],
    rows: usize,
    dim: usize,
    gamma: &[f64],
    beta: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut y = vec![0.0; rows * dim];
    let mut xhat = vec![0.0; rows * dim];
    let mut inv = vec![0.0; rows];
    for r in 0..rows {
        let xr = &x[r * dim..(r + 1) * dim];
        let mean = xr.iter().sum::<f64>() / dim as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv[r] = is;
        for j in 0..dim {
            let h = (xr[j] - mean) * is;
            xhat[r * dim + j] = h;
            y[r * dim + j] = gamma[j] * h + beta[j];
        }
    }
    (y, xhat, inv)
}

pub fn layer_norm_backward(
    xhat: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    dy: &[f64],
    dim: usize,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Vec<f64> {
    let rows = inv_std.len();
    let mut dx = vec![0.0; rows * dim];
    let mut g = vec![0.0; dim];
    for r in 0..rows {
        let h = &xhat[r * dim..(r + 1) * dim];
        let d = &dy[r * dim..(r + 1) * dim];
        for j in 0..dim {
            dgamma[j] += d[j] * h[j];
            dbeta[j] += d[j];
            g[j] = d[j] * gamma[j];
        }
        let mg = g.iter().sum::<f64>() / dim as f64;
        let mgh = g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / dim as f64;
        for j in 0..dim {
            dx[r * dim + j] = inv_std[r] * (g[j] - mg - h[j] * mgh);
        }
    }
    dx
}

/// Numerically stable softmax in place.
pub fn softmax_inplace(x: &mut [f64]) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}
