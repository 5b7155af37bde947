//! Forward and reverse-mode passes of the window encoder.
//!
//! Pipeline per window: three strided valid convolutions (GELU between),
//! a same-padded residual convolution, a linear projection to `d_model`
//! plus positional embeddings, pre-norm transformer layers, a final layer
//! norm, attention pooling and one of three output heads.

use super::ops::{
    all_finite, gelu_backward, gelu_inplace, layer_norm, layer_norm_backward, linear,
    linear_backward, softmax_inplace,
};
use super::params::{Dense, LayerOffsets, ModelParams, Norm};
use crate::{Error, Result, Task};

fn check(layer: &str, x: &[f64]) -> Result<()> {
    if all_finite(x) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: layer.to_string(),
        })
    }
}

fn slice(values: &[f64], off: usize, len: usize) -> &[f64] {
    &values[off..off + len]
}

#[derive(Clone, Debug)]
pub struct LayerCache {
    ln1_y: Vec<f64>,
    ln1_xhat: Vec<f64>,
    ln1_inv: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Row-stochastic attention weights, `heads x m x m`.
    attn: Vec<f64>,
    ctx: Vec<f64>,
    ln2_y: Vec<f64>,
    ln2_xhat: Vec<f64>,
    ln2_inv: Vec<f64>,
    ff_pre: Vec<f64>,
    ff_act: Vec<f64>,
}

impl LayerCache {
    /// Attention weights of one head, `m x m` row-major.
    pub fn attention(&self, head: usize, m: usize) -> &[f64] {
        &self.attn[head * m * m..(head + 1) * m * m]
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    task: Task,
    n: usize,
    m: usize,
    /// Inputs of the three encoder convolutions.
    conv_in: [Vec<f64>; 3],
    /// Pre-activations of the first two convolutions.
    conv_pre: [Vec<f64>; 2],
    latent: Vec<f64>,
    res_pre: Vec<f64>,
    enriched: Vec<f64>,
    pub layers: Vec<LayerCache>,
    final_xhat: Vec<f64>,
    final_inv: Vec<f64>,
    encoded: Vec<f64>,
    /// Attention-pooling weights over tokens.
    pub pool_weights: Vec<f64>,
    pooled: Vec<f64>,
    /// Raw head output before the regression affine map.
    pub head_raw: Vec<f64>,
}

impl ForwardCache {
    pub fn tokens(&self) -> usize {
        self.m
    }

    pub fn latent(&self) -> &[f64] {
        &self.latent
    }

    pub fn encoded(&self) -> &[f64] {
        &self.encoded
    }

    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }
}

impl ModelParams {
    fn dense_w(&self, d: Dense, len: usize) -> &[f64] {
        slice(&self.values, d.w, len)
    }

    fn dense_b(&self, d: Dense, len: usize) -> &[f64] {
        slice(&self.values, d.b, len)
    }

    fn head(&self, task: Task) -> Dense {
        match task {
            Task::Texture => self.layout.texture_head,
            Task::Localize => self.layout.position_head,
            Task::Velocity => self.layout.velocity_head,
        }
    }

    /// Affine map from raw head output to task units: `(offset, scale)`.
    pub fn output_affine(&self, task: Task) -> (f64, f64) {
        let c = &self.config;
        match task {
            Task::Texture => (0.0, 1.0),
            Task::Localize => (c.pos_offset_mm, c.pos_scale_mm),
            Task::Velocity => (c.vel_offset_mm_s, c.vel_scale_mm_s),
        }
    }

    /// Three strided convolutions with GELU between them.
    ///
    /// Returns the `m x C` latent plus the intermediates used by backward.
    fn conv_encode_cached(&self, x: Vec<f64>, n: usize) -> Result<([Vec<f64>; 3], [Vec<f64>; 2], Vec<f64>)> {
        let convs = self.config.convs();
        let lens = self.config.stage_lengths().expect("validated");
        let mut inputs: Vec<Vec<f64>> = vec![x];
        let mut pres: Vec<Vec<f64>> = Vec::new();
        let mut len = n;
        for (i, conv) in convs.iter().enumerate() {
            let d = self.layout.convs[i];
            let wlen = conv.kernel * conv.cin * conv.cout;
            let y = conv.forward(
                inputs.last().expect("non-empty"),
                len,
                self.dense_w(d, wlen),
                self.dense_b(d, conv.cout),
            );
            check(&format!("encoder.conv{i}"), &y)?;
            len = lens[i];
            if i < 2 {
                let mut a = y.clone();
                gelu_inplace(&mut a);
                pres.push(y);
                inputs.push(a);
            } else {
                let [x0, x1, x2]: [Vec<f64>; 3] = inputs.try_into().expect("three inputs");
                let [p0, p1]: [Vec<f64>; 2] = pres.try_into().expect("two pre-activations");
                return Ok(([x0, x1, x2], [p0, p1], y));
            }
        }
        unreachable!("three encoder stages")
    }

    /// Latent sequence (`m x C`) of a window; exposed for inspection and tests.
    pub fn conv_encode<T: Copy + Into<f64>>(&self, window: &[T]) -> Result<Vec<f64>> {
        let x = self.scaled_input(window)?;
        Ok(self.conv_encode_cached(x, self.config.window)?.2)
    }

    /// `latent + GELU(conv_same(latent))`; returns `(enriched, pre_activation)`.
    pub fn residual_enrich(&self, latent: &[f64], m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let conv = self.config.residual_conv();
        let d = self.layout.residual;
        let pre = conv.forward(
            latent,
            m,
            self.dense_w(d, conv.kernel * conv.cin * conv.cout),
            self.dense_b(d, conv.cout),
        );
        check("encoder.residual", &pre)?;
        let mut out = pre.clone();
        gelu_inplace(&mut out);
        for (o, l) in out.iter_mut().zip(latent) {
            *o += l;
        }
        Ok((out, pre))
    }

    fn encoder_layer(&self, lo: &LayerOffsets, x: &[f64], m: usize, name: &str) -> Result<(Vec<f64>, LayerCache)> {
        let d = self.config.d_model;
        let h = self.config.heads;
        let dh = d / h;
        let ff = self.config.ff_dim;
        let v = &self.values;
        let norm = |n: Norm| (slice(v, n.gamma, d), slice(v, n.beta, d));

        let (g1, b1) = norm(lo.ln1);
        let (ln1_y, ln1_xhat, ln1_inv) = layer_norm(x, m, d, g1, b1);
        let q = linear(&ln1_y, self.dense_w(lo.q, d * d), self.dense_b(lo.q, d), m, d, d);
        let k = linear(&ln1_y, self.dense_w(lo.k, d * d), self.dense_b(lo.k, d), m, d, d);
        let vv = linear(&ln1_y, self.dense_w(lo.v, d * d), self.dense_b(lo.v, d), m, d, d);
        let scale = 1.0 / (dh as f64).sqrt();
        let mut attn = vec![0.0; h * m * m];
        let mut ctx = vec![0.0; m * d];
        for hh in 0..h {
            let off = hh * dh;
            for i in 0..m {
                let row = &mut attn[(hh * m + i) * m..(hh * m + i + 1) * m];
                let qi = &q[i * d + off..i * d + off + dh];
                for (j, r) in row.iter_mut().enumerate() {
                    let kj = &k[j * d + off..j * d + off + dh];
                    *r = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_inplace(row);
                let ci = &mut ctx[i * d + off..i * d + off + dh];
                for (j, &a) in row.iter().enumerate() {
                    let vj = &vv[j * d + off..j * d + off + dh];
                    for (c, &x) in ci.iter_mut().zip(vj) {
                        *c += a * x;
                    }
                }
            }
        }
        check(&format!("{name}.attn"), &attn)?;
        let attn_out = linear(&ctx, self.dense_w(lo.o, d * d), self.dense_b(lo.o, d), m, d, d);
        let x_mid: Vec<f64> = x.iter().zip(&attn_out).map(|(a, b)| a + b).collect();
        check(&format!("{name}.attn"), &x_mid)?;

        let (g2, b2) = norm(lo.ln2);
        let (ln2_y, ln2_xhat, ln2_inv) = layer_norm(&x_mid, m, d, g2, b2);
        let ff_pre = linear(&ln2_y, self.dense_w(lo.ff1, d * ff), self.dense_b(lo.ff1, ff), m, d, ff);
        let mut ff_act = ff_pre.clone();
        gelu_inplace(&mut ff_act);
        let ff_out = linear(&ff_act, self.dense_w(lo.ff2, ff * d), self.dense_b(lo.ff2, d), m, ff, d);
        let out: Vec<f64> = x_mid.iter().zip(&ff_out).map(|(a, b)| a + b).collect();
        check(&format!("{name}.ff"), &out)?;
        Ok((
            out,
            LayerCache {
                ln1_y,
                ln1_xhat,
                ln1_inv,
                q,
                k,
                v: vv,
                attn,
                ctx,
                ln2_y,
                ln2_xhat,
                ln2_inv,
                ff_pre,
                ff_act,
            },
        ))
    }

    /// Runs the transformer layers over `m x d_model` tokens.
    pub fn transformer_encode(&self, tokens: &[f64], m: usize) -> Result<(Vec<f64>, Vec<LayerCache>)> {
        let mut x = tokens.to_vec();
        let mut caches = Vec::with_capacity(self.layout.layers.len());
        for (l, lo) in self.layout.layers.iter().enumerate() {
            let (y, c) = self.encoder_layer(lo, &x, m, &format!("layer{l}"))?;
            caches.push(c);
            x = y;
        }
        Ok((x, caches))
    }

    /// Softmax-weighted average of tokens; returns `(pooled, weights)`.
    pub fn attention_pool(&self, tokens: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.config.d_model;
        let w = slice(&self.values, self.layout.pool, d);
        let mut p: Vec<f64> = (0..m)
            .map(|t| tokens[t * d..(t + 1) * d].iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        softmax_inplace(&mut p);
        let mut pooled = vec![0.0; d];
        for (t, &pt) in p.iter().enumerate() {
            for (o, &x) in pooled.iter_mut().zip(&tokens[t * d..(t + 1) * d]) {
                *o += pt * x;
            }
        }
        (pooled, p)
    }

    fn scaled_input<T: Copy + Into<f64>>(&self, window: &[T]) -> Result<Vec<f64>> {
        let c = &self.config;
        let want = c.window * c.in_channels;
        if window.len() != want {
            return Err(Error::ShapeMismatch(format!(
                "window has {} values, model expects {} x {}",
                window.len(),
                c.window,
                c.in_channels
            )));
        }
        let x: Vec<f64> = window.iter().map(|&v| v.into() * c.input_scale).collect();
        check("input", &x)?;
        Ok(x)
    }

    /// Forward pass for one `window x in_channels` window under the
    /// configured task, returning the output and the backward cache.
    pub fn forward_cached<T: Copy + Into<f64>>(&self, window: &[T]) -> Result<(Vec<f64>, ForwardCache)> {
        self.forward_task(window, self.config.task)
    }

    /// Forward pass through the head of `task`.
    pub fn forward_task<T: Copy + Into<f64>>(&self, window: &[T], task: Task) -> Result<(Vec<f64>, ForwardCache)> {
        let cfg = &self.config;
        let n = cfg.window;
        let m = cfg.tokens().expect("validated");
        let d = cfg.d_model;
        let cch = cfg.conv_channels;
        let x = self.scaled_input(window)?;
        let (conv_in, conv_pre, latent) = self.conv_encode_cached(x, n)?;
        let (enriched, res_pre) = self.residual_enrich(&latent, m)?;

        let mut tokens = linear(
            &enriched,
            self.dense_w(self.layout.proj, cch * d),
            self.dense_b(self.layout.proj, d),
            m,
            cch,
            d,
        );
        for (t, p) in tokens.iter_mut().zip(slice(&self.values, self.layout.pos_emb, m * d)) {
            *t += p;
        }
        check("proj", &tokens)?;

        let (x, layers) = self.transformer_encode(&tokens, m)?;
        let fl = self.layout.final_ln;
        let (encoded, final_xhat, final_inv) = layer_norm(
            &x,
            m,
            d,
            slice(&self.values, fl.gamma, d),
            slice(&self.values, fl.beta, d),
        );
        check("final_ln", &encoded)?;
        let (pooled, pool_weights) = self.attention_pool(&encoded, m);
        check("pool", &pooled)?;

        let k = task.output_dim();
        let head = self.head(task);
        let head_raw = linear(&pooled, self.dense_w(head, d * k), self.dense_b(head, k), 1, d, k);
        check(&format!("head.{}", head_name(task)), &head_raw)?;
        let (off, scale) = self.output_affine(task);
        let out = head_raw.iter().map(|&y| off + scale * y).collect();
        Ok((
            out,
            ForwardCache {
                task,
                n,
                m,
                conv_in,
                conv_pre,
                latent,
                res_pre,
                enriched,
                layers,
                final_xhat,
                final_inv,
                encoded,
                pool_weights,
                pooled,
                head_raw,
            },
        ))
    }

    pub fn forward<T: Copy + Into<f64>>(&self, window: &[T]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(window)?.0)
    }

    /// Accumulates into `grads` the gradient of a scalar loss whose
    /// derivative with respect to the task output is `dout`.
    pub fn backward(&self, cache: &ForwardCache, dout: &[f64], grads: &mut [f64]) -> Result<()> {
        let cfg = &self.config;
        let d = cfg.d_model;
        let m = cache.m;
        let task = cache.task;
        let k = task.output_dim();
        if dout.len() != k || grads.len() != self.values.len() {
            return Err(Error::ShapeMismatch("gradient buffers do not match the model".into()));
        }
        let v = &self.values;

        // Head.
        let (_, scale) = self.output_affine(task);
        let dhead: Vec<f64> = dout.iter().map(|g| g * scale).collect();
        let head = self.head(task);
        let dpooled = {
            let (gw, gb) = split_dense(grads, head, d * k, k);
            linear_backward(&cache.pooled, slice(v, head.w, d * k), &dhead, 1, d, k, gw, gb)
        };

        // Attention pooling.
        let pw = slice(v, self.layout.pool, d);
        let enc = &cache.encoded;
        let p = &cache.pool_weights;
        let proj: Vec<f64> = (0..m)
            .map(|t| enc[t * d..(t + 1) * d].iter().zip(&dpooled).map(|(a, b)| a * b).sum())
            .collect();
        let avg: f64 = p.iter().zip(&proj).map(|(a, b)| a * b).sum();
        let mut denc = vec![0.0; m * d];
        {
            let gpool = &mut grads[self.layout.pool..self.layout.pool + d];
            for t in 0..m {
                let ds = p[t] * (proj[t] - avg);
                let row = &enc[t * d..(t + 1) * d];
                for j in 0..d {
                    denc[t * d + j] = p[t] * dpooled[j] + ds * pw[j];
                    gpool[j] += ds * row[j];
                }
            }
        }

        // Final norm.
        let fl = self.layout.final_ln;
        let mut dx = {
            let (gg, gb) = split_norm(grads, fl, d);
            layer_norm_backward(&cache.final_xhat, &cache.final_inv, slice(v, fl.gamma, d), &denc, d, gg, gb)
        };

        // Transformer layers.
        for (lo, lc) in self.layout.layers.iter().zip(&cache.layers).rev() {
            dx = self.encoder_layer_backward(lo, lc, &dx, m, grads);
        }

        // Projection and positional embeddings.
        let pe = self.layout.pos_emb;
        for (g, &dv) in grads[pe..pe + m * d].iter_mut().zip(&dx) {
            *g += dv;
        }
        let cch = cfg.conv_channels;
        let proj_d = self.layout.proj;
        let denriched = {
            let (gw, gb) = split_dense(grads, proj_d, cch * d, d);
            linear_backward(&cache.enriched, slice(v, proj_d.w, cch * d), &dx, m, cch, d, gw, gb)
        };

        // Residual enrichment: enriched = latent + gelu(res_pre).
        let rc = cfg.residual_conv();
        let rd = self.layout.residual;
        let dres_pre = gelu_backward(&cache.res_pre, &denriched);
        let mut dlatent = {
            let (gw, gb) = split_dense(grads, rd, rc.kernel * rc.cin * rc.cout, rc.cout);
            rc.backward(&cache.latent, m, slice(v, rd.w, rc.kernel * rc.cin * rc.cout), &dres_pre, gw, gb)
        };
        for (a, b) in dlatent.iter_mut().zip(&denriched) {
            *a += b;
        }

        // Encoder convolutions.
        let convs = cfg.convs();
        let lens = cfg.stage_lengths().expect("validated");
        let in_lens = [cache.n, lens[0], lens[1]];
        let mut dy = dlatent;
        for i in (0..3).rev() {
            let conv = convs[i];
            let cd = self.layout.convs[i];
            let wlen = conv.kernel * conv.cin * conv.cout;
            let (gw, gb) = split_dense(grads, cd, wlen, conv.cout);
            let dxin = conv.backward(&cache.conv_in[i], in_lens[i], slice(v, cd.w, wlen), &dy, gw, gb);
            if i > 0 {
                dy = gelu_backward(&cache.conv_pre[i - 1], &dxin);
            }
        }
        if !all_finite(grads) {
            return Err(Error::NonFinite {
                layer: "backward".into(),
            });
        }
        Ok(())
    }

    fn encoder_layer_backward(
        &self,
        lo: &LayerOffsets,
        c: &LayerCache,
        dout: &[f64],
        m: usize,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let d = self.config.d_model;
        let h = self.config.heads;
        let dh = d / h;
        let ff = self.config.ff_dim;
        let v = &self.values;

        // out = x_mid + ff2(gelu(ff1(ln2(x_mid))))
        let dff_act = {
            let (gw, gb) = split_dense(grads, lo.ff2, ff * d, d);
            linear_backward(&c.ff_act, slice(v, lo.ff2.w, ff * d), dout, m, ff, d, gw, gb)
        };
        let dff_pre = gelu_backward(&c.ff_pre, &dff_act);
        let dln2 = {
            let (gw, gb) = split_dense(grads, lo.ff1, d * ff, ff);
            linear_backward(&c.ln2_y, slice(v, lo.ff1.w, d * ff), &dff_pre, m, d, ff, gw, gb)
        };
        let mut dx_mid = {
            let (gg, gb) = split_norm(grads, lo.ln2, d);
            layer_norm_backward(&c.ln2_xhat, &c.ln2_inv, slice(v, lo.ln2.gamma, d), &dln2, d, gg, gb)
        };
        for (a, b) in dx_mid.iter_mut().zip(dout) {
            *a += b;
        }

        // x_mid = x_in + out_proj(attention(ln1(x_in)))
        let dctx = {
            let (gw, gb) = split_dense(grads, lo.o, d * d, d);
            linear_backward(&c.ctx, slice(v, lo.o.w, d * d), &dx_mid, m, d, d, gw, gb)
        };
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = vec![0.0; m * d];
        let mut dk = vec![0.0; m * d];
        let mut dv = vec![0.0; m * d];
        let mut da = vec![0.0; m];
        for hh in 0..h {
            let off = hh * dh;
            for i in 0..m {
                let a = &c.attn[(hh * m + i) * m..(hh * m + i + 1) * m];
                let dci = &dctx[i * d + off..i * d + off + dh];
                for j in 0..m {
                    let vj = &c.v[j * d + off..j * d + off + dh];
                    da[j] = dci.iter().zip(vj).map(|(x, y)| x * y).sum();
                    for (g, &x) in dv[j * d + off..j * d + off + dh].iter_mut().zip(dci) {
                        *g += a[j] * x;
                    }
                }
                let dot: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
                for j in 0..m {
                    let ds = a[j] * (da[j] - dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for t in 0..dh {
                        dq[i * d + off + t] += ds * c.k[j * d + off + t];
                        dk[j * d + off + t] += ds * c.q[i * d + off + t];
                    }
                }
            }
        }
        let mut dln1 = vec![0.0; m * d];
        for (dense, g) in [(lo.q, &dq), (lo.k, &dk), (lo.v, &dv)] {
            let (gw, gb) = split_dense(grads, dense, d * d, d);
            let part = linear_backward(&c.ln1_y, slice(v, dense.w, d * d), g, m, d, d, gw, gb);
            for (a, b) in dln1.iter_mut().zip(&part) {
                *a += b;
            }
        }
        let mut dx = {
            let (gg, gb) = split_norm(grads, lo.ln1, d);
            layer_norm_backward(&c.ln1_xhat, &c.ln1_inv, slice(v, lo.ln1.gamma, d), &dln1, d, gg, gb)
        };
        for (a, b) in dx.iter_mut().zip(&dx_mid) {
            *a += b;
        }
        dx
    }
}

fn head_name(task: Task) -> &'static str {
    match task {
        Task::Texture => "texture",
        Task::Localize => "position",
        Task::Velocity => "velocity",
    }
}

/// Disjoint mutable views of a weight and bias gradient.
fn split_dense(grads: &mut [f64], d: Dense, wlen: usize, blen: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(d.w + wlen <= d.b);
    let (a, b) = grads.split_at_mut(d.b);
    (&mut a[d.w..d.w + wlen], &mut b[..blen])
}

fn split_norm(grads: &mut [f64], n: Norm, dim: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(n.gamma + dim <= n.beta);
    let (a, b) = grads.split_at_mut(n.beta);
    (&mut a[n.gamma..n.gamma + dim], &mut b[..dim])
}
