use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Kind of initialization applied to a tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    /// Uniform in `+-1/sqrt(fan_in)`.
    FanIn(usize),
    Zeros,
    Ones,
}

/// Offsets of a weight/bias pair.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Norm {
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct LayerOffsets {
    pub ln1: Norm,
    pub q: Dense,
    pub k: Dense,
    pub v: Dense,
    pub o: Dense,
    pub ln2: Norm,
    pub ff1: Dense,
    pub ff2: Dense,
}

/// Where each tensor lives inside the flat parameter vector.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    pub specs: Vec<TensorSpec>,
    pub total: usize,
    pub convs: [Dense; 3],
    pub residual: Dense,
    pub proj: Dense,
    pub pos_emb: usize,
    pub layers: Vec<LayerOffsets>,
    pub final_ln: Norm,
    pub pool: usize,
    pub texture_head: Dense,
    pub position_head: Dense,
    pub velocity_head: Dense,
    inits: Vec<Init>,
}

struct Builder {
    specs: Vec<TensorSpec>,
    inits: Vec<Init>,
    total: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        let offset = self.total;
        let spec = TensorSpec { name, shape, offset };
        self.total += spec.len();
        self.specs.push(spec);
        self.inits.push(init);
        offset
    }

    fn dense(&mut self, name: &str, w_shape: Vec<usize>, fan_in: usize, out: usize) -> Dense {
        Dense {
            w: self.add(format!("{name}.weight"), w_shape, Init::FanIn(fan_in)),
            b: self.add(format!("{name}.bias"), vec![out], Init::Zeros),
        }
    }

    fn norm(&mut self, name: &str, dim: usize) -> Norm {
        Norm {
            gamma: self.add(format!("{name}.gamma"), vec![dim], Init::Ones),
            beta: self.add(format!("{name}.beta"), vec![dim], Init::Zeros),
        }
    }
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.tokens().expect("validated");
        let d = cfg.d_model;
        let mut b = Builder {
            specs: Vec::new(),
            inits: Vec::new(),
            total: 0,
        };
        let convs = cfg.convs();
        let conv_dense: Vec<Dense> = convs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                b.dense(
                    &format!("encoder.conv{i}"),
                    vec![c.kernel, c.cin, c.cout],
                    c.kernel * c.cin,
                    c.cout,
                )
            })
            .collect();
        let r = cfg.residual_conv();
        let residual = b.dense("encoder.residual", vec![r.kernel, r.cin, r.cout], r.kernel * r.cin, r.cout);
        let proj = b.dense("proj", vec![cfg.conv_channels, d], cfg.conv_channels, d);
        let pos_emb = b.add(
            "pos_emb".into(),
            vec![m, d],
            if cfg.positional { Init::FanIn(d) } else { Init::Zeros },
        );
        let layers = (0..cfg.layers)
            .map(|l| {
                let p = format!("layer{l}");
                LayerOffsets {
                    ln1: b.norm(&format!("{p}.ln1"), d),
                    q: b.dense(&format!("{p}.attn.q"), vec![d, d], d, d),
                    k: b.dense(&format!("{p}.attn.k"), vec![d, d], d, d),
                    v: b.dense(&format!("{p}.attn.v"), vec![d, d], d, d),
                    o: b.dense(&format!("{p}.attn.out"), vec![d, d], d, d),
                    ln2: b.norm(&format!("{p}.ln2"), d),
                    ff1: b.dense(&format!("{p}.ff1"), vec![d, cfg.ff_dim], d, cfg.ff_dim),
                    ff2: b.dense(&format!("{p}.ff2"), vec![cfg.ff_dim, d], cfg.ff_dim, d),
                }
            })
            .collect();
        let final_ln = b.norm("final_ln", d);
        let pool = b.add("pool.score".into(), vec![d], Init::FanIn(d));
        let texture_head = b.dense("head.texture", vec![d, 4], d, 4);
        let position_head = b.dense("head.position", vec![d, 2], d, 2);
        let velocity_head = b.dense("head.velocity", vec![d, 1], d, 1);
        Ok(Self {
            total: b.total,
            specs: b.specs,
            inits: b.inits,
            convs: [conv_dense[0], conv_dense[1], conv_dense[2]],
            residual,
            proj,
            pos_emb,
            layers,
            final_ln,
            pool,
            texture_head,
            position_head,
            velocity_head,
        })
    }

    pub fn spec(&self, name: &str) -> Option<&TensorSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Fresh parameters: fan-in scaled uniform weights, zero biases, unit norms.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; self.total];
        for (spec, init) in self.specs.iter().zip(&self.inits) {
            let dst = &mut values[spec.range()];
            match *init {
                Init::FanIn(fan) => {
                    let bound = 1.0 / (fan as f64).sqrt();
                    for v in dst {
                        *v = rng.random_range(-bound..bound);
                    }
                }
                Init::Zeros => {}
                Init::Ones => dst.fill(1.0),
            }
        }
        values
    }
}

/// Model parameters: a flat vector plus its named layout.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let layout = ParamLayout::new(&config)?;
        let values = layout.init(seed);
        Ok(Self {
            config,
            layout,
            values,
        })
    }

    pub fn from_values(config: ModelConfig, values: Vec<f64>) -> Result<Self> {
        let layout = ParamLayout::new(&config)?;
        if values.len() != layout.total {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                layout.total,
                values.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            values,
        })
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout.spec(name).map(|s| &self.values[s.range()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.layout.spec(name)?.range();
        Some(&mut self.values[r])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rounds every value to the nearest `f32`, the precision of checkpoints.
    pub fn round_to_f32(&mut self) {
        for v in self.values.iter_mut() {
            *v = *v as f32 as f64;
        }
    }
}
