//! The noise prediction network.
//!
//! `input_proj → B blocks → output_proj`. Each block diffuses its input with
//! a learnable per-channel heat time, computes tangent-gradient features,
//! concatenates `[diffused, gradient features, input]`, layer-normalizes,
//! and runs a three-layer per-vertex MLP whose first layer receives an
//! additive timestep bias. A residual connection wraps the block.
//!
//! Reverse mode is written by hand in [`backward`].

mod checkpoint;
mod forward;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, NamedTensor,
    OptimizerSection,
};
pub use forward::{
    backward, forward, forward_train, spatial_gradient_features, timestep_embedding, ForwardCache,
};

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_BLOCKS: usize = 8;
/// Puts the parameter count near 2.3M with the default block layout.
pub const DEFAULT_WIDTH: usize = 192;
pub const DEFAULT_TIME_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub c_in: usize,
    pub width: usize,
    pub blocks: usize,
    /// Eigenbasis size the model was configured for.
    pub k: usize,
    /// Sinusoidal timestep embedding dimension (even).
    pub time_dim: usize,
}

impl NetConfig {
    pub fn new(c_in: usize, width: usize, blocks: usize, k: usize) -> Self {
        Self {
            c_in,
            width,
            blocks,
            k,
            time_dim: DEFAULT_TIME_DIM,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.c_in == 0 || self.width == 0 || self.blocks == 0 || self.k == 0 {
            return Err(crate::Error::InvalidArgument(format!("all network sizes must be positive: {self:?}")));
        }
        if self.time_dim == 0 || self.time_dim % 2 != 0 {
            return Err(crate::Error::InvalidArgument(format!(
                "time embedding dimension must be positive and even, got {}",
                self.time_dim
            )));
        }
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        let (w, e, c) = (self.width, self.time_dim, self.c_in);
        let block = w + 2 * w * w + 2 * 3 * w + 3 * w * w + w + e * w + w + 2 * (w * w + w);
        c * w + w + e * e + e + self.blocks * block + w * c + c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    /// Unconstrained; the diffusion time is `softplus(raw_time)`.
    pub raw_time: Array1<f64>,
    /// Real and imaginary parts of the gradient mixing matrix.
    pub mix_re: Array2<f64>,
    pub mix_im: Array2<f64>,
    pub norm_gamma: Array1<f64>,
    pub norm_beta: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w_time: Array2<f64>,
    pub b_time: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl BlockParams {
    fn zeros(width: usize, time_dim: usize) -> Self {
        let w = width;
        Self {
            raw_time: Array1::zeros(w),
            mix_re: Array2::zeros((w, w)),
            mix_im: Array2::zeros((w, w)),
            norm_gamma: Array1::zeros(3 * w),
            norm_beta: Array1::zeros(3 * w),
            w1: Array2::zeros((3 * w, w)),
            b1: Array1::zeros(w),
            w_time: Array2::zeros((time_dim, w)),
            b_time: Array1::zeros(w),
            w2: Array2::zeros((w, w)),
            b2: Array1::zeros(w),
            w3: Array2::zeros((w, w)),
            b3: Array1::zeros(w),
        }
    }

    pub fn diffusion_times(&self) -> Vec<f64> {
        self.raw_time.iter().map(|&r| softplus(r)).collect()
    }

    fn fields(&self) -> Vec<(&'static str, ArrayViewD<'_, f64>)> {
        vec![
            ("raw_time", self.raw_time.view().into_dyn()),
            ("mix_re", self.mix_re.view().into_dyn()),
            ("mix_im", self.mix_im.view().into_dyn()),
            ("norm_gamma", self.norm_gamma.view().into_dyn()),
            ("norm_beta", self.norm_beta.view().into_dyn()),
            ("w1", self.w1.view().into_dyn()),
            ("b1", self.b1.view().into_dyn()),
            ("w_time", self.w_time.view().into_dyn()),
            ("b_time", self.b_time.view().into_dyn()),
            ("w2", self.w2.view().into_dyn()),
            ("b2", self.b2.view().into_dyn()),
            ("w3", self.w3.view().into_dyn()),
            ("b3", self.b3.view().into_dyn()),
        ]
    }

    fn fields_mut(&mut self) -> Vec<(&'static str, ArrayViewMutD<'_, f64>)> {
        vec![
            ("raw_time", self.raw_time.view_mut().into_dyn()),
            ("mix_re", self.mix_re.view_mut().into_dyn()),
            ("mix_im", self.mix_im.view_mut().into_dyn()),
            ("norm_gamma", self.norm_gamma.view_mut().into_dyn()),
            ("norm_beta", self.norm_beta.view_mut().into_dyn()),
            ("w1", self.w1.view_mut().into_dyn()),
            ("b1", self.b1.view_mut().into_dyn()),
            ("w_time", self.w_time.view_mut().into_dyn()),
            ("b_time", self.b_time.view_mut().into_dyn()),
            ("w2", self.w2.view_mut().into_dyn()),
            ("b2", self.b2.view_mut().into_dyn()),
            ("w3", self.w3.view_mut().into_dyn()),
            ("b3", self.b3.view_mut().into_dyn()),
        ]
    }
}

/// All learnable weights. The same struct doubles as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: NetConfig,
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_temb: Array2<f64>,
    pub b_temb: Array1<f64>,
    pub blocks: Vec<BlockParams>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(config: NetConfig) -> Self {
        let (c, w, e) = (config.c_in, config.width, config.time_dim);
        Self {
            config,
            w_in: Array2::zeros((c, w)),
            b_in: Array1::zeros(w),
            w_temb: Array2::zeros((e, e)),
            b_temb: Array1::zeros(e),
            blocks: (0..config.blocks).map(|_| BlockParams::zeros(w, e)).collect(),
            w_out: Array2::zeros((w, c)),
            b_out: Array1::zeros(c),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config)
    }

    /// Every tensor with its stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("input.w".to_string(), self.w_in.view().into_dyn()),
            ("input.b".to_string(), self.b_in.view().into_dyn()),
            ("time.w".to_string(), self.w_temb.view().into_dyn()),
            ("time.b".to_string(), self.b_temb.view().into_dyn()),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.extend(b.fields().into_iter().map(|(n, t)| (format!("blocks.{i}.{n}"), t)));
        }
        out.push(("output.w".to_string(), self.w_out.view().into_dyn()));
        out.push(("output.b".to_string(), self.b_out.view().into_dyn()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("input.w".to_string(), self.w_in.view_mut().into_dyn()),
            ("input.b".to_string(), self.b_in.view_mut().into_dyn()),
            ("time.w".to_string(), self.w_temb.view_mut().into_dyn()),
            ("time.b".to_string(), self.b_temb.view_mut().into_dyn()),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.extend(b.fields_mut().into_iter().map(|(n, t)| (format!("blocks.{i}.{n}"), t)));
        }
        out.push(("output.w".to_string(), self.w_out.view_mut().into_dyn()));
        out.push(("output.b".to_string(), self.b_out.view_mut().into_dyn()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Flattened copy of all parameters in [`tensors`](Self::tensors) order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        for (_, t) in self.tensors() {
            v.extend(t.iter().copied());
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Ratio between the longest and shortest initial diffusion time in a block.
pub const INIT_TIME_SPREAD: f64 = 1e3;

/// Builds fresh parameters. Linear layers draw from `U(-1/√fan_in, 1/√fan_in)`,
/// layer-norm scales start at one and the output projection at zero. Diffusion
/// times are spread log-uniformly over the channels of each block, from
/// `init_time` (typically the squared mean edge length) up to
/// `INIT_TIME_SPREAD × init_time`, so the untrained network already mixes
/// local and near-global context.
pub fn init_params(config: NetConfig, init_time: f64, seed: u64) -> crate::Result<ModelParams> {
    config.validate()?;
    if !(init_time > 0.0) || !init_time.is_finite() {
        return Err(crate::Error::InvalidArgument(format!(
            "initial diffusion time must be positive, got {init_time}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(config);
    let (c, w, e) = (config.c_in, config.width, config.time_dim);
    let raw: Vec<f64> = (0..w)
        .map(|j| {
            let frac = if w > 1 { j as f64 / (w - 1) as f64 } else { 0.0 };
            softplus_inverse(init_time * INIT_TIME_SPREAD.powf(frac))
        })
        .collect();

    fn fill<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>, fan_in: usize, rng: &mut ChaCha8Rng) {
        let bound = 1.0 / (fan_in as f64).sqrt();
        a.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
    }

    fill(&mut p.w_in, c, &mut rng);
    fill(&mut p.b_in, c, &mut rng);
    fill(&mut p.w_temb, e, &mut rng);
    fill(&mut p.b_temb, e, &mut rng);
    for b in &mut p.blocks {
        b.raw_time.iter_mut().zip(&raw).for_each(|(r, &v)| *r = v);
        fill(&mut b.mix_re, w, &mut rng);
        fill(&mut b.mix_im, w, &mut rng);
        b.norm_gamma.fill(1.0);
        fill(&mut b.w1, 3 * w, &mut rng);
        fill(&mut b.b1, 3 * w, &mut rng);
        fill(&mut b.w_time, e, &mut rng);
        fill(&mut b.b_time, e, &mut rng);
        fill(&mut b.w2, w, &mut rng);
        fill(&mut b.b2, w, &mut rng);
        fill(&mut b.w3, w, &mut rng);
        fill(&mut b.b3, w, &mut rng);
    }
    Ok(p)
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `softplus⁻¹(s) = ln(eˢ - 1)` for `s > 0`.
pub fn softplus_inverse(s: f64) -> f64 {
    if s > 30.0 {
        s + (-(-s).exp()).ln_1p()
    } else {
        s.exp_m1().ln()
    }
}

pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}
