//! DDPM on vertex fields: linear schedule, forward noising, the noise
//! prediction objective and ancestral sampling.
//!
//! Timesteps are 0-based indices `t ∈ [0, T)`; index `t` corresponds to
//! step `t + 1` of the usual 1-based notation.

mod adam;
mod schedule;
mod train;

pub use adam::{Adam, DEFAULT_LR};
pub use schedule::{make_schedule, NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS};
pub use train::{batch_loss, element_rng, training_step, TrainSample};

use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::net::{forward, ModelParams};
use crate::spectral::SpectralOperators;
use crate::{Error, Result};

/// Anything that predicts the noise in `f_t`.
pub trait NoisePredictor {
    fn predict(&self, f_t: ArrayView2<f64>, t: usize, ops: &SpectralOperators) -> Result<Array2<f64>>;
}

impl NoisePredictor for ModelParams {
    fn predict(&self, f_t: ArrayView2<f64>, t: usize, ops: &SpectralOperators) -> Result<Array2<f64>> {
        forward(self, f_t, t, ops)
    }
}

/// Predicts zero noise everywhere.
pub struct ZeroPredictor;

impl NoisePredictor for ZeroPredictor {
    fn predict(&self, f_t: ArrayView2<f64>, _: usize, _: &SpectralOperators) -> Result<Array2<f64>> {
        Ok(Array2::zeros(f_t.dim()))
    }
}

pub fn standard_normal(rng: &mut impl Rng, dim: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(dim, || rng.sample(StandardNormal))
}

/// `√ᾱ_t f0 + √(1-ᾱ_t) ε`.
pub fn q_sample(f0: ArrayView2<f64>, t: usize, eps: ArrayView2<f64>, sched: &NoiseSchedule) -> Result<Array2<f64>> {
    if f0.dim() != eps.dim() {
        return Err(Error::Shape(format!("signal {:?} vs noise {:?}", f0.dim(), eps.dim())));
    }
    sched.check_step(t)?;
    let ab = sched.alpha_bar[t];
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut out = Array2::zeros(f0.dim());
    Zip::from(&mut out).and(f0).and(eps).for_each(|o, &x, &e| *o = a * x + b * e);
    Ok(out)
}

/// One reverse transition mean:
/// `μ = (f_t - β_t / √(1-ᾱ_t) ε̂) / √α_t`.
pub fn posterior_mean(f_t: ArrayView2<f64>, eps_hat: ArrayView2<f64>, t: usize, sched: &NoiseSchedule) -> Array2<f64> {
    let coef = sched.beta[t] / (1.0 - sched.alpha_bar[t]).sqrt();
    let inv = 1.0 / sched.alpha[t].sqrt();
    let mut out = Array2::zeros(f_t.dim());
    Zip::from(&mut out)
        .and(f_t)
        .and(eps_hat)
        .for_each(|o, &x, &e| *o = inv * (x - coef * e));
    out
}

/// Runs the reverse chain from `f_T` down to `f_0`. With `noise = None` the
/// chain is the deterministic `z = 0` variant.
pub fn reverse_chain(
    predictor: &dyn NoisePredictor,
    ops: &SpectralOperators,
    sched: &NoiseSchedule,
    f_end: Array2<f64>,
    mut noise: Option<&mut ChaCha8Rng>,
) -> Result<Array2<f64>> {
    let mut f = f_end;
    for t in (0..sched.len()).rev() {
        let eps = predictor.predict(f.view(), t, ops)?;
        let mut next = posterior_mean(f.view(), eps.view(), t, sched);
        if t > 0 {
            if let Some(rng) = noise.as_deref_mut() {
                let z = standard_normal(rng, f.dim());
                next.scaled_add(sched.sigma[t], &z);
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sampling state at step {t}")));
        }
        f = next;
    }
    Ok(f)
}

/// Draws one field of `channels` channels on the mesh of `ops`.
pub fn ancestral_sample(
    predictor: &dyn NoisePredictor,
    ops: &SpectralOperators,
    sched: &NoiseSchedule,
    channels: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f_end = standard_normal(&mut rng, (ops.n(), channels));
    reverse_chain(predictor, ops, sched, f_end, Some(&mut rng))
}

/// `[0, 1] → [-1, 1]`.
pub fn normalize_colors(c: ArrayView2<f64>) -> Array2<f64> {
    c.mapv(|v| 2.0 * v - 1.0)
}

/// `[-1, 1] → [0, 1]`, unclamped.
pub fn denormalize_colors(c: ArrayView2<f64>) -> Array2<f64> {
    c.mapv(|v| 0.5 * (v + 1.0))
}
