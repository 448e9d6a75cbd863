use ndarray::{Array2, ArrayView2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{q_sample, standard_normal, Adam, NoisePredictor, NoiseSchedule};
use crate::net::{backward, forward_train, ModelParams};
use crate::spectral::SpectralOperators;
use crate::{Error, Result};

/// One clean training field bound to its mesh operators.
#[derive(Clone, Copy)]
pub struct TrainSample<'a> {
    /// `n × c`, already normalized to the training range.
    pub f0: ArrayView2<'a, f64>,
    pub ops: &'a SpectralOperators,
    /// Used in error messages.
    pub id: &'a str,
}

/// Independent random stream for one batch element of one step.
pub fn element_rng(seed: u64, step: u64, element: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&element.to_le_bytes());
    key[24..].copy_from_slice(b"heatgen\0");
    ChaCha8Rng::from_seed(key)
}

fn draw(sample: &TrainSample, sched: &NoiseSchedule, seed: u64, step: u64, element: u64) -> (usize, Array2<f64>) {
    let mut rng = element_rng(seed, step, element);
    let t = rng.random_range(0..sched.len());
    let eps = standard_normal(&mut rng, sample.f0.dim());
    (t, eps)
}

fn mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> f64 {
    let mut acc = 0.0;
    Zip::from(pred).and(target).for_each(|&p, &t| acc += (p - t) * (p - t));
    acc / pred.len() as f64
}

/// Noise prediction loss on a batch without touching parameters: each
/// element's mean squared error over its own vertices and channels,
/// averaged over the batch.
pub fn batch_loss(
    predictor: &(dyn NoisePredictor + Sync),
    batch: &[TrainSample],
    sched: &NoiseSchedule,
    seed: u64,
    step: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let losses: Vec<f64> = batch
        .par_iter()
        .enumerate()
        .map(|(e, s)| {
            let (t, eps) = draw(s, sched, seed, step, e as u64);
            let f_t = q_sample(s.f0, t, eps.view(), sched)?;
            let pred = predictor.predict(f_t.view(), t, s.ops)?;
            let l = mse(pred.view(), eps.view());
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("loss on mesh {}", s.id)));
            }
            Ok(l)
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / batch.len() as f64)
}

/// Loss of one element and its parameter gradient.
fn element_gradient(
    params: &ModelParams,
    sample: &TrainSample,
    sched: &NoiseSchedule,
    seed: u64,
    step: u64,
    element: u64,
    weight: f64,
) -> Result<(f64, ModelParams)> {
    let (t, eps) = draw(sample, sched, seed, step, element);
    let f_t = q_sample(sample.f0, t, eps.view(), sched)?;
    let (pred, cache) = forward_train(params, f_t.view(), t, sample.ops)
        .map_err(|e| Error::NonFinite(format!("forward pass on mesh {}: {e}", sample.id)))?;
    let loss = mse(pred.view(), eps.view());
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss on mesh {}", sample.id)));
    }
    let scale = 2.0 * weight / pred.len() as f64;
    let d_out = (&pred - &eps) * scale;
    let mut grads = params.zeros_like();
    backward(params, &cache, sample.ops, d_out.view(), &mut grads)?;
    Ok((loss, grads))
}

/// Samples `t` and `ε` per element, computes the batch loss, and applies one
/// optimizer update. Returns the loss before the update. Random draws depend
/// only on `(seed, step, element index)`.
pub fn training_step(
    params: &mut ModelParams,
    batch: &[TrainSample],
    sched: &NoiseSchedule,
    optimizer: &mut Adam,
    seed: u64,
    step: u64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let weight = 1.0 / batch.len() as f64;
    let snapshot: &ModelParams = params;
    let results: Vec<(f64, ModelParams)> = batch
        .par_iter()
        .enumerate()
        .map(|(e, s)| element_gradient(snapshot, s, sched, seed, step, e as u64, weight))
        .collect::<Result<_>>()?;
    // Reduce in element order for reproducibility.
    let mut iter = results.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        let mut dst = grads.tensors_mut();
        for (d, (_, s)) in dst.iter_mut().zip(g.tensors()) {
            d.1 += &s;
        }
    }
    optimizer.update(params, &grads);
    Ok(loss * weight)
}
