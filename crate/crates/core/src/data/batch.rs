use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3};

use super::TexturedSample;
use crate::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 60_000;

/// Samples of different vertex counts stacked and zero-padded to a common
/// capacity, with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    pub capacity: usize,
    pub counts: Vec<usize>,
    /// `B × capacity × 3`.
    pub colors: Array3<f64>,
    /// `B × capacity`; true on real vertices.
    pub mask: Array2<bool>,
    pub mesh_ids: Vec<[u8; 32]>,
}

pub fn build_batch(samples: &[&TexturedSample], capacity: usize) -> Result<PaddedBatch> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("cannot batch zero samples".into()));
    }
    if let Some(s) = samples.iter().find(|s| s.n_vertices() > capacity) {
        return Err(Error::InvalidArgument(format!(
            "sample {} has {} vertices, above the batch capacity of {capacity}; decimate the mesh first",
            s.source_id,
            s.n_vertices()
        )));
    }
    let b = samples.len();
    let mut colors = Array3::zeros((b, capacity, 3));
    let mut mask = Array2::from_elem((b, capacity), false);
    for (i, s) in samples.iter().enumerate() {
        let n = s.n_vertices();
        colors.slice_mut(s![i, ..n, ..]).assign(&s.colors);
        mask.slice_mut(s![i, ..n]).fill(true);
    }
    Ok(PaddedBatch {
        capacity,
        counts: samples.iter().map(|s| s.n_vertices()).collect(),
        colors,
        mask,
        mesh_ids: samples.iter().map(|s| s.mesh_id).collect(),
    })
}

impl PaddedBatch {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Real (unpadded) rows of element `b`.
    pub fn element(&self, b: usize) -> ArrayView2<'_, f64> {
        self.colors.slice(s![b, ..self.counts[b], ..])
    }
}

/// Mean squared error over valid entries, normalized per element and then
/// averaged over the batch, so it equals the mean of per-sample losses.
/// Padded entries of `pred` and `target` are ignored whatever they hold.
pub fn masked_loss(pred: ArrayView3<f64>, target: ArrayView3<f64>, batch: &PaddedBatch) -> Result<f64> {
    let (b, cap, c) = pred.dim();
    if target.dim() != pred.dim() || b != batch.len() || cap != batch.capacity {
        return Err(Error::Shape(format!(
            "prediction {:?}, target {:?}, batch of {} × {}",
            pred.dim(),
            target.dim(),
            batch.len(),
            batch.capacity
        )));
    }
    let mut total = 0.0;
    for e in 0..b {
        let mut acc = 0.0;
        let mut count = 0usize;
        for v in 0..cap {
            if batch.mask[[e, v]] {
                for k in 0..c {
                    let d = pred[[e, v, k]] - target[[e, v, k]];
                    acc += d * d;
                }
                count += c;
            }
        }
        if count > 0 {
            total += acc / count as f64;
        }
    }
    Ok(total / b as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, fill: f64) -> TexturedSample {
        TexturedSample::new([n as u8; 32], Array2::from_elem((n, 3), fill), format!("s{n}")).unwrap()
    }

    #[test]
    fn masks_and_exact_fit() {
        let a = sample(10, 0.1);
        let b = sample(20, 0.2);
        let batch = build_batch(&[&a, &b], 32).unwrap();
        assert_eq!(batch.mask.row(0).iter().filter(|&&m| m).count(), 10);
        assert_eq!(batch.mask.row(1).iter().filter(|&&m| m).count(), 20);
        assert_eq!(batch.colors[[0, 10, 0]], 0.0);
        assert_eq!(batch.element(1).dim(), (20, 3));

        let single = build_batch(&[&a], 10).unwrap();
        assert!(single.mask.iter().all(|&m| m));
    }

    #[test]
    fn oversize_is_rejected_with_advice() {
        let a = sample(10, 0.1);
        let err = build_batch(&[&a], 8).unwrap_err().to_string();
        assert!(err.contains("decimate"), "{err}");
    }
}
