use crate::net::{ModelParams, NamedTensor, OptimizerSection};
use crate::{Error, Result};

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: ModelParams,
    v: ModelParams,
}

pub const DEFAULT_LR: f64 = 3e-2;

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = self.lr;
        let eps = self.eps;
        let mut p = params.tensors_mut();
        let g = grads.tensors();
        let mut m = self.m.tensors_mut();
        let mut v = self.v.tensors_mut();
        for i in 0..p.len() {
            ndarray::Zip::from(&mut p[i].1)
                .and(&g[i].1)
                .and(&mut m[i].1)
                .and(&mut v[i].1)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                });
        }
    }

    pub fn to_section(&self) -> OptimizerSection {
        let mut tensors = Vec::new();
        for (prefix, state) in [("m", &self.m), ("v", &self.v)] {
            for (name, t) in state.tensors() {
                tensors.push(NamedTensor {
                    name: format!("{prefix}.{name}"),
                    data: t.to_owned(),
                });
            }
        }
        OptimizerSection {
            step: self.step,
            tensors,
        }
    }

    pub fn from_section(params: &ModelParams, section: &OptimizerSection, lr: f64) -> Result<Self> {
        let mut adam = Self::new(params, lr);
        adam.step = section.step;
        let mut by_name: std::collections::HashMap<&str, &NamedTensor> =
            section.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        for (prefix, state) in [("m", &mut adam.m), ("v", &mut adam.v)] {
            for (name, mut slot) in state.tensors_mut() {
                let key = format!("{prefix}.{name}");
                let t = by_name
                    .remove(key.as_str())
                    .ok_or_else(|| Error::InvalidArgument(format!("optimizer state lacks {key}")))?;
                if t.data.shape() != slot.shape() {
                    return Err(Error::Shape(format!("optimizer tensor {key}")));
                }
                slot.assign(&t.data);
            }
        }
        Ok(adam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, NetConfig};

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = init_params(NetConfig::new(3, 4, 1, 5), 0.01, 1).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.b_out.fill(2.5);
        g.b_in.fill(-1e-3);
        let mut adam = Adam::new(&p, 0.1);
        adam.update(&mut p, &g);
        for i in 0..3 {
            assert!((before.b_out[i] - p.b_out[i] - 0.1).abs() < 1e-7);
        }
        assert!((p.b_in[0] - before.b_in[0] - 0.1).abs() < 1e-4);
        assert_eq!(p.w_in, before.w_in);
    }

    #[test]
    fn section_round_trip() {
        let mut p = init_params(NetConfig::new(3, 4, 1, 5), 0.01, 1).unwrap();
        let mut g = p.zeros_like();
        g.w_in.fill(0.3);
        let mut adam = Adam::new(&p, 0.1);
        adam.update(&mut p, &g);
        let back = Adam::from_section(&p, &adam.to_section(), 0.1).unwrap();
        assert_eq!(back, adam);
    }
}
