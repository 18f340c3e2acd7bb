//! First-order adaptive-moment optimizer (bias-corrected), one state per
//! parameter set.

use crate::networks::params::ParamSet;
use crate::nn::Tensor;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> AdamState {
        let m = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        let v = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState { m, v, t: 0 }
    }

    /// One update; `grads[i]` pairs with the i-th tensor of `params`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor], lr: f64) {
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..grads.len() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = params.tensor_mut(i).data_mut();
            debug_assert_eq!(g.len(), p.len());
            for j in 0..g.len() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= lr * mh / (vh.sqrt() + EPS);
            }
        }
    }
}
