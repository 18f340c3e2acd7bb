//! Stacking the fine tower N times: stage i > 1 consumes the previous
//! stage's output in place of the coarse image. Stages either carry their
//! own parameters or share one set.

use crate::dataset::manifest::derive_seed;
use crate::error::Result;
use crate::networks::deblur::FineNet;
use crate::networks::params::ParamSet;
use crate::nn::{Tape, Var};

pub struct FineCascade {
    net: FineNet,
    stages: usize,
    shared: bool,
    stage_params: Vec<ParamSet>,
}

impl FineCascade {
    /// Fresh parameters for every (unshared) stage.
    pub fn new_initialized(net: FineNet, stages: usize, shared: bool, seed: u64) -> FineCascade {
        assert!(stages >= 1);
        let sets = if shared { 1 } else { stages };
        let stage_params = (0..sets).map(|i| net.init_params(derive_seed(seed, i as u64))).collect();
        FineCascade {
            net,
            stages,
            shared,
            stage_params,
        }
    }

    /// Stage 1 reuses trained parameters; extra unshared stages start
    /// fresh from `seed`.
    pub fn from_trained(
        net: FineNet,
        trained: ParamSet,
        stages: usize,
        shared: bool,
        seed: u64,
    ) -> FineCascade {
        assert!(stages >= 1);
        let mut stage_params = vec![trained];
        if !shared {
            for i in 1..stages {
                stage_params.push(net.init_params(derive_seed(seed, i as u64)));
            }
        }
        FineCascade {
            net,
            stages,
            shared,
            stage_params,
        }
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn shared(&self) -> bool {
        self.shared
    }

    pub fn param_count(&self) -> usize {
        self.stage_params.iter().map(|p| p.numel()).sum()
    }

    /// Run all stages; returns per-stage (full, half) outputs, last one
    /// being the final restoration.
    pub fn forward(
        &self,
        tape: &mut Tape,
        x: Var,
        coarse: Var,
        probs: Var,
    ) -> Result<Vec<(Var, Var)>> {
        let mut outs = Vec::with_capacity(self.stages);
        let mut prev = coarse;
        for i in 0..self.stages {
            let set = if self.shared { &self.stage_params[0] } else { &self.stage_params[i] };
            let vars = set.register(tape, false);
            let (y, y_half) = self.net.forward(tape, &vars, x, prev, probs)?;
            outs.push((y, y_half));
            prev = y;
        }
        Ok(outs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::config::DeblurNetConfig;
    use crate::nn::Tensor;

    fn inputs(tape: &mut Tape, k: usize) -> (Var, Var, Var) {
        let x = tape.constant(Tensor::filled(&[1, 3, 16, 16], 0.3));
        let c = tape.constant(Tensor::filled(&[1, 3, 16, 16], 0.5));
        let mut p = Tensor::zeros(&[1, k, 16, 16]);
        for v in p.data_mut()[..256].iter_mut() {
            *v = 1.0;
        }
        let p = tape.constant(p);
        (x, c, p)
    }

    #[test]
    fn single_stage_equals_plain_fine_forward() {
        let net = FineNet::new(DeblurNetConfig::tiny(), 11).unwrap();
        let params = net.init_params(4);
        let cascade = FineCascade::from_trained(
            FineNet::new(DeblurNetConfig::tiny(), 11).unwrap(),
            params.clone(),
            1,
            false,
            9,
        );
        let mut tape = Tape::new();
        let (x, c, p) = inputs(&mut tape, 11);
        let outs = cascade.forward(&mut tape, x, c, p).unwrap();
        assert_eq!(outs.len(), 1);
        let direct_vars = params.register(&mut tape, false);
        let (y, _) = net.forward(&mut tape, &direct_vars, x, c, p).unwrap();
        assert_eq!(tape.value(outs[0].0).data(), tape.value(y).data());
    }

    #[test]
    fn parameter_counts_double_unshared_and_stay_flat_shared() {
        let mk = || FineNet::new(DeblurNetConfig::tiny(), 11).unwrap();
        let single = FineCascade::new_initialized(mk(), 1, false, 1);
        let double = FineCascade::new_initialized(mk(), 2, false, 1);
        let shared = FineCascade::new_initialized(mk(), 2, true, 1);
        assert_eq!(double.param_count(), 2 * single.param_count());
        assert_eq!(shared.param_count(), single.param_count());
    }

    #[test]
    fn later_stages_consume_previous_output() {
        let net = FineNet::new(DeblurNetConfig::tiny(), 11).unwrap();
        let cascade = FineCascade::new_initialized(net, 2, true, 3);
        let mut tape = Tape::new();
        let (x, c, p) = inputs(&mut tape, 11);
        let outs = cascade.forward(&mut tape, x, c, p).unwrap();
        assert_eq!(outs.len(), 2);
        // stage outputs differ because stage 2 sees stage 1's output
        assert_ne!(
            tape.value(outs[0].0).data(),
            tape.value(outs[1].0).data()
        );
        assert!(tape.value(outs[1].0).all_finite());
    }
}
