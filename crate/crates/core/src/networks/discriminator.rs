//! Strided-convolution discriminator: stride-2 conv + rectifier stack,
//! global average pooling, affine head, sigmoid scalar per image.

use crate::dataset::manifest::derive_seed;
use crate::error::{Error, Result};
use crate::networks::config::DiscriminatorConfig;
use crate::networks::params::{ParamSet, VarCursor};
use crate::nn::{init, Tape, Tensor, Var};

pub struct Discriminator {
    cfg: DiscriminatorConfig,
}

impl Discriminator {
    pub fn new(cfg: DiscriminatorConfig) -> Result<Discriminator> {
        cfg.validate()?;
        Ok(Discriminator { cfg })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut set = ParamSet::new();
        let mut counter = 0u64;
        let k = self.cfg.kernel;
        let mut prev = 3;
        for (i, &c) in self.cfg.channels.iter().enumerate() {
            set.push(
                format!("layer{i}/weight"),
                init::he_normal(&[c, prev, k, k], prev * k * k, derive_seed(seed, counter)),
            );
            counter += 1;
            set.push(format!("layer{i}/bias"), Tensor::zeros(&[c]));
            prev = c;
        }
        set.push(
            "head/weight".to_string(),
            init::he_normal(&[prev], prev, derive_seed(seed, counter)),
        );
        set.push("head/bias".to_string(), Tensor::zeros(&[1]));
        set
    }

    /// Per-image probability of being real: [N] values strictly in (0, 1).
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], image: Var) -> Result<Var> {
        let (_, c, h, w) = tape.value(image).dims4();
        if c != 3 {
            return Err(Error::shape(format!(
                "discriminator input has {c} channels, expected 3"
            )));
        }
        if h != self.cfg.input_size || w != self.cfg.input_size {
            return Err(Error::shape(format!(
                "discriminator input {h}x{w}, configured for {0}x{0}",
                self.cfg.input_size
            )));
        }
        let k = self.cfg.kernel;
        let mut cur = VarCursor::new(vars);
        let mut hv = image;
        for _ in 0..self.cfg.strided_layers {
            let (wv, bv) = (cur.next(), cur.next());
            let y = tape.conv2d(hv, wv, bv, 2, k / 2);
            hv = tape.relu(y);
        }
        let pooled = tape.global_avg_pool(hv);
        let (wv, bv) = (cur.next(), cur.next());
        let logits = tape.affine_vec(pooled, wv, bv);
        cur.finish();
        Ok(tape.sigmoid(logits))
    }
}
