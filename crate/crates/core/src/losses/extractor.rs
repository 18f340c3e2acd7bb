//! Frozen feature extractor behind the perceptual loss: a fixed-seed
//! stack of conv/rectifier/average-pool blocks with two tap points. The
//! full-scale configuration mirrors the pool2/pool5 depths of a
//! classification backbone; a pretrained extractor can be dropped in by
//! loading its tensors into the same parameter layout.

use serde::{Deserialize, Serialize};

use crate::dataset::manifest::derive_seed;
use crate::error::{Error, Result};
use crate::networks::params::{ParamSet, VarCursor};
use crate::nn::{init, Tape, Tensor, Var};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureExtractorConfig {
    /// Channels per conv+pool block.
    pub channels: Vec<usize>,
    /// 1-based block indices of the two taps (after that block's pool).
    pub taps: (usize, usize),
    pub kernel: usize,
}

impl Default for FeatureExtractorConfig {
    fn default() -> Self {
        FeatureExtractorConfig {
            channels: vec![16, 32, 64, 64, 64],
            taps: (2, 5),
            kernel: 3,
        }
    }
}

impl FeatureExtractorConfig {
    pub fn tiny() -> Self {
        FeatureExtractorConfig {
            channels: vec![8, 16],
            taps: (1, 2),
            kernel: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.channels.len();
        let (t1, t2) = self.taps;
        if n == 0 || t1 < 1 || t2 <= t1 || t2 > n {
            return Err(Error::Config(format!(
                "extractor taps {:?} invalid for {n} blocks",
                self.taps
            )));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Config("extractor kernel must be odd".into()));
        }
        Ok(())
    }
}

pub struct FeatureExtractor {
    cfg: FeatureExtractorConfig,
    params: ParamSet,
}

impl FeatureExtractor {
    /// Build with frozen fan-in-initialized parameters.
    pub fn new(cfg: FeatureExtractorConfig, seed: u64) -> Result<FeatureExtractor> {
        cfg.validate()?;
        let mut params = ParamSet::new();
        let k = cfg.kernel;
        let mut prev = 3;
        for (i, &c) in cfg.channels.iter().enumerate() {
            params.push(
                format!("block{i}/weight"),
                init::he_normal(&[c, prev, k, k], prev * k * k, derive_seed(seed, i as u64)),
            );
            params.push(format!("block{i}/bias"), Tensor::zeros(&[c]));
            prev = c;
        }
        Ok(FeatureExtractor { cfg, params })
    }

    pub fn config(&self) -> &FeatureExtractorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Input dims must be divisible by this.
    pub fn stride_factor(&self) -> usize {
        1 << self.cfg.taps.1
    }

    /// Register the (always frozen) parameters on a tape.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.register(tape, false)
    }

    /// Activations at the two tap points.
    pub fn forward_taps(&self, tape: &mut Tape, vars: &[Var], image: Var) -> Result<(Var, Var)> {
        let (_, c, h, w) = tape.value(image).dims4();
        if c != 3 {
            return Err(Error::shape(format!("extractor input has {c} channels")));
        }
        let f = self.stride_factor();
        if h % f != 0 || w % f != 0 {
            return Err(Error::invalid(format!(
                "extractor input {h}x{w} not divisible by {f}"
            )));
        }
        let k = self.cfg.kernel;
        let mut cur = VarCursor::new(vars);
        let mut hv = image;
        let mut tap1 = None;
        let mut tap2 = None;
        for i in 0..self.cfg.channels.len() {
            let (wv, bv) = (cur.next(), cur.next());
            let y = tape.conv2d(hv, wv, bv, 1, k / 2);
            let y = tape.relu(y);
            hv = tape.avg_pool2(y);
            if i + 1 == self.cfg.taps.0 {
                tap1 = Some(hv);
            }
            if i + 1 == self.cfg.taps.1 {
                tap2 = Some(hv);
            }
        }
        cur.finish();
        Ok((tap1.expect("tap1 in range"), tap2.expect("tap2 in range")))
    }
}
