//! Two-scale deblurring towers. Scale 1 works on the 2x-downsampled
//! input and its output is upsampled bicubically into scale 2, which
//! produces the full-resolution image. Per scale: one large-kernel input
//! convolution, two plain convolutions, a stack of residual blocks, two
//! more plain convolutions and a linear 3-channel output convolution.

use crate::dataset::manifest::derive_seed;
use crate::error::{Error, Result};
use crate::networks::config::DeblurNetConfig;
use crate::networks::params::{ParamSet, VarCursor};
use crate::nn::{init, Tape, Var};

pub(crate) struct ScaleTower {
    pub name: String,
    pub in_channels: usize,
    pub cfg: DeblurNetConfig,
}

impl ScaleTower {
    pub fn declare(&self, set: &mut ParamSet, seed: u64, counter: &mut u64) {
        let c = self.cfg.base_channels;
        let mut conv = |set: &mut ParamSet, name: String, cout: usize, cin: usize, k: usize| {
            let fan_in = cin * k * k;
            set.push(
                format!("{name}/weight"),
                init::he_normal(&[cout, cin, k, k], fan_in, derive_seed(seed, *counter)),
            );
            *counter += 1;
            set.push(format!("{name}/bias"), crate::nn::Tensor::zeros(&[cout]));
        };
        conv(set, format!("{}/conv_in", self.name), c, self.in_channels, self.cfg.first_kernel);
        for i in 0..2 {
            conv(set, format!("{}/pre{i}", self.name), c, c, self.cfg.other_kernel);
        }
        for b in 0..self.cfg.resblocks_per_scale {
            conv(set, format!("{}/block{b}/conv0", self.name), c, c, self.cfg.other_kernel);
            conv(set, format!("{}/block{b}/conv1", self.name), c, c, self.cfg.other_kernel);
        }
        for i in 0..2 {
            conv(set, format!("{}/post{i}", self.name), c, c, self.cfg.other_kernel);
        }
        conv(set, format!("{}/conv_out", self.name), 3, c, self.cfg.other_kernel);
    }

    pub fn forward(&self, tape: &mut Tape, cur: &mut VarCursor, input: Var) -> Var {
        let kf = self.cfg.first_kernel;
        let ko = self.cfg.other_kernel;
        let conv_relu = |tape: &mut Tape, cur: &mut VarCursor, x: Var, k: usize| {
            let (w, b) = (cur.next(), cur.next());
            let y = tape.conv2d(x, w, b, 1, k / 2);
            tape.relu(y)
        };
        let mut h = conv_relu(tape, cur, input, kf);
        for _ in 0..2 {
            h = conv_relu(tape, cur, h, ko);
        }
        for _ in 0..self.cfg.resblocks_per_scale {
            // input + conv(relu(conv(input)))
            let (w0, b0) = (cur.next(), cur.next());
            let t = tape.conv2d(h, w0, b0, 1, ko / 2);
            let t = tape.relu(t);
            let (w1, b1) = (cur.next(), cur.next());
            let t = tape.conv2d(t, w1, b1, 1, ko / 2);
            h = tape.add(h, t);
        }
        for _ in 0..2 {
            h = conv_relu(tape, cur, h, ko);
        }
        let (w, b) = (cur.next(), cur.next());
        tape.conv2d(h, w, b, 1, ko / 2)
    }
}

fn check_even(tape: &Tape, x: Var) -> Result<(usize, usize)> {
    let (_, _, h, w) = tape.value(x).dims4();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(format!(
            "deblur towers need even spatial dims, got {h}x{w}"
        )));
    }
    Ok((h, w))
}

/// Coarse restorer: scale 1 sees the 2x-downsampled blurred image
/// (3 channels), scale 2 sees the blurred image concatenated with the
/// upsampled scale-1 output (6 channels).
pub struct CoarseNet {
    cfg: DeblurNetConfig,
    scale1: ScaleTower,
    scale2: ScaleTower,
}

impl CoarseNet {
    pub fn new(cfg: DeblurNetConfig) -> Result<CoarseNet> {
        cfg.validate()?;
        Ok(CoarseNet {
            scale1: ScaleTower {
                name: "scale1".into(),
                in_channels: 3,
                cfg: cfg.clone(),
            },
            scale2: ScaleTower {
                name: "scale2".into(),
                in_channels: 6,
                cfg: cfg.clone(),
            },
            cfg,
        })
    }

    pub fn config(&self) -> &DeblurNetConfig {
        &self.cfg
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut set = ParamSet::new();
        let mut counter = 0;
        self.scale1.declare(&mut set, seed, &mut counter);
        self.scale2.declare(&mut set, seed, &mut counter);
        set
    }

    /// Returns (full-resolution output, half-resolution output).
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<(Var, Var)> {
        check_even(tape, x)?;
        let mut cur = VarCursor::new(vars);
        let x_half = tape.downsample2(x);
        let y_half = self.scale1.forward(tape, &mut cur, x_half);
        let up = tape.upsample2(y_half);
        let input2 = tape.concat_channels(&[x, up]);
        let y = self.scale2.forward(tape, &mut cur, input2);
        cur.finish();
        Ok((y, y_half))
    }
}

/// Fine restorer conditioned on the coarse output and the semantic
/// probability maps: scale 1 consumes (x, coarse, probs) downsampled
/// (6 + K channels), scale 2 consumes (x, coarse, upsampled scale-1
/// output, probs) at full resolution (9 + K channels).
pub struct FineNet {
    cfg: DeblurNetConfig,
    num_classes: usize,
    scale1: ScaleTower,
    scale2: ScaleTower,
}

impl FineNet {
    pub fn new(cfg: DeblurNetConfig, num_classes: usize) -> Result<FineNet> {
        cfg.validate()?;
        if num_classes == 0 {
            return Err(Error::Config("fine tower needs at least one class".into()));
        }
        Ok(FineNet {
            scale1: ScaleTower {
                name: "scale1".into(),
                in_channels: 6 + num_classes,
                cfg: cfg.clone(),
            },
            scale2: ScaleTower {
                name: "scale2".into(),
                in_channels: 9 + num_classes,
                cfg: cfg.clone(),
            },
            cfg,
            num_classes,
        })
    }

    pub fn config(&self) -> &DeblurNetConfig {
        &self.cfg
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Channel counts of the two scale inputs (17 and 20 for K = 11).
    pub fn scale_input_channels(&self) -> (usize, usize) {
        (self.scale1.in_channels, self.scale2.in_channels)
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut set = ParamSet::new();
        let mut counter = 0;
        self.scale1.declare(&mut set, seed, &mut counter);
        self.scale2.declare(&mut set, seed, &mut counter);
        set
    }

    /// Returns (full-resolution output, half-resolution output).
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        coarse: Var,
        probs: Var,
    ) -> Result<(Var, Var)> {
        let (h, w) = check_even(tape, x)?;
        let (_, pc, ph, pw) = tape.value(probs).dims4();
        if pc != self.num_classes {
            return Err(Error::shape(format!(
                "probability map has {pc} channels, tower built for {}",
                self.num_classes
            )));
        }
        if (ph, pw) != (h, w) || tape.value(coarse).dims4() != tape.value(x).dims4() {
            return Err(Error::shape("fine tower inputs disagree in shape"));
        }
        let mut cur = VarCursor::new(vars);
        let x_half = tape.downsample2(x);
        let coarse_half = tape.downsample2(coarse);
        let probs_half = tape.downsample2(probs);
        let input1 = tape.concat_channels(&[x_half, coarse_half, probs_half]);
        let y_half = self.scale1.forward(tape, &mut cur, input1);
        let up = tape.upsample2(y_half);
        let input2 = tape.concat_channels(&[x, coarse, up, probs]);
        let y = self.scale2.forward(tape, &mut cur, input2);
        cur.finish();
        Ok((y, y_half))
    }
}
