//! Encoder-decoder parsing network with skip connections: stride-2
//! convolutions down, transposed convolutions up, encoder features
//! concatenated into the decoder, 1x1 head, per-pixel softmax.

use crate::dataset::manifest::derive_seed;
use crate::error::{Error, Result};
use crate::networks::config::ParsingNetConfig;
use crate::networks::params::{ParamSet, VarCursor};
use crate::nn::{init, Tape, Tensor, Var};

pub struct ParsingNet {
    cfg: ParsingNetConfig,
}

impl ParsingNet {
    pub fn new(cfg: ParsingNetConfig) -> Result<ParsingNet> {
        cfg.validate()?;
        Ok(ParsingNet { cfg })
    }

    pub fn config(&self) -> &ParsingNetConfig {
        &self.cfg
    }

    pub fn num_classes(&self) -> usize {
        self.cfg.num_classes
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        fn conv(
            set: &mut ParamSet,
            name: String,
            cout: usize,
            cin: usize,
            k: usize,
            seed: u64,
            counter: &mut u64,
        ) {
            set.push(
                format!("{name}/weight"),
                init::he_normal(&[cout, cin, k, k], cin * k * k, derive_seed(seed, *counter)),
            );
            *counter += 1;
            set.push(format!("{name}/bias"), Tensor::zeros(&[cout]));
        }
        fn convt(
            set: &mut ParamSet,
            name: String,
            cin: usize,
            cout: usize,
            k: usize,
            seed: u64,
            counter: &mut u64,
        ) {
            set.push(
                format!("{name}/weight"),
                init::he_normal(&[cin, cout, k, k], cin * k * k, derive_seed(seed, *counter)),
            );
            *counter += 1;
            set.push(format!("{name}/bias"), Tensor::zeros(&[cout]));
        }

        let mut set = ParamSet::new();
        let mut counter = 0u64;
        let chans = &self.cfg.encoder_channels;
        let ku = self.cfg.upsample_kernel;
        let mut prev = 3;
        for (i, &c) in chans.iter().enumerate() {
            conv(&mut set, format!("enc{i}"), c, prev, 3, seed, &mut counter);
            prev = c;
        }
        for i in (0..chans.len() - 1).rev() {
            convt(&mut set, format!("dec{i}/up"), chans[i + 1], chans[i], ku, seed, &mut counter);
            conv(&mut set, format!("dec{i}/fuse"), chans[i], 2 * chans[i], 3, seed, &mut counter);
        }
        convt(&mut set, "final/up".into(), chans[0], chans[0], ku, seed, &mut counter);
        conv(&mut set, "head".into(), self.cfg.num_classes, chans[0], 1, seed, &mut counter);
        set
    }

    /// Probability volume [N, K, H, W], softmax-normalized per pixel.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], image: Var) -> Result<Var> {
        let (_, c, h, w) = tape.value(image).dims4();
        if c != 3 {
            return Err(Error::shape(format!("parsing input has {c} channels, expected 3")));
        }
        let f = self.cfg.stride_factor();
        if h % f != 0 || w % f != 0 {
            return Err(Error::invalid(format!(
                "parsing input {h}x{w} not divisible by {f}"
            )));
        }
        let stages = self.cfg.encoder_channels.len();
        let ku = self.cfg.upsample_kernel;
        let mut cur = VarCursor::new(vars);
        let mut skips = Vec::with_capacity(stages);
        let mut h_var = image;
        for _ in 0..stages {
            let (wv, bv) = (cur.next(), cur.next());
            let y = tape.conv2d(h_var, wv, bv, 2, 1);
            h_var = tape.relu(y);
            skips.push(h_var);
        }
        for i in (0..stages - 1).rev() {
            let (wv, bv) = (cur.next(), cur.next());
            let up = tape.conv_transpose2d(h_var, wv, bv, 2, ku / 2 - 1);
            let up = tape.relu(up);
            let cat = tape.concat_channels(&[up, skips[i]]);
            let (wv, bv) = (cur.next(), cur.next());
            let fused = tape.conv2d(cat, wv, bv, 1, 1);
            h_var = tape.relu(fused);
        }
        let (wv, bv) = (cur.next(), cur.next());
        let up = tape.conv_transpose2d(h_var, wv, bv, 2, ku / 2 - 1);
        let up = tape.relu(up);
        let (wv, bv) = (cur.next(), cur.next());
        let logits = tape.conv2d(up, wv, bv, 1, 0);
        cur.finish();
        Ok(tape.softmax_channels(logits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::config::ParsingNetConfig;

    #[test]
    fn probabilities_sum_to_one_and_shapes_hold() {
        let net = ParsingNet::new(ParsingNetConfig::tiny()).unwrap();
        let params = net.init_params(5);
        for hw in [32usize, 64] {
            let mut tape = Tape::new();
            let vars = params.register(&mut tape, false);
            let x = tape.constant(Tensor::filled(&[1, 3, hw, hw], 0.5));
            let p = net.forward(&mut tape, &vars, x).unwrap();
            let t = tape.value(p);
            assert_eq!(t.shape(), &[1, 11, hw, hw]);
            assert!(t.all_finite());
            let plane = hw * hw;
            for px in 0..plane {
                let sum: f64 = (0..11).map(|k| t.data()[k * plane + px]).sum();
                assert!((sum - 1.0).abs() < 1e-5, "pixel {px}: sum {sum}");
                for k in 0..11 {
                    let v = t.data()[k * plane + px];
                    assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }

    #[test]
    fn uniform_gray_input_gives_finite_entropy_distribution() {
        let net = ParsingNet::new(ParsingNetConfig::tiny()).unwrap();
        let params = net.init_params(9);
        let mut tape = Tape::new();
        let vars = params.register(&mut tape, false);
        let x = tape.constant(Tensor::filled(&[1, 3, 32, 32], 0.5));
        let p = net.forward(&mut tape, &vars, x).unwrap();
        let t = tape.value(p);
        let entropy: f64 = t
            .data()
            .iter()
            .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 })
            .sum();
        assert!(entropy.is_finite() && entropy > 0.0);
    }

    #[test]
    fn indivisible_input_is_rejected() {
        let net = ParsingNet::new(ParsingNetConfig::tiny()).unwrap();
        let params = net.init_params(5);
        let mut tape = Tape::new();
        let vars = params.register(&mut tape, false);
        let x = tape.constant(Tensor::zeros(&[1, 3, 20, 20])); // 20 % 8 != 0
        assert!(net.forward(&mut tape, &vars, x).is_err());
    }
}
