//! End-to-end inference: blurred image -> coarse restoration -> semantic
//! probabilities -> fine restoration. Inputs of arbitrary size are
//! mirror-padded to even dims (and the parser's input further to its
//! stride multiple) and cropped back afterwards.

use std::path::Path;

use crate::error::Result;
use crate::image::Image;
use crate::networks::params::{load_checkpoint, ModelParams};
use crate::networks::prob::SemanticProbMap;
use crate::networks::{CoarseNet, FineNet, NetworkConfig, ParsingNet};
use crate::nn::{Tape, Tensor};

pub struct Restored {
    pub image: Image,
    pub coarse: Image,
    pub probs: SemanticProbMap,
}

pub struct Restorer {
    pub network: NetworkConfig,
    pub params: ModelParams,
    coarse: CoarseNet,
    parsing: ParsingNet,
    fine: FineNet,
}

impl Restorer {
    pub fn new(network: NetworkConfig, params: ModelParams) -> Result<Restorer> {
        network.validate()?;
        Ok(Restorer {
            coarse: CoarseNet::new(network.deblur.clone())?,
            parsing: ParsingNet::new(network.parsing.clone())?,
            fine: FineNet::new(network.deblur.clone(), network.parsing.num_classes)?,
            network,
            params,
        })
    }

    pub fn from_checkpoint(path: &Path) -> Result<Restorer> {
        let (params, network, _) = load_checkpoint(path)?;
        Restorer::new(network, params)
    }

    /// Deterministic restoration; output clamped to [0, 1] and cropped to
    /// the input size.
    pub fn restore(&self, img: &Image) -> Result<Restored> {
        let (h0, w0) = (img.height(), img.width());
        let (he, we) = (h0.next_multiple_of(2), w0.next_multiple_of(2));
        let x_img = pad_image_reflect(img, he, we);

        let mut tape = Tape::new();
        let coarse_vars = self.params.coarse.register(&mut tape, false);
        let parsing_vars = self.params.parsing.register(&mut tape, false);
        let fine_vars = self.params.fine.register(&mut tape, false);
        let x = tape.constant(Tensor::from_image(&x_img));
        let (y_c, _) = self.coarse.forward(&mut tape, &coarse_vars, x)?;

        // the parser's stride ladder needs a finer multiple
        let f = self.parsing.config().stride_factor();
        let (ph, pw) = (he.next_multiple_of(f), we.next_multiple_of(f));
        let p = if (ph, pw) == (he, we) {
            self.parsing.forward(&mut tape, &parsing_vars, y_c)?
        } else {
            let padded = pad_tensor_reflect(tape.value(y_c), ph, pw);
            let pv = tape.constant(padded);
            let p_full = self.parsing.forward(&mut tape, &parsing_vars, pv)?;
            let cropped = crop_tensor(tape.value(p_full), he, we);
            tape.constant(cropped)
        };
        let (y, _) = self.fine.forward(&mut tape, &fine_vars, x, y_c, p)?;

        let mut final_image = tape.value(y).to_image(0);
        let mut coarse_image = tape.value(y_c).to_image(0);
        let probs_tensor = crop_tensor(tape.value(p), h0, w0);
        crop_image(&mut final_image, h0, w0);
        crop_image(&mut coarse_image, h0, w0);
        final_image.clamp01();
        coarse_image.clamp01();
        Ok(Restored {
            image: final_image,
            coarse: coarse_image,
            probs: SemanticProbMap::new(probs_tensor)?,
        })
    }
}

/// Mirror the last rows/columns to grow an image to `(th, tw)`.
pub fn pad_image_reflect(img: &Image, th: usize, tw: usize) -> Image {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    assert!(th >= h && tw >= w);
    let mut out = Image::new(th, tw, c);
    for y in 0..th {
        let sy = reflect_index(y, h);
        for x in 0..tw {
            let sx = reflect_index(x, w);
            for ch in 0..c {
                out.set(y, x, ch, img.get(sy, sx, ch));
            }
        }
    }
    out
}

fn reflect_index(i: usize, len: usize) -> usize {
    if i < len {
        return i;
    }
    let over = i - len + 1;
    len.saturating_sub(1 + over.min(len - 1))
}

fn pad_tensor_reflect(t: &Tensor, th: usize, tw: usize) -> Tensor {
    let (n, c, h, w) = t.dims4();
    let mut out = Tensor::zeros(&[n, c, th, tw]);
    for nc in 0..n * c {
        for y in 0..th {
            let sy = reflect_index(y, h);
            for x in 0..tw {
                let sx = reflect_index(x, w);
                out.data_mut()[nc * th * tw + y * tw + x] = t.data()[nc * h * w + sy * w + sx];
            }
        }
    }
    out
}

fn crop_tensor(t: &Tensor, th: usize, tw: usize) -> Tensor {
    let (n, c, h, w) = t.dims4();
    assert!(th <= h && tw <= w);
    let mut out = Tensor::zeros(&[n, c, th, tw]);
    for nc in 0..n * c {
        for y in 0..th {
            for x in 0..tw {
                out.data_mut()[nc * th * tw + y * tw + x] = t.data()[nc * h * w + y * w + x];
            }
        }
    }
    out
}

fn crop_image(img: &mut Image, th: usize, tw: usize) {
    if img.height() == th && img.width() == tw {
        return;
    }
    let c = img.channels();
    let mut out = Image::new(th, tw, c);
    for y in 0..th {
        for x in 0..tw {
            for ch in 0..c {
                out.set(y, x, ch, img.get(y, x, ch));
            }
        }
    }
    *img = out;
}
