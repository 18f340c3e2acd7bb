//! Checked wrapper for semantic probability volumes.

use crate::error::{Error, Result};
use crate::image::LabelMap;
use crate::nn::Tensor;

/// [N, K, H, W] class probabilities, per-pixel sums equal to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticProbMap {
    tensor: Tensor,
}

impl SemanticProbMap {
    pub fn new(tensor: Tensor) -> Result<SemanticProbMap> {
        let (_, _, _, _) = tensor.dims4();
        let map = SemanticProbMap { tensor };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k, h, w) = self.tensor.dims4();
        let plane = h * w;
        let d = self.tensor.data();
        for ni in 0..n {
            for p in 0..plane {
                let mut sum = 0.0;
                for c in 0..k {
                    let v = d[((ni * k) + c) * plane + p];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::invalid(format!(
                            "probability {v} outside [0, 1] at pixel {p}"
                        )));
                    }
                    sum += v;
                }
                if (sum - 1.0).abs() > 1e-5 {
                    return Err(Error::invalid(format!(
                        "pixel {p} probabilities sum to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn num_classes(&self) -> usize {
        self.tensor.dims4().1
    }

    /// Hard labels by per-pixel argmax (first max wins on ties).
    pub fn argmax_labels(&self, sample: usize) -> LabelMap {
        argmax_labels(&self.tensor, sample)
    }
}

/// Per-pixel argmax over the channel axis of an [N, K, H, W] tensor.
pub fn argmax_labels(probs: &Tensor, sample: usize) -> LabelMap {
    let (n, k, h, w) = probs.dims4();
    assert!(sample < n);
    assert!(k <= 256, "label maps store u8 class ids");
    let plane = h * w;
    let d = probs.data();
    let mut out = LabelMap::new(h, w);
    for p in 0..plane {
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for c in 0..k {
            let v = d[((sample * k) + c) * plane + p];
            if v > best_v {
                best_v = v;
                best = c;
            }
        }
        out.classes[p] = best as u8;
    }
    out
}

/// Masks from a probability volume: argmax first, then per-component
/// binary masks.
pub fn extract_masks_from_probs(
    probs: &SemanticProbMap,
    sample: usize,
    schema: &crate::dataset::schema::LabelSchema,
) -> Vec<crate::dataset::schema::ComponentMask> {
    crate::dataset::schema::extract_masks(&probs.argmax_labels(sample), schema)
}
