//! The five training losses and their weighted combination.
//!
//! Conventions: content and perceptual terms are means over all elements;
//! the local structural term is a sum over masked elements (so the
//! adaptive weight c/A exactly cancels component area); parsing loss is a
//! mean over pixels; log arguments are clamped at `LOG_EPS`.

pub mod extractor;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::schema::ComponentMask;
use crate::error::{Error, Result};
use crate::image::LabelMap;
use crate::nn::{Tape, Tensor, Var};

pub use extractor::{FeatureExtractor, FeatureExtractorConfig};

pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LossWeights {
    pub lambda_structural: f64,
    pub lambda_parsing: f64,
    pub lambda_perceptual: f64,
    pub lambda_adversarial: f64,
    /// Numerator of the adaptive component weight c / A.
    pub structural_constant: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_structural: 50.0,
            lambda_parsing: 1e-4,
            lambda_perceptual: 1e-5,
            lambda_adversarial: 5e-5,
            structural_constant: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_structural,
            self.lambda_parsing,
            self.lambda_perceptual,
            self.lambda_adversarial,
            self.structural_constant,
        ];
        if all.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralWeightMode {
    Equal,
    Adaptive,
}

/// Cross-entropy against hard labels, averaged over pixels; one label map
/// per batch sample.
pub fn parsing_loss(tape: &mut Tape, probs: Var, gt: &[LabelMap]) -> Result<Var> {
    let (n, _, h, w) = tape.value(probs).dims4();
    if gt.len() != n {
        return Err(Error::shape(format!("{} label maps for batch of {n}", gt.len())));
    }
    let mut terms = Vec::with_capacity(n);
    for (i, labels) in gt.iter().enumerate() {
        if (labels.height, labels.width) != (h, w) {
            return Err(Error::shape(format!(
                "label map {i} is {}x{}, probabilities are {h}x{w}",
                labels.height, labels.width
            )));
        }
        let sample = tape.select_batch(probs, i);
        let ce = tape.cross_entropy_mean(sample, labels, LOG_EPS);
        terms.push((ce, 1.0 / n as f64));
    }
    Ok(tape.weighted_sum(&terms))
}

/// Sum of per-pair mean absolute errors; the caller lists one
/// (prediction, ground truth) pair per supervised scale.
pub fn content_loss(tape: &mut Tape, pairs: &[(Var, Var)]) -> Result<Var> {
    if pairs.is_empty() {
        return Err(Error::invalid("content loss needs at least one pair"));
    }
    let mut terms = Vec::with_capacity(pairs.len());
    for &(pred, gt) in pairs {
        if tape.value(pred).shape() != tape.value(gt).shape() {
            return Err(Error::shape("content pair shapes differ"));
        }
        let mae = tape.mean_abs_diff(pred, gt);
        terms.push((mae, 1.0));
    }
    Ok(tape.weighted_sum(&terms))
}

/// Adaptive component weight c / A.
pub fn adaptive_weight(mask: &ComponentMask, c: f64) -> f64 {
    debug_assert!(mask.area >= 1);
    c / mask.area as f64
}

/// Local structural loss: sum over components of w_k * sum(mask ⊙ |y - gt|),
/// averaged over the batch. `masks[i]` lists sample i's components at the
/// same resolution as `y`; samples without components contribute zero.
pub fn structural_loss(
    tape: &mut Tape,
    y: Var,
    y_gt: Var,
    masks: &[Vec<ComponentMask>],
    mode: StructuralWeightMode,
    c: f64,
) -> Result<Var> {
    let (n, _, h, w) = tape.value(y).dims4();
    if tape.value(y).shape() != tape.value(y_gt).shape() {
        return Err(Error::shape("structural loss shapes differ"));
    }
    if masks.len() != n {
        return Err(Error::shape(format!("{} mask lists for batch of {n}", masks.len())));
    }
    let mut terms = Vec::new();
    for (i, sample_masks) in masks.iter().enumerate() {
        if sample_masks.is_empty() {
            continue;
        }
        let yi = tape.select_batch(y, i);
        let gi = tape.select_batch(y_gt, i);
        for m in sample_masks {
            if (m.height, m.width) != (h, w) {
                return Err(Error::shape(format!(
                    "mask for class {} is {}x{}, images are {h}x{w}",
                    m.class_id, m.height, m.width
                )));
            }
            let weight = match mode {
                StructuralWeightMode::Equal => 1.0,
                StructuralWeightMode::Adaptive => adaptive_weight(m, c),
            };
            let term = tape.masked_sum_abs_diff(yi, gi, Arc::new(m.to_plane()));
            terms.push((term, weight / n as f64));
        }
    }
    if terms.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    Ok(tape.weighted_sum(&terms))
}

/// Sum over the extractor's two taps of mean absolute feature
/// differences.
pub fn perceptual_loss(
    tape: &mut Tape,
    y: Var,
    y_gt: Var,
    fx: &FeatureExtractor,
    fx_vars: &[Var],
) -> Result<Var> {
    if tape.value(y).shape() != tape.value(y_gt).shape() {
        return Err(Error::shape("perceptual loss shapes differ"));
    }
    let (y1, y2) = fx.forward_taps(tape, fx_vars, y)?;
    let (g1, g2) = fx.forward_taps(tape, fx_vars, y_gt)?;
    let t1 = tape.mean_abs_diff(y1, g1);
    let t2 = tape.mean_abs_diff(y2, g2);
    Ok(tape.weighted_sum(&[(t1, 1.0), (t2, 1.0)]))
}

/// Discriminator and generator objectives from per-image probabilities:
/// L_D = -log d_real - log(1 - d_fake), L_G = -log d_fake (batch means).
pub fn adversarial_losses(tape: &mut Tape, d_real: Var, d_fake: Var) -> (Var, Var) {
    let real_term = tape.neg_log_mean(d_real, LOG_EPS);
    let fake_term = tape.neg_log_one_minus_mean(d_fake, LOG_EPS);
    let loss_d = tape.weighted_sum(&[(real_term, 1.0), (fake_term, 1.0)]);
    let loss_g = tape.neg_log_mean(d_fake, LOG_EPS);
    (loss_d, loss_g)
}

/// Which losses a stage of the progressive schedule optimizes.
pub fn stage_active_terms(stage: u8) -> &'static [LossTermId] {
    use LossTermId::*;
    match stage {
        1 => &[Content],
        2 => &[Parsing],
        3 => &[Content, Structural, Perceptual, Adversarial],
        4 => &[Content, Structural, Parsing, Perceptual, Adversarial],
        _ => panic!("stage must be 1..=4, got {stage}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTermId {
    Content,
    Structural,
    Parsing,
    Perceptual,
    Adversarial,
}

/// Inputs to the combined objective; absent terms count as zero.
#[derive(Default, Clone, Copy)]
pub struct LossTerms {
    pub content: Option<Var>,
    pub structural: Option<Var>,
    pub parsing: Option<Var>,
    pub perceptual: Option<Var>,
    pub adversarial_gen: Option<Var>,
}

/// Per-term values of one combined loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub stage: u8,
    pub content: f64,
    pub structural: f64,
    pub parsing: f64,
    pub perceptual: f64,
    pub adversarial_gen: f64,
    pub total: f64,
}

/// Combined objective: content + λ_s structural + λ_p parsing
/// + λ_vgg perceptual + λ_adv adversarial, accumulated in that order,
/// with only the stage's active terms contributing.
pub fn total_loss(
    tape: &mut Tape,
    terms: &LossTerms,
    weights: &LossWeights,
    stage: u8,
) -> (Var, LossBreakdown) {
    let active = stage_active_terms(stage);
    let pick = |id: LossTermId, v: Option<Var>| -> Option<Var> {
        if active.contains(&id) {
            v
        } else {
            None
        }
    };
    let ordered = [
        (pick(LossTermId::Content, terms.content), 1.0),
        (
            pick(LossTermId::Structural, terms.structural),
            weights.lambda_structural,
        ),
        (pick(LossTermId::Parsing, terms.parsing), weights.lambda_parsing),
        (
            pick(LossTermId::Perceptual, terms.perceptual),
            weights.lambda_perceptual,
        ),
        (
            pick(LossTermId::Adversarial, terms.adversarial_gen),
            weights.lambda_adversarial,
        ),
    ];
    let weighted: Vec<(Var, f64)> = ordered
        .iter()
        .filter_map(|(v, w)| v.map(|v| (v, *w)))
        .collect();
    let total = if weighted.is_empty() {
        tape.constant(Tensor::scalar(0.0))
    } else {
        tape.weighted_sum(&weighted)
    };
    let value_of = |v: Option<Var>, id: LossTermId| -> f64 {
        match pick(id, v) {
            Some(v) => tape.value(v).item(),
            None => 0.0,
        }
    };
    let breakdown = LossBreakdown {
        stage,
        content: value_of(terms.content, LossTermId::Content),
        structural: value_of(terms.structural, LossTermId::Structural),
        parsing: value_of(terms.parsing, LossTermId::Parsing),
        perceptual: value_of(terms.perceptual, LossTermId::Perceptual),
        adversarial_gen: value_of(terms.adversarial_gen, LossTermId::Adversarial),
        total: tape.value(total).item(),
    };
    (total, breakdown)
}

impl LossBreakdown {
    /// The weighted per-term sum, accumulated in combination order; equal
    /// to `total` up to nothing at all — the same operations in the same
    /// order.
    pub fn recombine(&self, weights: &LossWeights) -> f64 {
        let mut acc = 0.0;
        acc += 1.0 * self.content;
        acc += weights.lambda_structural * self.structural;
        acc += weights.lambda_parsing * self.parsing;
        acc += weights.lambda_perceptual * self.perceptual;
        acc += weights.lambda_adversarial * self.adversarial_gen;
        acc
    }
}

/// One JSON line per training iteration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub stage: u8,
    #[serde(rename = "L_c")]
    pub l_c: f64,
    #[serde(rename = "L_s")]
    pub l_s: f64,
    #[serde(rename = "L_p")]
    pub l_p: f64,
    #[serde(rename = "L_vgg")]
    pub l_vgg: f64,
    #[serde(rename = "L_adv_G")]
    pub l_adv_g: f64,
    #[serde(rename = "L_adv_D")]
    pub l_adv_d: f64,
    pub total: f64,
}
