//! Per-component parsing accuracy: pixel-level F-scores.

use serde::{Deserialize, Serialize};

use crate::dataset::schema::LabelSchema;
use crate::error::{Error, Result};
use crate::image::LabelMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FscoreReport {
    /// Per class id: `None` when the class is absent from both maps.
    pub per_class: Vec<Option<f64>>,
    /// Arithmetic mean over non-background classes present in at least
    /// one map.
    pub average: f64,
}

/// F = 2 TP / (2 TP + FP + FN) per class. A class absent from both maps
/// is excluded; absent from exactly one scores 0.
pub fn component_fscore(
    pred: &LabelMap,
    gt: &LabelMap,
    schema: &LabelSchema,
) -> Result<FscoreReport> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(Error::shape("label maps differ in shape"));
    }
    let k = schema.num_classes;
    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (p, g) in pred.classes.iter().zip(&gt.classes) {
        let (p, g) = (*p as usize, *g as usize);
        if p >= k || g >= k {
            return Err(Error::invalid(format!(
                "label outside schema with {k} classes"
            )));
        }
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let mut per_class = Vec::with_capacity(k);
    let mut sum = 0.0;
    let mut counted = 0usize;
    for c in 0..k {
        let denom = 2 * tp[c] + fp[c] + fn_[c];
        let f = if denom == 0 {
            None
        } else {
            Some(2.0 * tp[c] as f64 / denom as f64)
        };
        if let Some(v) = f {
            if c != schema.background_class as usize {
                sum += v;
                counted += 1;
            }
        }
        per_class.push(f);
    }
    let average = if counted > 0 { sum / counted as f64 } else { 0.0 };
    Ok(FscoreReport { per_class, average })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> LabelSchema {
        LabelSchema::default()
    }

    #[test]
    fn perfect_prediction_scores_one_everywhere() {
        let mut gt = LabelMap::new(8, 8);
        for (i, c) in gt.classes.iter_mut().enumerate() {
            *c = (i % 5) as u8;
        }
        let rep = component_fscore(&gt, &gt, &schema()).unwrap();
        for c in 0..5 {
            assert_eq!(rep.per_class[c], Some(1.0));
        }
        assert!(rep.per_class[6].is_none());
        assert_eq!(rep.average, 1.0);
    }

    #[test]
    fn fully_swapped_classes_score_zero() {
        let mut gt = LabelMap::new(4, 4);
        let mut pred = LabelMap::new(4, 4);
        for i in 0..16 {
            gt.classes[i] = if i < 8 { 4 } else { 5 };
            pred.classes[i] = if i < 8 { 5 } else { 4 };
        }
        let rep = component_fscore(&pred, &gt, &schema()).unwrap();
        assert_eq!(rep.per_class[4], Some(0.0));
        assert_eq!(rep.per_class[5], Some(0.0));
        assert_eq!(rep.average, 0.0);
    }

    #[test]
    fn hand_counted_confusion_matrix() {
        // class 4: TP=6, FP=2, FN=2 -> F = 12/16 = 0.75
        let mut gt = LabelMap::new(8, 8);
        let mut pred = LabelMap::new(8, 8);
        for i in 0..6 {
            gt.classes[i] = 4;
            pred.classes[i] = 4;
        }
        for i in 6..8 {
            gt.classes[i] = 4;
            pred.classes[i] = 0;
        }
        for i in 8..10 {
            gt.classes[i] = 0;
            pred.classes[i] = 4;
        }
        let rep = component_fscore(&pred, &gt, &schema()).unwrap();
        assert_eq!(rep.per_class[4], Some(0.75));
    }

    #[test]
    fn class_absent_in_one_map_scores_zero() {
        let mut gt = LabelMap::new(4, 4);
        gt.classes[0] = 6;
        let pred = LabelMap::new(4, 4); // never predicts class 6
        let rep = component_fscore(&pred, &gt, &schema()).unwrap();
        assert_eq!(rep.per_class[6], Some(0.0));
    }

    #[test]
    fn average_is_arithmetic_mean_of_present_nonbackground_classes() {
        let mut gt = LabelMap::new(4, 4);
        let mut pred = LabelMap::new(4, 4);
        // class 1 perfect on 4 px, class 2 half-right
        for i in 0..4 {
            gt.classes[i] = 1;
            pred.classes[i] = 1;
        }
        gt.classes[4] = 2;
        gt.classes[5] = 2;
        pred.classes[4] = 2; // one hit, one miss (pred background) -> F = 2/3
        let rep = component_fscore(&pred, &gt, &schema()).unwrap();
        let f2 = rep.per_class[2].unwrap();
        assert!((f2 - 2.0 / 3.0).abs() < 1e-12);
        assert!((rep.average - (1.0 + f2) / 2.0).abs() < 1e-12);
    }
}
