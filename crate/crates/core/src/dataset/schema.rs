//! Semantic label schema and binary component masks.
//!
//! The default schema has 11 classes (background, skin, brows, eyes,
//! nose, lips, teeth, hair). The eight structural-loss components are the
//! thin facial parts; hair, skin and background are excluded from the
//! structural loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LabelMap;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LabelSchema {
    pub num_classes: usize,
    /// Classes receiving the local structural loss, in reporting order.
    pub component_classes: Vec<u8>,
    pub class_names: Vec<String>,
    pub background_class: u8,
}

impl Default for LabelSchema {
    fn default() -> Self {
        let class_names = [
            "background",
            "skin",
            "left_eyebrow",
            "right_eyebrow",
            "left_eye",
            "right_eye",
            "nose",
            "upper_lip",
            "teeth",
            "lower_lip",
            "hair",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        LabelSchema {
            num_classes: 11,
            // left eye, right eye, left brow, right brow, nose,
            // upper lip, lower lip, teeth
            component_classes: vec![4, 5, 2, 3, 6, 7, 9, 8],
            class_names,
            background_class: 0,
        }
    }
}

impl LabelSchema {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::invalid("schema needs at least one class"));
        }
        if self.class_names.len() != self.num_classes {
            return Err(Error::invalid(format!(
                "schema has {} names for {} classes",
                self.class_names.len(),
                self.num_classes
            )));
        }
        let mut seen = vec![false; self.num_classes];
        for &c in &self.component_classes {
            if c as usize >= self.num_classes {
                return Err(Error::invalid(format!(
                    "component class {c} outside [0, {})",
                    self.num_classes
                )));
            }
            if seen[c as usize] {
                return Err(Error::invalid(format!("duplicate component class {c}")));
            }
            seen[c as usize] = true;
        }
        if (self.background_class as usize) >= self.num_classes {
            return Err(Error::invalid("background class outside schema"));
        }
        Ok(())
    }

    pub fn class_name(&self, id: u8) -> &str {
        &self.class_names[id as usize]
    }
}

/// Binary mask of one facial component with its pixel area.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMask {
    pub class_id: u8,
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
    pub area: usize,
}

impl ComponentMask {
    /// 0/1 plane for masked losses.
    pub fn to_plane(&self) -> Vec<f64> {
        self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// One mask per component class present in the label map; absent
/// components are omitted, so every returned mask has `area >= 1`.
pub fn extract_masks(labels: &LabelMap, schema: &LabelSchema) -> Vec<ComponentMask> {
    let mut out = Vec::new();
    for &class_id in &schema.component_classes {
        let mask: Vec<bool> = labels.classes.iter().map(|&c| c == class_id).collect();
        let area = mask.iter().filter(|&&b| b).count();
        if area > 0 {
            out.push(ComponentMask {
                class_id,
                height: labels.height,
                width: labels.width,
                mask,
                area,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schema_is_valid_with_8_components() {
        let s = LabelSchema::default();
        s.validate().unwrap();
        assert_eq!(s.num_classes, 11);
        assert_eq!(s.component_classes.len(), 8);
    }

    #[test]
    fn all_background_yields_no_masks() {
        let labels = LabelMap::new(6, 6);
        assert!(extract_masks(&labels, &LabelSchema::default()).is_empty());
    }

    #[test]
    fn four_pixel_component_has_area_4() {
        let mut labels = LabelMap::new(8, 8);
        for (y, x) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            labels.set(y, x, 4); // left eye
        }
        let masks = extract_masks(&labels, &LabelSchema::default());
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].class_id, 4);
        assert_eq!(masks[0].area, 4);
    }

    #[test]
    fn masks_of_distinct_classes_are_disjoint() {
        let mut labels = LabelMap::new(8, 8);
        for i in 0..64 {
            labels.classes[i] = (i % 11) as u8;
        }
        let masks = extract_masks(&labels, &LabelSchema::default());
        for p in 0..64 {
            let covering = masks.iter().filter(|m| m.mask[p]).count();
            assert!(covering <= 1);
        }
        for m in &masks {
            assert_eq!(m.area, m.mask.iter().filter(|&&b| b).count());
        }
    }

    #[test]
    fn bad_schemas_are_rejected()  {
        let mut s = LabelSchema::default();
        s.component_classes.push(99);
        assert!(s.validate().is_err());
        let mut s = LabelSchema::default();
        s.component_classes.push(4);
        assert!(s.validate().is_err());
    }
}
