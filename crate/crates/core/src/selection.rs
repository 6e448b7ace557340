//! Top-mask selection: fuse same-class instances into class masks, rank them
//! by priority tier and area, and pick the class to filter.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::{ClassTable, PriorityTable};
use crate::raster::BinaryMask;
use crate::segmentation::SegmentationManifest;

/// Default minimum detection confidence.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("unknown class id {0}")]
    UnknownClass(u32),
}

/// Union of every surviving instance mask of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMask {
    pub class_id: u32,
    pub class_name: String,
    pub mask: BinaryMask,
    pub area: usize,
    pub instance_count: usize,
}

impl ClassMask {
    pub fn summary(&self) -> ClassSummary {
        ClassSummary {
            class_id: self.class_id,
            class_name: self.class_name.clone(),
            area: self.area,
            instance_count: self.instance_count,
        }
    }
}

/// Mask-free view of a [`ClassMask`], used for listings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class_id: u32,
    pub class_name: String,
    pub area: usize,
    pub instance_count: usize,
}

/// One `ClassMask` per class among instances scoring at least
/// `score_threshold`, sorted by class id.
pub fn compose_class_masks(manifest: &SegmentationManifest, score_threshold: f64) -> Vec<ClassMask> {
    let mut by_class: BTreeMap<u32, ClassMask> = BTreeMap::new();
    for inst in manifest
        .instances()
        .iter()
        .filter(|i| i.score >= score_threshold)
    {
        match by_class.get_mut(&inst.class_id) {
            Some(cm) => {
                cm.mask
                    .union_with(&inst.mask)
                    .expect("manifest masks share dimensions");
                cm.instance_count += 1;
            }
            None => {
                by_class.insert(
                    inst.class_id,
                    ClassMask {
                        class_id: inst.class_id,
                        class_name: inst.class_name.clone(),
                        mask: inst.mask.clone(),
                        area: 0,
                        instance_count: 1,
                    },
                );
            }
        }
    }
    by_class
        .into_values()
        .map(|mut cm| {
            cm.area = cm.mask.area();
            cm
        })
        .collect()
}

/// Sorts by priority tier, then larger area, then smaller class id.
pub fn rank_class_masks(mut masks: Vec<ClassMask>, priority: &PriorityTable) -> Vec<ClassMask> {
    masks.sort_by(|a, b| {
        priority
            .tier(a.class_id)
            .cmp(&priority.tier(b.class_id))
            .then(b.area.cmp(&a.area))
            .then(a.class_id.cmp(&b.class_id))
    });
    masks
}

/// The highest ranked non-empty class mask, or `None` when nothing survives
/// thresholding.
pub fn select_top_mask(
    manifest: &SegmentationManifest,
    score_threshold: f64,
    priority: &PriorityTable,
) -> Option<ClassMask> {
    let candidates = compose_class_masks(manifest, score_threshold)
        .into_iter()
        .filter(|cm| cm.area > 0)
        .collect();
    rank_class_masks(candidates, priority).into_iter().next()
}

/// The class mask for an explicitly requested class. Ids outside the class
/// table are an error; a known class that is absent or below threshold is
/// `Ok(None)`.
pub fn select_class_mask(
    manifest: &SegmentationManifest,
    score_threshold: f64,
    class_id: u32,
    classes: &ClassTable,
) -> Result<Option<ClassMask>, SelectionError> {
    if !classes.contains(class_id) {
        return Err(SelectionError::UnknownClass(class_id));
    }
    Ok(compose_class_masks(manifest, score_threshold)
        .into_iter()
        .find(|cm| cm.class_id == class_id))
}
