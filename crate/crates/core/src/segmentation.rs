//! Instance segmentation input: manifest files, COCO-style uncompressed RLE,
//! and the external segmenter process contract.
//!
//! A manifest is JSON of the form
//!
//! ```json
//! { "image_width": 640, "image_height": 480,
//!   "instances": [ { "class_id": 1, "class_name": "person", "score": 0.98,
//!                    "mask": { "format": "rle", "counts": [120, 30, 7] } } ] }
//! ```
//!
//! where a mask is either `{"format": "rle", "counts": [...]}` or
//! `{"format": "png", "path": "..."}`. PNG paths are resolved relative to the
//! manifest's directory; the referenced file may also be a binary PGM. RLE
//! masks may carry a COCO-style `"size": [height, width]`, which must agree
//! with the manifest dimensions.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::ClassTable;
use crate::raster::{read_mask, BinaryMask, ImageIoError};

/// Environment variable holding the default segmenter command template.
pub const SEGMENTER_ENV: &str = "MASKFX_SEGMENTER";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RleError {
    #[error("run counts sum to {sum}, expected {expected} ({width}x{height})")]
    CountSum {
        sum: i64,
        expected: i64,
        width: usize,
        height: usize,
    },
    #[error("negative run count {count} at position {index}")]
    NegativeCount { index: usize, count: i64 },
    #[error("mask dimensions must be at least 1x1")]
    EmptyDimensions,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest schema violation: {0}")]
    Schema(String),
    #[error("instance {index}: unknown mask encoding {format:?} (expected \"rle\" or \"png\")")]
    UnknownEncoding { index: usize, format: String },
    #[error(
        "instance {index}: mask is {mask_w}x{mask_h} but manifest declares {image_w}x{image_h}"
    )]
    DimensionMismatch {
        index: usize,
        mask_w: usize,
        mask_h: usize,
        image_w: usize,
        image_h: usize,
    },
    #[error("instance {index}: score {score} outside [0, 1]")]
    ScoreOutOfRange { index: usize, score: f64 },
    #[error("instance {index}: class id {class_id} not in class table")]
    UnknownClass { index: usize, class_id: u32 },
    #[error("instance {index}: {source}")]
    Rle {
        index: usize,
        #[source]
        source: RleError,
    },
    #[error("instance {index}: {source}")]
    MaskFile {
        index: usize,
        #[source]
        source: ImageIoError,
    },
}

#[derive(Debug, Error)]
pub enum SegmenterError {
    #[error("segmenter command template must contain {0} placeholder")]
    MissingPlaceholder(&'static str),
    #[error("no segmenter configured (set {SEGMENTER_ENV} or pass a command template)")]
    NotConfigured,
    #[error("failed to launch segmenter: {0}")]
    Launch(#[source] std::io::Error),
    #[error("segmenter exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("segmenter produced an invalid manifest: {0}")]
    Manifest(#[source] ManifestError),
}

/// Decodes COCO uncompressed RLE. Runs alternate zeros/ones starting with
/// zeros; pixels are enumerated column by column.
pub fn decode_rle(counts: &[i64], width: usize, height: usize) -> Result<BinaryMask, RleError> {
    if width == 0 || height == 0 {
        return Err(RleError::EmptyDimensions);
    }
    let mut sum: i64 = 0;
    for (index, &count) in counts.iter().enumerate() {
        if count < 0 {
            return Err(RleError::NegativeCount { index, count });
        }
        sum = sum.saturating_add(count);
    }
    let expected = (width * height) as i64;
    if sum != expected {
        return Err(RleError::CountSum {
            sum,
            expected,
            width,
            height,
        });
    }
    let mut bits = vec![false; width * height];
    let mut k = 0usize;
    for (i, &count) in counts.iter().enumerate() {
        let count = count as usize;
        if i % 2 == 1 {
            for j in k..k + count {
                let (col, row) = (j / height, j % height);
                bits[row * width + col] = true;
            }
        }
        k += count;
    }
    Ok(BinaryMask::new(width, height, bits).expect("dimensions checked"))
}

/// Encodes a mask as canonical COCO uncompressed RLE. The first run counts
/// zeros and may be empty; no other run is empty.
pub fn encode_rle(mask: &BinaryMask) -> Vec<i64> {
    let (w, h) = mask.dimensions();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0i64;
    for col in 0..w {
        for row in 0..h {
            let v = mask.get(col, row);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    counts
}

/// One detected object.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub class_id: u32,
    pub class_name: String,
    pub score: f64,
    pub mask: BinaryMask,
}

/// Validated segmentation output for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationManifest {
    image_width: usize,
    image_height: usize,
    instances: Vec<InstanceAnnotation>,
}

impl SegmentationManifest {
    /// Validates every instance against the manifest dimensions, the score
    /// range and the class table.
    pub fn new(
        image_width: usize,
        image_height: usize,
        instances: Vec<InstanceAnnotation>,
        classes: &ClassTable,
    ) -> Result<Self, ManifestError> {
        if image_width == 0 || image_height == 0 {
            return Err(ManifestError::Schema(format!(
                "image dimensions must be positive, got {image_width}x{image_height}"
            )));
        }
        for (index, inst) in instances.iter().enumerate() {
            if !(0.0..=1.0).contains(&inst.score) {
                return Err(ManifestError::ScoreOutOfRange {
                    index,
                    score: inst.score,
                });
            }
            if !classes.contains(inst.class_id) {
                return Err(ManifestError::UnknownClass {
                    index,
                    class_id: inst.class_id,
                });
            }
            let (mask_w, mask_h) = inst.mask.dimensions();
            if (mask_w, mask_h) != (image_width, image_height) {
                return Err(ManifestError::DimensionMismatch {
                    index,
                    mask_w,
                    mask_h,
                    image_w: image_width,
                    image_h: image_height,
                });
            }
        }
        Ok(Self {
            image_width,
            image_height,
            instances,
        })
    }

    /// A manifest with no detections.
    pub fn empty(image_width: usize, image_height: usize) -> Self {
        Self {
            image_width,
            image_height,
            instances: Vec::new(),
        }
    }

    pub fn image_width(&self) -> usize {
        self.image_width
    }

    pub fn image_height(&self) -> usize {
        self.image_height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }

    pub fn instances(&self) -> &[InstanceAnnotation] {
        &self.instances
    }

    /// Serializes with every mask as RLE.
    pub fn to_json(&self) -> String {
        let doc = RawManifest {
            image_width: self.image_width as i64,
            image_height: self.image_height as i64,
            instances: self
                .instances
                .iter()
                .map(|inst| RawInstance {
                    class_id: inst.class_id,
                    class_name: inst.class_name.clone(),
                    score: inst.score,
                    mask: RawMask {
                        format: "rle".into(),
                        counts: Some(encode_rle(&inst.mask)),
                        path: None,
                        size: None,
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("manifest serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    image_width: i64,
    image_height: i64,
    instances: Vec<RawInstance>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawInstance {
    class_id: u32,
    class_name: String,
    score: f64,
    mask: RawMask,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMask {
    format: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    /// Optional COCO-style `[height, width]` of an RLE mask.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size: Option<[usize; 2]>,
}

/// Parses manifest JSON. Relative PNG/PGM mask paths resolve against
/// `base_dir`; without one, file-backed masks are rejected.
pub fn parse_manifest(
    json: &str,
    base_dir: Option<&Path>,
    classes: &ClassTable,
) -> Result<SegmentationManifest, ManifestError> {
    let raw: RawManifest =
        serde_json::from_str(json).map_err(|e| ManifestError::Schema(e.to_string()))?;
    if raw.image_width <= 0 || raw.image_height <= 0 {
        return Err(ManifestError::Schema(format!(
            "image dimensions must be positive, got {}x{}",
            raw.image_width, raw.image_height
        )));
    }
    let (w, h) = (raw.image_width as usize, raw.image_height as usize);
    let mut instances = Vec::with_capacity(raw.instances.len());
    for (index, inst) in raw.instances.into_iter().enumerate() {
        let mask = match inst.mask.format.as_str() {
            "rle" => {
                let counts = inst.mask.counts.ok_or_else(|| {
                    ManifestError::Schema(format!("instance {index}: rle mask without counts"))
                })?;
                if let Some([mask_h, mask_w]) = inst.mask.size {
                    if (mask_w, mask_h) != (w, h) {
                        return Err(ManifestError::DimensionMismatch {
                            index,
                            mask_w,
                            mask_h,
                            image_w: w,
                            image_h: h,
                        });
                    }
                }
                decode_rle(&counts, w, h).map_err(|source| ManifestError::Rle { index, source })?
            }
            "png" | "pgm" => {
                let rel = inst.mask.path.ok_or_else(|| {
                    ManifestError::Schema(format!("instance {index}: file mask without path"))
                })?;
                let rel = PathBuf::from(rel);
                let full = match base_dir {
                    _ if rel.is_absolute() => rel,
                    Some(dir) => dir.join(rel),
                    None => {
                        return Err(ManifestError::Schema(format!(
                            "instance {index}: file-backed masks need a manifest directory"
                        )))
                    }
                };
                read_mask(&full).map_err(|source| ManifestError::MaskFile { index, source })?
            }
            other => {
                return Err(ManifestError::UnknownEncoding {
                    index,
                    format: other.to_string(),
                })
            }
        };
        instances.push(InstanceAnnotation {
            class_id: inst.class_id,
            class_name: inst.class_name,
            score: inst.score,
            mask,
        });
    }
    SegmentationManifest::new(w, h, instances, classes)
}

/// Loads a manifest file, validating against the COCO class table.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<SegmentationManifest, ManifestError> {
    load_manifest_with(path, &ClassTable::coco())
}

/// Loads a manifest file against a custom class table.
pub fn load_manifest_with(
    path: impl AsRef<Path>,
    classes: &ClassTable,
) -> Result<SegmentationManifest, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(&text, path.parent(), classes)
}

fn shell_quote(path: &Path) -> String {
    let s = path.to_string_lossy();
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Runs an external segmenter through `sh -c`.
///
/// `{input}` and `{output}` in the template are replaced with the quoted image
/// path and a fresh temporary manifest path. The exit status is checked before
/// the manifest is parsed.
pub fn run_external_segmenter(
    image_path: impl AsRef<Path>,
    command_template: &str,
    classes: &ClassTable,
) -> Result<SegmentationManifest, SegmenterError> {
    for placeholder in ["{input}", "{output}"] {
        if !command_template.contains(placeholder) {
            return Err(SegmenterError::MissingPlaceholder(placeholder));
        }
    }
    let workdir = tempfile::tempdir().map_err(SegmenterError::Launch)?;
    let output = workdir.path().join("manifest.json");
    let command = command_template
        .replace("{input}", &shell_quote(image_path.as_ref()))
        .replace("{output}", &shell_quote(&output));
    let result = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .output()
        .map_err(SegmenterError::Launch)?;
    if !result.status.success() {
        return Err(SegmenterError::Failed {
            status: result.status.to_string(),
            stderr: String::from_utf8_lossy(&result.stderr).trim().to_string(),
        });
    }
    load_manifest_with(&output, classes).map_err(SegmenterError::Manifest)
}

/// Template from `MASKFX_SEGMENTER`, if set and non-empty.
pub fn segmenter_from_env() -> Option<String> {
    std::env::var(SEGMENTER_ENV).ok().filter(|s| !s.trim().is_empty())
}
