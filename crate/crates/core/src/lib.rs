//! Instance-aware artistic filtering.
//!
//! Given an RGB image and the instance masks produced by a segmentation
//! network, the pipeline
//!
//! 1. merges instance masks per class and picks the most important class
//!    ([`selection`]),
//! 2. cleans that mask with binary morphology ([`morphology`]),
//! 3. runs one artistic filter for the foreground and another for the
//!    background over the whole frame ([`filters`]), and
//! 4. blends the two results through the (optionally feathered) mask
//!    ([`compositor`]).
//!
//! Segmentation itself happens outside this crate: masks arrive as JSON
//! manifests or from an external process ([`segmentation`]).
//!
//! ```no_run
//! use maskfx_core::{filters::FilterSpec, read_image, load_manifest, render, RenderConfig};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let image = read_image("street.ppm")?;
//! let manifest = load_manifest("street.json")?;
//! let config = RenderConfig::new("detail-enhancement".parse()?, FilterSpec::new("gray"));
//! let out = render(&image, &manifest, &config)?;
//! maskfx_core::write_image(&out.image, "street-fx.png")?;
//! # Ok(())
//! # }
//! ```

pub mod api;
pub mod classes;
pub mod compositor;
pub mod config;
pub mod filters;
pub mod morphology;
pub mod raster;
pub mod segmentation;
pub mod selection;

pub use classes::{ClassTable, PriorityTable};
pub use compositor::{render, AlphaMask, RenderConfig, RenderError, RenderOutput, Renderer};
pub use filters::{apply_filter, FilterError, FilterRegistry, FilterSpec};
pub use morphology::{MorphologyConfig, StructuringElement};
pub use raster::{
    decode_image, encode_png, encode_ppm, mask_area, read_image, write_image, BinaryMask,
    GrayImage, ImageIoError, RasterImage,
};
pub use segmentation::{
    decode_rle, encode_rle, load_manifest, parse_manifest, run_external_segmenter,
    InstanceAnnotation, ManifestError, SegmentationManifest,
};
pub use selection::{ClassMask, ClassSummary};
