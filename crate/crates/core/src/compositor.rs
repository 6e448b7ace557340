//! Foreground/background compositing: the end-to-end render pipeline.

use thiserror::Error;

use crate::classes::{ClassTable, PriorityTable};
use crate::filters::{kernels, FilterError, FilterRegistry, FilterSpec};
use crate::morphology::{smooth_mask, MorphologyConfig, MorphologyError};
use crate::raster::{BinaryMask, RasterError, RasterImage};
use crate::segmentation::SegmentationManifest;
use crate::selection::{
    select_class_mask, select_top_mask, ClassSummary, SelectionError, DEFAULT_SCORE_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Dimensions(#[from] RasterError),
    #[error("{stage} filter: {source}")]
    Filter {
        stage: &'static str,
        #[source]
        source: FilterError,
    },
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error("invalid render configuration: {0}")]
    Config(String),
}

/// Per-pixel blend weight of the foreground, each value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMask {
    width: usize,
    height: usize,
    alpha: Vec<f64>,
}

impl AlphaMask {
    pub fn new(width: usize, height: usize, alpha: Vec<f64>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        if alpha.len() != width * height {
            return Err(RasterError::BufferLength {
                width,
                height,
                expected: width * height,
                actual: alpha.len(),
            });
        }
        Ok(Self {
            width,
            height,
            alpha: alpha.into_iter().map(|a| a.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            alpha: mask.as_slice().iter().map(|&b| f64::from(u8::from(b))).collect(),
        }
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.alpha[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    fn check(&self, image: &RasterImage) -> Result<(), RasterError> {
        image.same_dimensions(self.width, self.height)
    }
}

/// Softens a hard mask with the Gaussian used by `gaussian-blur`. Sigma 0
/// keeps the mask hard.
pub fn feather(mask: &BinaryMask, sigma: f64) -> Result<AlphaMask, RenderError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(RenderError::Config(format!(
            "feather sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let hard = AlphaMask::from_mask(mask);
    if sigma == 0.0 {
        return Ok(hard);
    }
    let (w, h) = hard.dimensions();
    let soft = kernels::gaussian_blur_plane(&hard.alpha, w, h, sigma);
    Ok(AlphaMask::new(w, h, soft)?)
}

/// `round(alpha * fg + (1 - alpha) * bg)` per channel.
pub fn fuse(
    fg: &RasterImage,
    bg: &RasterImage,
    alpha: &AlphaMask,
) -> Result<RasterImage, RasterError> {
    alpha.check(fg)?;
    alpha.check(bg)?;
    let data = fg
        .as_raw()
        .chunks_exact(3)
        .zip(bg.as_raw().chunks_exact(3))
        .zip(&alpha.alpha)
        .flat_map(|((f, b), &a)| {
            [0, 1, 2].map(|c| kernels::quantize(a * f64::from(f[c]) + (1.0 - a) * f64::from(b[c])))
        })
        .collect();
    RasterImage::new(fg.width(), fg.height(), data)
}

/// Foreground and background previews: `alpha * image` and
/// `(1 - alpha) * image`, rounded. Debug output only; filtering always runs
/// on the full frame.
pub fn extract_regions(
    image: &RasterImage,
    alpha: &AlphaMask,
) -> Result<(RasterImage, RasterImage), RasterError> {
    alpha.check(image)?;
    let scale = |weight: &dyn Fn(f64) -> f64| -> Vec<u8> {
        image
            .as_raw()
            .chunks_exact(3)
            .zip(&alpha.alpha)
            .flat_map(|(p, &a)| [0, 1, 2].map(|c| kernels::quantize(weight(a) * f64::from(p[c]))))
            .collect()
    };
    let fg = RasterImage::new(image.width(), image.height(), scale(&|a| a))?;
    let bg = RasterImage::new(image.width(), image.height(), scale(&|a| 1.0 - a))?;
    Ok((fg, bg))
}

/// Everything a render needs besides the image and manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub fg_filter: FilterSpec,
    pub bg_filter: FilterSpec,
    pub morphology: MorphologyConfig,
    pub feather_sigma: f64,
    pub class_override: Option<u32>,
    pub score_threshold: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            fg_filter: FilterSpec::preserve(),
            bg_filter: FilterSpec::preserve(),
            morphology: MorphologyConfig::default(),
            feather_sigma: 0.0,
            class_override: None,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
        }
    }
}

impl RenderConfig {
    pub fn new(fg_filter: FilterSpec, bg_filter: FilterSpec) -> Self {
        Self {
            fg_filter,
            bg_filter,
            ..Self::default()
        }
    }
}

/// Result of [`Renderer::render`].
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: RasterImage,
    /// Class that drove the foreground, before morphology.
    pub selected: Option<ClassSummary>,
    /// Foreground pixels after morphology.
    pub mask_area: usize,
    /// Set when the image was treated as background only.
    pub notice: Option<String>,
}

/// Filter registry, class table and priority order used by renders.
#[derive(Debug, Clone, Default)]
pub struct Renderer {
    pub registry: FilterRegistry,
    pub classes: ClassTable,
    pub priority: PriorityTable,
}

impl Renderer {
    /// Builtin filters, COCO classes, default priority.
    pub fn builtin() -> Self {
        Self {
            registry: FilterRegistry::with_builtins(),
            classes: ClassTable::coco(),
            priority: PriorityTable::default(),
        }
    }

    fn validate(&self, config: &RenderConfig) -> Result<(), RenderError> {
        if !(0.0..=1.0).contains(&config.score_threshold) {
            return Err(RenderError::Config(format!(
                "score threshold {} outside [0, 1]",
                config.score_threshold
            )));
        }
        config.morphology.validate()?;
        self.registry
            .validate(&config.fg_filter)
            .map_err(|source| RenderError::Filter {
                stage: "foreground",
                source,
            })?;
        self.registry
            .validate(&config.bg_filter)
            .map_err(|source| RenderError::Filter {
                stage: "background",
                source,
            })?;
        Ok(())
    }

    /// Selected class mask after morphology, plus the summary of the class.
    pub fn foreground_mask(
        &self,
        manifest: &SegmentationManifest,
        config: &RenderConfig,
    ) -> Result<(BinaryMask, Option<ClassSummary>), RenderError> {
        let (w, h) = manifest.dimensions();
        let selected = match config.class_override {
            Some(id) => select_class_mask(manifest, config.score_threshold, id, &self.classes)?,
            None => select_top_mask(manifest, config.score_threshold, &self.priority),
        };
        Ok(match selected {
            Some(cm) => {
                let summary = cm.summary();
                (smooth_mask(&cm.mask, &config.morphology), Some(summary))
            }
            None => (BinaryMask::empty(w, h)?, None),
        })
    }

    /// Select, clean, feather, filter both layers over the full frame, fuse.
    pub fn render(
        &self,
        image: &RasterImage,
        manifest: &SegmentationManifest,
        config: &RenderConfig,
    ) -> Result<RenderOutput, RenderError> {
        self.validate(config)?;
        let (w, h) = manifest.dimensions();
        image.same_dimensions(w, h)?;

        let (mask, selected) = self.foreground_mask(manifest, config)?;
        let mask_area = mask.area();
        let notice = match (&selected, mask_area) {
            (None, _) => Some(match config.class_override {
                Some(id) => format!(
                    "no-object: class {} not detected above threshold; whole image treated as background",
                    self.classes.name(id).unwrap_or("?")
                ),
                None => "no-object: no instance above threshold; whole image treated as background"
                    .to_string(),
            }),
            (Some(s), 0) => Some(format!(
                "no-object: {} mask vanished after morphology; whole image treated as background",
                s.class_name
            )),
            _ => None,
        };
        let alpha = feather(&mask, config.feather_sigma)?;

        // A layer with zero weight everywhere cannot reach the output.
        let any_fg = alpha.as_slice().iter().any(|&a| a > 0.0);
        let any_bg = alpha.as_slice().iter().any(|&a| a < 1.0);
        let run = |spec: &FilterSpec, stage: &'static str, needed: bool| {
            if !needed {
                return Ok(image.clone());
            }
            self.registry
                .apply(spec, image)
                .map_err(|source| RenderError::Filter { stage, source })
        };
        let fg = run(&config.fg_filter, "foreground", any_fg)?;
        // filters are pure, so an identical background spec reuses the result
        let same = config.fg_filter.keyword == config.bg_filter.keyword
            && self.registry.validate(&config.fg_filter).ok()
                == self.registry.validate(&config.bg_filter).ok();
        let bg = if same && any_fg {
            fg.clone()
        } else {
            run(&config.bg_filter, "background", any_bg)?
        };
        let out = fuse(&fg, &bg, &alpha)?;
        Ok(RenderOutput {
            image: out,
            selected,
            mask_area,
            notice,
        })
    }
}

/// Renders with the builtin filters, COCO classes and default priority.
pub fn render(
    image: &RasterImage,
    manifest: &SegmentationManifest,
    config: &RenderConfig,
) -> Result<RenderOutput, RenderError> {
    Renderer::builtin().render(image, manifest, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::InstanceAnnotation;

    fn gradient(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| [(x * 4) as u8, (y * 4) as u8, ((x * y) % 251) as u8])
            .unwrap()
    }

    #[test]
    fn hard_feather_is_the_mask() {
        let m = BinaryMask::from_fn(6, 4, |x, y| x > y).unwrap();
        let a = feather(&m, 0.0).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(a.get(x, y), if x > y { 1.0 } else { 0.0 });
            }
        }
        let full = feather(&BinaryMask::full(7, 7).unwrap(), 2.0).unwrap();
        assert!(full.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(feather(&m, -1.0).is_err());
    }

    #[test]
    fn fuse_endpoints_and_midpoint() {
        let fg = RasterImage::filled(3, 3, [200, 200, 200]).unwrap();
        let bg = RasterImage::filled(3, 3, [100, 100, 100]).unwrap();
        assert_eq!(fuse(&fg, &bg, &AlphaMask::constant(3, 3, 1.0).unwrap()).unwrap(), fg);
        assert_eq!(fuse(&fg, &bg, &AlphaMask::constant(3, 3, 0.0).unwrap()).unwrap(), bg);
        let mid = fuse(&fg, &bg, &AlphaMask::constant(3, 3, 0.5).unwrap()).unwrap();
        assert_eq!(mid, RasterImage::filled(3, 3, [150, 150, 150]).unwrap());
        let small = RasterImage::filled(2, 3, [0, 0, 0]).unwrap();
        assert!(fuse(&small, &bg, &AlphaMask::constant(3, 3, 0.5).unwrap()).is_err());
    }

    #[test]
    fn extract_endpoints() {
        let img = gradient(5, 5);
        let black = RasterImage::filled(5, 5, [0, 0, 0]).unwrap();
        let (f, b) = extract_regions(&img, &AlphaMask::constant(5, 5, 1.0).unwrap()).unwrap();
        assert_eq!((f, b), (img.clone(), black.clone()));
        let (f, b) = extract_regions(&img, &AlphaMask::constant(5, 5, 0.0).unwrap()).unwrap();
        assert_eq!((f, b), (black, img));
    }

    #[test]
    fn left_half_preserved_right_half_gray() {
        let img = gradient(64, 64);
        let mask = BinaryMask::from_fn(64, 64, |x, _| x < 32).unwrap();
        let manifest = SegmentationManifest::new(
            64,
            64,
            vec![InstanceAnnotation {
                class_id: 1,
                class_name: "person".into(),
                score: 0.9,
                mask,
            }],
            &ClassTable::coco(),
        )
        .unwrap();
        let config = RenderConfig {
            bg_filter: FilterSpec::new("gray"),
            morphology: MorphologyConfig::disabled(),
            ..RenderConfig::default()
        };
        let out = render(&img, &manifest, &config).unwrap();
        let gray = crate::filters::to_gray(&img);
        for y in 0..64 {
            for x in 0..64 {
                let want = if x < 32 { img.pixel(x, y) } else { gray.pixel(x, y) };
                assert_eq!(out.image.pixel(x, y), want, "({x},{y})");
            }
        }
        assert_eq!(out.selected.unwrap().class_name, "person");
        assert_eq!(out.mask_area, 64 * 32);
        assert!(out.notice.is_none());
    }

    #[test]
    fn no_detection_filters_background_only() {
        let img = gradient(16, 16);
        let manifest = SegmentationManifest::empty(16, 16);
        let config = RenderConfig::new(FilterSpec::preserve(), FilterSpec::new("gray"));
        let out = render(&img, &manifest, &config).unwrap();
        assert_eq!(out.image, crate::filters::to_gray(&img));
        assert!(out.selected.is_none());
        assert!(out.notice.unwrap().starts_with("no-object"));
    }

    #[test]
    fn render_errors_carry_context() {
        let img = gradient(8, 8);
        let manifest = SegmentationManifest::empty(8, 9);
        assert!(matches!(
            render(&img, &manifest, &RenderConfig::default()),
            Err(RenderError::Dimensions(_))
        ));
        let manifest = SegmentationManifest::empty(8, 8);
        let config = RenderConfig::new(FilterSpec::new("vortex"), FilterSpec::preserve());
        let err = render(&img, &manifest, &config).unwrap_err();
        assert!(err.to_string().starts_with("foreground filter"), "{err}");
        let config = RenderConfig {
            class_override: Some(9999),
            ..RenderConfig::default()
        };
        assert!(matches!(
            render(&img, &manifest, &config),
            Err(RenderError::Selection(_))
        ));
    }
}
