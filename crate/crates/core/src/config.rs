//! Layered settings shared by the CLI and the service.
//!
//! A TOML file provides the base layer; command-line flags are parsed into
//! the same structure and merged on top. Environment variables do not
//! override either layer.
//!
//! ```toml
//! [render]
//! fg = "detail-enhancement:amount=2"
//! bg = "gray"
//! class = "person"
//! score_threshold = 0.5
//! feather = 1.5
//!
//! [morphology]
//! enabled = true
//! open_shape = "disk"
//! open_radius = 2
//! close_shape = "disk"
//! close_radius = 2
//! min_area_fraction = 0.0025
//!
//! [segmenter]
//! command = "python3 segment.py {input} {output}"
//!
//! [serve]
//! port = 8080
//! static_dir = "studio/dist"
//! session_ttl_secs = 1800
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classes::ClassTable;
use crate::compositor::RenderConfig;
use crate::filters::{FilterError, FilterSpec};
use crate::morphology::{MorphologyConfig, MorphologyError, Shape, StructuringElement};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSettings {
    pub image: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub fg: Option<String>,
    pub bg: Option<String>,
    /// Class name (or numeric id) overriding automatic selection.
    pub class: Option<String>,
    pub score_threshold: Option<f64>,
    pub feather: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphologySettings {
    pub enabled: Option<bool>,
    pub open_shape: Option<String>,
    pub open_radius: Option<usize>,
    pub close_shape: Option<String>,
    pub close_radius: Option<usize>,
    pub min_area_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmenterSettings {
    pub command: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSettings {
    pub port: Option<u16>,
    pub static_dir: Option<PathBuf>,
    pub session_ttl_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSettings {
    /// Class table file (`<id> <name>` per line).
    pub table: Option<PathBuf>,
    /// Priority file (one class name per line, highest first).
    pub priority: Option<PathBuf>,
}

/// Every configurable value; `None` means "not set at this layer".
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default)]
    pub render: RenderSettings,
    #[serde(default)]
    pub morphology: MorphologySettings,
    #[serde(default)]
    pub segmenter: SegmenterSettings,
    #[serde(default)]
    pub serve: ServeSettings,
    #[serde(default)]
    pub classes: ClassSettings,
}

fn pick<T>(over: Option<T>, base: Option<T>) -> Option<T> {
    over.or(base)
}

impl Settings {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    /// Values set in `over` win; everything else comes from `self`.
    pub fn merged_with(self, over: Settings) -> Settings {
        let (b, o) = (self, over);
        Settings {
            render: RenderSettings {
                image: pick(o.render.image, b.render.image),
                manifest: pick(o.render.manifest, b.render.manifest),
                out: pick(o.render.out, b.render.out),
                fg: pick(o.render.fg, b.render.fg),
                bg: pick(o.render.bg, b.render.bg),
                class: pick(o.render.class, b.render.class),
                score_threshold: pick(o.render.score_threshold, b.render.score_threshold),
                feather: pick(o.render.feather, b.render.feather),
            },
            morphology: MorphologySettings {
                enabled: pick(o.morphology.enabled, b.morphology.enabled),
                open_shape: pick(o.morphology.open_shape, b.morphology.open_shape),
                open_radius: pick(o.morphology.open_radius, b.morphology.open_radius),
                close_shape: pick(o.morphology.close_shape, b.morphology.close_shape),
                close_radius: pick(o.morphology.close_radius, b.morphology.close_radius),
                min_area_fraction: pick(
                    o.morphology.min_area_fraction,
                    b.morphology.min_area_fraction,
                ),
            },
            segmenter: SegmenterSettings {
                command: pick(o.segmenter.command, b.segmenter.command),
            },
            serve: ServeSettings {
                port: pick(o.serve.port, b.serve.port),
                static_dir: pick(o.serve.static_dir, b.serve.static_dir),
                session_ttl_secs: pick(o.serve.session_ttl_secs, b.serve.session_ttl_secs),
            },
            classes: ClassSettings {
                table: pick(o.classes.table, b.classes.table),
                priority: pick(o.classes.priority, b.classes.priority),
            },
        }
    }
}

impl MorphologySettings {
    /// Applies set values over the defaults.
    pub fn to_config(&self) -> Result<MorphologyConfig, MorphologyError> {
        let d = MorphologyConfig::default();
        let se = |shape: &Option<String>, radius: Option<usize>, base: StructuringElement| {
            let shape = match shape {
                Some(s) => s.parse::<Shape>()?,
                None => base.shape(),
            };
            StructuringElement::new(shape, radius.unwrap_or(base.radius()))
        };
        let config = MorphologyConfig {
            enabled: self.enabled.unwrap_or(d.enabled),
            opening: se(&self.open_shape, self.open_radius, d.opening)?,
            closing: se(&self.close_shape, self.close_radius, d.closing)?,
            min_area_fraction: self.min_area_fraction.unwrap_or(d.min_area_fraction),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Resolves a class given by name or numeric id.
pub fn resolve_class(name: &str, classes: &ClassTable) -> Result<u32, ConfigError> {
    if let Ok(id) = name.trim().parse::<u32>() {
        if classes.contains(id) {
            return Ok(id);
        }
    }
    classes
        .id_of(name)
        .ok_or_else(|| ConfigError::UnknownClass(name.to_string()))
}

impl RenderSettings {
    /// Builds a render configuration; unset filters default to `preserve`.
    pub fn to_config(
        &self,
        morphology: &MorphologySettings,
        classes: &ClassTable,
    ) -> Result<RenderConfig, ConfigError> {
        let spec = |s: &Option<String>| -> Result<FilterSpec, FilterError> {
            s.as_deref().map_or(Ok(FilterSpec::preserve()), str::parse)
        };
        let d = RenderConfig::default();
        Ok(RenderConfig {
            fg_filter: spec(&self.fg)?,
            bg_filter: spec(&self.bg)?,
            morphology: morphology.to_config()?,
            feather_sigma: self.feather.unwrap_or(d.feather_sigma),
            class_override: self
                .class
                .as_deref()
                .map(|c| resolve_class(c, classes))
                .transpose()?,
            score_threshold: self.score_threshold.unwrap_or(d.score_threshold),
        })
    }
}
