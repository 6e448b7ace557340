//! JSON bodies exchanged between the HTTP service and its clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compositor::RenderConfig;
use crate::config::{ConfigError, MorphologySettings};
use crate::filters::{FilterSchema, FilterSpec};
use crate::selection::ClassSummary;

/// Response headers attached to rendered images.
pub const CLASS_HEADER: &str = "x-maskfx-class";
pub const CLASS_ID_HEADER: &str = "x-maskfx-class-id";
pub const MASK_AREA_HEADER: &str = "x-maskfx-mask-area";
pub const NOTICE_HEADER: &str = "x-maskfx-notice";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub width: usize,
    pub height: usize,
    /// Instances in the session's manifest.
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassList {
    /// Highest ranked first; the first entry is what automatic selection picks.
    pub classes: Vec<ClassSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterList {
    pub filters: Vec<FilterSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestReplaced {
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Parameter overrides layered over the `fg` / `bg` spec strings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams {
    #[serde(default)]
    pub fg: BTreeMap<String, f64>,
    #[serde(default)]
    pub bg: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    /// Explicit class; automatic top-mask selection when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<u32>,
    /// Filter spec, `keyword[:name=value,...]`.
    pub fg: String,
    pub bg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<LayerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feather: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morphology: Option<MorphologySettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_threshold: Option<f64>,
}

impl RenderRequest {
    pub fn new(fg: impl Into<String>, bg: impl Into<String>) -> Self {
        Self {
            class_id: None,
            fg: fg.into(),
            bg: bg.into(),
            params: None,
            feather: None,
            morphology: None,
            score_threshold: None,
        }
    }

    /// Builds the render configuration; unset fields take the library
    /// defaults.
    pub fn to_config(&self) -> Result<RenderConfig, ConfigError> {
        let layer = |spec: &str, extra: Option<&BTreeMap<String, f64>>| {
            let mut spec: FilterSpec = spec.parse()?;
            for (k, v) in extra.into_iter().flatten() {
                spec = spec.with(k, *v);
            }
            Ok::<_, ConfigError>(spec)
        };
        let d = RenderConfig::default();
        Ok(RenderConfig {
            fg_filter: layer(&self.fg, self.params.as_ref().map(|p| &p.fg))?,
            bg_filter: layer(&self.bg, self.params.as_ref().map(|p| &p.bg))?,
            morphology: self.morphology.clone().unwrap_or_default().to_config()?,
            feather_sigma: self.feather.unwrap_or(d.feather_sigma),
            class_override: self.class_id,
            score_threshold: self.score_threshold.unwrap_or(d.score_threshold),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::MorphologyConfig;

    #[test]
    fn minimal_request_uses_defaults() {
        let req: RenderRequest = serde_json::from_str(r#"{"fg": "preserve", "bg": "gray"}"#).unwrap();
        let cfg = req.to_config().unwrap();
        assert_eq!(cfg.bg_filter.keyword, "gray");
        assert_eq!(cfg.morphology, MorphologyConfig::default());
        assert_eq!(cfg.feather_sigma, 0.0);
        assert_eq!(cfg.class_override, None);
    }

    #[test]
    fn params_override_spec_values() {
        let req: RenderRequest = serde_json::from_str(
            r#"{"fg": "gaussian-blur:sigma=2", "bg": "gray", "class_id": 3,
                "params": {"fg": {"sigma": 4}}, "morphology": {"enabled": false}}"#,
        )
        .unwrap();
        let cfg = req.to_config().unwrap();
        assert_eq!(cfg.fg_filter.params["sigma"], 4.0);
        assert!(!cfg.morphology.enabled);
        assert_eq!(cfg.class_override, Some(3));
        assert!(serde_json::from_str::<RenderRequest>(r#"{"fg": "a", "bg": "b", "colour": 1}"#).is_err());
    }
}
