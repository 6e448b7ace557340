//! Artistic filters and the keyword registry that dispatches to them.
//!
//! Filters are addressed by spec strings of the form
//! `keyword[:name=value,name=value]`, e.g. `gaussian-blur:sigma=3.5`.
//! Unlisted parameters take the descriptor's default. New filters are added
//! with [`FilterRegistry::register`].

pub mod kernels;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::RasterImage;

pub use kernels::{
    bilateral, detail_enhance, edge_preserve, gaussian_blur, gray_blur, median_blur,
    pencil_sketch, preserve, to_gray,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FilterError {
    #[error("unknown filter {keyword:?}; registered filters: {}", known.join(", "))]
    UnknownFilter { keyword: String, known: Vec<String> },
    #[error("filter {keyword:?} has no parameter {name:?}; accepted: {}", accepted.join(", "))]
    UnknownParameter {
        keyword: String,
        name: String,
        accepted: Vec<String>,
    },
    #[error("filter {keyword:?}: parameter {name:?} = {value} outside {range}")]
    ParameterOutOfRange {
        keyword: String,
        name: String,
        value: f64,
        range: String,
    },
    #[error("invalid filter spec {spec:?}: {reason}")]
    InvalidSpec { spec: String, reason: String },
    #[error("filter {0:?} is already registered")]
    DuplicateKeyword(String),
    #[error("{name} = {value}: {reason}")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("filter {keyword:?} changed image dimensions")]
    DimensionsChanged { keyword: String },
}

/// Declared parameter of a filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// When false, `min` itself is rejected.
    pub min_inclusive: bool,
    pub integer: bool,
    pub default: f64,
    pub description: String,
}

impl ParamSpec {
    pub fn real(name: &str, min: f64, max: f64, default: f64, description: &str) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            min_inclusive: true,
            integer: false,
            default,
            description: description.into(),
        }
    }

    /// Real parameter that must be strictly greater than zero.
    pub fn positive(name: &str, max: f64, default: f64, description: &str) -> Self {
        Self {
            min_inclusive: false,
            ..Self::real(name, 0.0, max, default, description)
        }
    }

    pub fn integer(name: &str, min: f64, max: f64, default: f64, description: &str) -> Self {
        Self {
            integer: true,
            ..Self::real(name, min, max, default, description)
        }
    }

    fn accepts(&self, v: f64) -> bool {
        let above = if self.min_inclusive {
            v >= self.min
        } else {
            v > self.min
        };
        above && v <= self.max && (!self.integer || v.fract() == 0.0)
    }

    fn range_text(&self) -> String {
        let open = if self.min_inclusive { '[' } else { '(' };
        let kind = if self.integer { " (integer)" } else { "" };
        format!("{open}{}, {}]{kind}", self.min, self.max)
    }
}

/// Fully resolved parameter values handed to a transform.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterParams(BTreeMap<String, f64>);

impl FilterParams {
    /// Value of a declared parameter. Descriptors always resolve every
    /// declared name, so a miss is a programming error in the transform.
    pub fn get(&self, name: &str) -> f64 {
        *self
            .0
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name:?} not declared"))
    }

    pub fn get_usize(&self, name: &str) -> usize {
        self.get(name) as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub type Transform =
    dyn Fn(&RasterImage, &FilterParams) -> Result<RasterImage, FilterError> + Send + Sync;

/// A registered filter: keyword, parameter schema and entry point.
#[derive(Clone)]
pub struct FilterDescriptor {
    pub keyword: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
    transform: Arc<Transform>,
}

impl fmt::Debug for FilterDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterDescriptor")
            .field("keyword", &self.keyword)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl FilterDescriptor {
    pub fn new(
        keyword: &str,
        description: &str,
        params: Vec<ParamSpec>,
        transform: impl Fn(&RasterImage, &FilterParams) -> Result<RasterImage, FilterError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        Self {
            keyword: keyword.into(),
            description: description.into(),
            params,
            transform: Arc::new(transform),
        }
    }

    /// Checks overrides against the schema and fills in defaults.
    pub fn resolve(&self, overrides: &BTreeMap<String, f64>) -> Result<FilterParams, FilterError> {
        for name in overrides.keys() {
            if !self.params.iter().any(|p| &p.name == name) {
                return Err(FilterError::UnknownParameter {
                    keyword: self.keyword.clone(),
                    name: name.clone(),
                    accepted: self.params.iter().map(|p| p.name.clone()).collect(),
                });
            }
        }
        let mut resolved = BTreeMap::new();
        for p in &self.params {
            let v = overrides.get(&p.name).copied().unwrap_or(p.default);
            if !p.accepts(v) {
                return Err(FilterError::ParameterOutOfRange {
                    keyword: self.keyword.clone(),
                    name: p.name.clone(),
                    value: v,
                    range: p.range_text(),
                });
            }
            resolved.insert(p.name.clone(), v);
        }
        Ok(FilterParams(resolved))
    }

    pub fn schema(&self) -> FilterSchema {
        FilterSchema {
            keyword: self.keyword.clone(),
            description: self.description.clone(),
            params: self.params.clone(),
        }
    }
}

/// Serializable description of a registered filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSchema {
    pub keyword: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
}

/// A filter keyword with parameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub keyword: String,
    pub params: BTreeMap<String, f64>,
}

impl FilterSpec {
    pub fn new(keyword: &str) -> Self {
        Self {
            keyword: keyword.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn preserve() -> Self {
        Self::new("preserve")
    }
}

impl FromStr for FilterSpec {
    type Err = FilterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = |reason: String| FilterError::InvalidSpec {
            spec: s.to_string(),
            reason,
        };
        let (keyword, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), Some(r)),
            None => (s.trim(), None),
        };
        if keyword.is_empty() {
            return Err(invalid("empty keyword".into()));
        }
        let mut spec = FilterSpec::new(keyword);
        if let Some(rest) = rest {
            for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (name, value) = pair
                    .split_once('=')
                    .ok_or_else(|| invalid(format!("expected name=value, got {pair:?}")))?;
                let name = name.trim();
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("{name}: {value:?} is not a number")))?;
                if spec.params.insert(name.to_string(), value).is_some() {
                    return Err(invalid(format!("parameter {name:?} given twice")));
                }
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.keyword)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// Keyword-indexed set of filters.
#[derive(Debug, Clone, Default)]
pub struct FilterRegistry {
    filters: BTreeMap<String, FilterDescriptor>,
}

impl FilterRegistry {
    /// An empty registry.
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the nine builtin filters.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        for d in builtin_descriptors() {
            reg.register(d).expect("builtin keywords are unique");
        }
        reg
    }

    pub fn register(&mut self, descriptor: FilterDescriptor) -> Result<(), FilterError> {
        if self.filters.contains_key(&descriptor.keyword) {
            return Err(FilterError::DuplicateKeyword(descriptor.keyword));
        }
        self.filters.insert(descriptor.keyword.clone(), descriptor);
        Ok(())
    }

    pub fn get(&self, keyword: &str) -> Option<&FilterDescriptor> {
        self.filters.get(keyword)
    }

    pub fn keywords(&self) -> Vec<String> {
        self.filters.keys().cloned().collect()
    }

    pub fn schemas(&self) -> Vec<FilterSchema> {
        self.filters.values().map(FilterDescriptor::schema).collect()
    }

    /// Looks up the descriptor and validates the requested parameters.
    pub fn validate(&self, spec: &FilterSpec) -> Result<FilterParams, FilterError> {
        self.descriptor(&spec.keyword)?.resolve(&spec.params)
    }

    fn descriptor(&self, keyword: &str) -> Result<&FilterDescriptor, FilterError> {
        self.filters
            .get(keyword)
            .ok_or_else(|| FilterError::UnknownFilter {
                keyword: keyword.to_string(),
                known: self.keywords(),
            })
    }

    /// Runs the filter named by `spec` on `image`.
    pub fn apply(&self, spec: &FilterSpec, image: &RasterImage) -> Result<RasterImage, FilterError> {
        let descriptor = self.descriptor(&spec.keyword)?;
        let params = descriptor.resolve(&spec.params)?;
        let out = (descriptor.transform)(image, &params)?;
        if out.dimensions() != image.dimensions() {
            return Err(FilterError::DimensionsChanged {
                keyword: spec.keyword.clone(),
            });
        }
        Ok(out)
    }
}

/// Process-wide registry of builtin filters.
pub fn builtin_registry() -> &'static FilterRegistry {
    static REGISTRY: OnceLock<FilterRegistry> = OnceLock::new();
    REGISTRY.get_or_init(FilterRegistry::with_builtins)
}

/// Applies `spec` using the builtin registry.
pub fn apply_filter(spec: &FilterSpec, image: &RasterImage) -> Result<RasterImage, FilterError> {
    builtin_registry().apply(spec, image)
}

/// Keywords of the builtin filters, in registration order.
pub const BUILTIN_KEYWORDS: [&str; 9] = [
    "gray",
    "bilateral",
    "edge-preserve",
    "median-blur",
    "gaussian-blur",
    "detail-enhancement",
    "pencil-sketch",
    "gray-blur",
    "preserve",
];

fn builtin_descriptors() -> Vec<FilterDescriptor> {
    const MAX_SIGMA: f64 = 50.0;
    vec![
        FilterDescriptor::new("gray", "Convert to gray", vec![], |img, _| {
            Ok(to_gray(img))
        }),
        FilterDescriptor::new(
            "bilateral",
            "Edge-aware noise reduction (spatial and luma-range Gaussian weights)",
            vec![
                ParamSpec::positive("sigma_space", 20.0, 5.0, "spatial sigma in pixels"),
                ParamSpec::positive("sigma_range", 1e6, 40.0, "range sigma in 8-bit intensity"),
            ],
            |img, p| bilateral(img, p.get("sigma_space"), p.get("sigma_range")),
        ),
        FilterDescriptor::new(
            "edge-preserve",
            "Edge-preserving smoothing (self-guided filter)",
            vec![
                ParamSpec::integer("radius", 1.0, 64.0, 8.0, "window radius in pixels"),
                ParamSpec::positive("epsilon", 1e12, 400.0, "regularization, squared 8-bit units"),
            ],
            |img, p| edge_preserve(img, p.get_usize("radius"), p.get("epsilon")),
        ),
        FilterDescriptor::new(
            "median-blur",
            "Median of a square window",
            vec![ParamSpec::integer("radius", 1.0, 32.0, 3.0, "window radius in pixels")],
            |img, p| median_blur(img, p.get_usize("radius")),
        ),
        FilterDescriptor::new(
            "gaussian-blur",
            "Gaussian blur",
            vec![ParamSpec::positive("sigma", MAX_SIGMA, 5.0, "sigma in pixels")],
            |img, p| gaussian_blur(img, p.get("sigma")),
        ),
        FilterDescriptor::new(
            "detail-enhancement",
            "Amplify detail over an edge-preserving base",
            vec![
                ParamSpec::real("amount", 0.0, 10.0, 1.5, "detail gain (1 = unchanged)"),
                ParamSpec::integer("radius", 1.0, 64.0, 8.0, "base filter radius"),
                ParamSpec::positive("epsilon", 1e12, 400.0, "base filter regularization"),
            ],
            |img, p| {
                detail_enhance(
                    img,
                    p.get("amount"),
                    p.get_usize("radius"),
                    p.get("epsilon"),
                )
            },
        ),
        FilterDescriptor::new(
            "pencil-sketch",
            "Pencil drawing (color dodge of luma over its blurred negative)",
            vec![ParamSpec::positive("sigma", MAX_SIGMA, 8.0, "blur sigma in pixels")],
            |img, p| pencil_sketch(img, p.get("sigma")),
        ),
        FilterDescriptor::new(
            "gray-blur",
            "Convert to gray, then Gaussian blur",
            vec![ParamSpec::positive("sigma", MAX_SIGMA, 5.0, "sigma in pixels")],
            |img, p| gray_blur(img, p.get("sigma")),
        ),
        FilterDescriptor::new("preserve", "Leave the image unchanged", vec![], |img, _| {
            Ok(preserve(img))
        }),
    ]
}
