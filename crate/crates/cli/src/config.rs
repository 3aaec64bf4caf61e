use std::path::{Path, PathBuf};

use physimg::align::AlignConfig;
use physimg::corrections::{GeometrySpec, Swatch};
use physimg::imgcore::Roi;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::blocks::analysis_registry;
use crate::error::{CliError, CliResult};

/// Physical extent attached to rasters that come without a sidecar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub origin: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSpec {
    pub images: Vec<PathBuf>,
    /// Expanded and sorted, appended after `images`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glob: Option<String>,
    /// One per image; overrides sidecar timestamps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamps: Option<Vec<f64>>,
    /// The first reference is the baseline.
    pub references: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<ImageGeometry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorBlock {
    /// Explicit swatches; if empty, `checker` must locate a classic 6x4 checker.
    pub swatches: Vec<Swatch>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checker: Option<Roi>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftBlock {
    pub roi: Roi,
    #[serde(default = "default_max_shift")]
    pub max_shift: usize,
}

fn default_max_shift() -> usize {
    20
}

/// Correction blocks, applied per image in the order color, geometry,
/// drift, deformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorrectionBlock {
    Color(ColorBlock),
    Geometry(GeometrySpec),
    Drift(DriftBlock),
    Deformation(AlignConfig),
}

impl CorrectionBlock {
    pub fn name(&self) -> &'static str {
        match self {
            CorrectionBlock::Color(_) => "color",
            CorrectionBlock::Geometry(_) => "geometry",
            CorrectionBlock::Drift(_) => "drift",
            CorrectionBlock::Deformation(_) => "deformation",
        }
    }

    fn rank(&self) -> usize {
        match self {
            CorrectionBlock::Color(_) => 0,
            CorrectionBlock::Geometry(_) => 1,
            CorrectionBlock::Drift(_) => 2,
            CorrectionBlock::Deformation(_) => 3,
        }
    }

    pub fn needs_reference(&self) -> bool {
        matches!(self, CorrectionBlock::Drift(_) | CorrectionBlock::Deformation(_))
    }
}

/// An analysis block: a registered kind plus its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output: PathBuf,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default)]
    pub corrections: Vec<CorrectionBlock>,
    #[serde(default)]
    pub analyses: Vec<BlockSpec>,
}

impl PipelineConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> CliResult<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(CliError::validation)
        } else {
            toml::from_str(text).map_err(CliError::validation)
        }
    }

    /// Reads a config file; relative paths inside are resolved against its
    /// directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.output);
        self.input.images.iter_mut().for_each(fix);
        self.input.references.iter_mut().for_each(fix);
        if let Some(g) = &mut self.input.glob {
            if Path::new(g).is_relative() {
                *g = dir.join(&*g).to_string_lossy().into_owned();
            }
        }
        for block in &mut self.analyses {
            if let Some(Value::Array(masks)) = block.params.get_mut("masks") {
                for m in masks.iter_mut() {
                    if let Value::String(s) = m {
                        if Path::new(s.as_str()).is_relative() {
                            *s = dir.join(s.as_str()).to_string_lossy().into_owned();
                        }
                    }
                }
            }
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(CliError::validation)
    }

    /// Image paths in processing order.
    pub fn image_paths(&self) -> CliResult<Vec<PathBuf>> {
        let mut paths = self.input.images.clone();
        if let Some(pattern) = &self.input.glob {
            let mut found: Vec<PathBuf> =
                glob::glob(pattern).map_err(CliError::validation)?.collect::<Result<_, _>>().map_err(CliError::validation)?;
            found.sort();
            paths.extend(found);
        }
        Ok(paths)
    }

    /// Pre-flight checks; nothing is written if these fail.
    pub fn validate(&self) -> CliResult<()> {
        let images = self.image_paths()?;
        for p in images.iter().chain(&self.input.references) {
            if !p.is_file() {
                return Err(CliError::Validation(format!("input {} does not exist", p.display())));
            }
        }
        if let Some(ts) = &self.input.timestamps {
            if ts.len() != images.len() {
                return Err(CliError::Validation(format!("{} timestamps for {} images", ts.len(), images.len())));
            }
        }
        if self.corrections.windows(2).any(|w| w[0].rank() >= w[1].rank()) {
            return Err(CliError::Validation(
                "corrections must be declared once each, in the order color, geometry, drift, deformation".into(),
            ));
        }
        for c in &self.corrections {
            if c.needs_reference() && self.input.references.is_empty() {
                return Err(CliError::Validation(format!("{} correction needs a reference image", c.name())));
            }
            if let CorrectionBlock::Color(b) = c {
                if b.swatches.is_empty() && b.checker.is_none() {
                    return Err(CliError::Validation("color correction needs swatches or a checker box".into()));
                }
            }
        }
        let registry = analysis_registry();
        let mut state = crate::blocks::Provided { references: !self.input.references.is_empty(), ..Default::default() };
        for spec in &self.analyses {
            let block = registry.build(spec)?;
            block.check(&mut state).map_err(|e| CliError::Validation(format!("{} block: {e}", spec.kind)))?;
        }
        Ok(())
    }

    /// Same configuration with every analysis block's defaults filled in.
    pub fn canonical(&self) -> CliResult<Value> {
        let registry = analysis_registry();
        let mut cfg = self.clone();
        for spec in &mut cfg.analyses {
            let block = registry.build(spec)?;
            spec.params = match block.params() {
                Value::Object(m) => m,
                _ => Map::new(),
            };
        }
        serde_json::to_value(&cfg).map_err(CliError::validation)
    }
}
