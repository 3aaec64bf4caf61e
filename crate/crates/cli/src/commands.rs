use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use physimg::imgcore::PhysicalImage;
use physimg::synthlab::{
    gen_grain_pack, gen_laser_grid, gen_plume_sequence, gen_warp_pair, GrainPackSpec, LaserGridSpec, PlumeSpec, WarpPairSpec,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::blocks::{num, Context};
use crate::config::{BlockSpec, CorrectionBlock, ImageGeometry, InputSpec, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{run, run_seeded};

#[derive(Debug, Parser)]
#[command(name = "physimg", version, about = "Physical image analysis of porous media experiments")]
pub struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a pipeline config (TOML, or JSON).
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Apply correction blocks to images.
    Correct(CorrectArgs),
    /// TV-regularize images.
    Denoise(DenoiseArgs),
    /// Align images to a reference.
    Align(AlignArgs),
    /// Watershed facies labels.
    Segment(SegmentArgs),
    /// Binary phase masks from differences to references.
    Phases(PhasesArgs),
    /// Concentration maps, optionally calibrated from an injection rate.
    Concentration(ConcentrationArgs),
    /// Overlay binary segmentations.
    Compare(CompareArgs),
    /// Detect and track finger tips in mask series.
    Fingers(FingersArgs),
    /// Generate synthetic data with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Block parameters (TOML or JSON table); flags override.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Physical width (m) for rasters without a sidecar.
    #[arg(long, requires = "height")]
    pub width: Option<f64>,
    #[arg(long, requires = "width")]
    pub height: Option<f64>,
    /// Timestamps (s), one per input, overriding sidecars.
    #[arg(long, num_args = 1..)]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, num_args = 1..)]
    pub references: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Regularization strength in meters.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub reference: PathBuf,
    /// Coarse to fine patch grids, e.g. `8x4,32x16` (columns x rows).
    #[arg(long)]
    pub levels: Option<String>,
    #[arg(long)]
    pub matcher: Option<String>,
    /// Minimum matching score.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub marker_quantile: Option<f64>,
    #[arg(long)]
    pub merge_tol: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ThresholdMode {
    Static,
    Otsu,
    Dynamic,
}

#[derive(Debug, Args)]
pub struct PhasesArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, num_args = 1.., required = true)]
    pub references: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ThresholdMode>,
    /// Lower signal threshold (static) or prior (dynamic).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Facies label map restricting thresholds per label.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long, num_args = 1.., required = true)]
    pub references: Vec<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Calibrate alpha so the volume grows at this rate (m^3/s).
    #[arg(long, conflicts_with = "alpha")]
    pub rate: Option<f64>,
    /// Last timestamp (s) of the calibration window.
    #[arg(long, requires = "rate")]
    pub until: Option<f64>,
    #[arg(long)]
    pub porosity: Option<f64>,
    /// Depth in meters.
    #[arg(long)]
    pub depth: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Args)]
pub struct FingersArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub hop_px: Option<f64>,
    #[arg(long)]
    pub min_spacing_px: Option<f64>,
    #[arg(long)]
    pub min_prominence_px: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SynthKind {
    Grains,
    Warp,
    Plume,
    Laser,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub output: PathBuf,
    /// Generator spec (TOML or JSON); defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn read_table(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let value: Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(CliError::validation)?
    } else {
        toml::from_str(&text).map_err(CliError::validation)?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Validation(format!("{} is not a table", path.display()))),
    }
}

/// Sets a dotted key, creating intermediate tables.
fn set_path(map: &mut Map<String, Value>, key: &str, value: Value) {
    match key.split_once('.') {
        None => {
            map.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let entry = map.entry(head.to_string()).or_insert_with(|| Value::Object(Map::new()));
            if !entry.is_object() {
                *entry = Value::Object(Map::new());
            }
            set_path(entry.as_object_mut().expect("object"), rest, value);
        }
    }
}

/// Config-file parameters with flag overrides applied.
fn block_params(config: Option<&Path>, overrides: Vec<(&str, Option<Value>)>) -> CliResult<Map<String, Value>> {
    let mut map = match config {
        Some(p) => read_table(p)?,
        None => Map::new(),
    };
    for (key, value) in overrides {
        if let Some(v) = value {
            set_path(&mut map, key, v);
        }
    }
    Ok(map)
}

fn pipeline(io: &IoArgs, references: Vec<PathBuf>, block: Option<(&str, Map<String, Value>)>) -> PipelineConfig {
    PipelineConfig {
        output: io.output.clone(),
        input: InputSpec {
            images: io.input.clone(),
            glob: None,
            timestamps: io.times.clone(),
            references,
            geometry: io.width.zip(io.height).map(|(width, height)| ImageGeometry { width, height, origin: [0.0, 0.0] }),
        },
        corrections: Vec::new(),
        analyses: block.map(|(kind, params)| BlockSpec { kind: kind.into(), params }).into_iter().collect(),
    }
}

fn parse_levels(text: &str) -> CliResult<Value> {
    let levels = text
        .split(',')
        .map(|l| {
            let (h, v) = l.trim().split_once('x').ok_or_else(|| CliError::Usage(format!("level `{l}` is not COLSxROWS")))?;
            let h: usize = h.parse().map_err(|_| CliError::Usage(format!("bad level `{l}`")))?;
            let v: usize = v.parse().map_err(|_| CliError::Usage(format!("bad level `{l}`")))?;
            Ok(json!({ "num_v": v, "num_h": h }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Value::Array(levels))
}

fn val<T: Into<Value>>(v: Option<T>) -> Option<Value> {
    v.map(Into::into)
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config } => run(&PipelineConfig::from_file(&config)?).map(|_| ()),
        Command::Correct(a) => {
            #[derive(Deserialize)]
            struct Corrections {
                #[serde(default)]
                corrections: Vec<CorrectionBlock>,
            }
            let mut cfg = pipeline(&a.io, a.references.clone(), None);
            if let Some(p) = &a.io.config {
                let c: Corrections = serde_json::from_value(Value::Object(read_table(p)?)).map_err(CliError::validation)?;
                cfg.corrections = c.corrections;
            }
            run(&cfg).map(|_| ())
        }
        Command::Denoise(a) => {
            let params = block_params(
                a.io.config.as_deref(),
                vec![("mu", val(a.mu)), ("omega", val(a.omega)), ("max_iter", val(a.max_iter)), ("tol", val(a.tol))],
            )?;
            run(&pipeline(&a.io, Vec::new(), Some(("denoise", params)))).map(|_| ())
        }
        Command::Align(a) => {
            let levels = a.levels.as_deref().map(parse_levels).transpose()?;
            let params = block_params(
                a.io.config.as_deref(),
                vec![("levels", levels), ("matcher", val(a.matcher)), ("matching.threshold", val(a.threshold))],
            )?;
            run(&pipeline(&a.io, vec![a.reference.clone()], Some(("align", params)))).map(|_| ())
        }
        Command::Segment(a) => {
            let params = block_params(
                a.io.config.as_deref(),
                vec![("mu", val(a.mu)), ("marker_quantile", val(a.marker_quantile)), ("merge_tol", val(a.merge_tol))],
            )?;
            run(&pipeline(&a.io, Vec::new(), Some(("facies", params)))).map(|_| ())
        }
        Command::Phases(a) => {
            let mode = a.mode.map(|m| {
                Value::from(match m {
                    ThresholdMode::Static => "static",
                    ThresholdMode::Otsu => "otsu",
                    ThresholdMode::Dynamic => "dynamic",
                })
            });
            let intervals = a.threshold.map(|t| json!([{ "lower": t }]));
            let params = block_params(
                a.io.config.as_deref(),
                vec![("threshold.mode", mode), ("threshold.intervals", intervals), ("mu", val(a.mu))],
            )?;
            let cfg = pipeline(&a.io, a.references.clone(), Some(("phases", params)));
            let labels = a.labels.as_deref().map(physimg::segment::LabelMap::load).transpose()?;
            run_seeded(&cfg, labels).map(|_| ())
        }
        Command::Concentration(a) => {
            let calibration = a.rate.map(|r| match a.until {
                Some(u) => json!({ "rate": r, "until": u }),
                None => json!({ "rate": r }),
            });
            let params = block_params(
                a.io.config.as_deref(),
                vec![
                    ("alpha", val(a.alpha)),
                    ("beta", val(a.beta)),
                    ("calibration", calibration),
                    ("porosity", val(a.porosity)),
                    ("depth", val(a.depth)),
                    ("mu", val(a.mu)),
                ],
            )?;
            run(&pipeline(&a.io, a.references.clone(), Some(("concentration", params)))).map(|_| ())
        }
        Command::Compare(a) => {
            let params = block_params(a.io.config.as_deref(), Vec::new())?;
            run(&pipeline(&a.io, Vec::new(), Some(("compare", params)))).map(|_| ())
        }
        Command::Fingers(a) => {
            let params = block_params(
                a.io.config.as_deref(),
                vec![
                    ("direction", val(a.direction)),
                    ("hop_px", val(a.hop_px)),
                    ("min_spacing_px", val(a.min_spacing_px)),
                    ("min_prominence_px", val(a.min_prominence_px)),
                ],
            )?;
            run(&pipeline(&a.io, Vec::new(), Some(("fingers", params)))).map(|_| ())
        }
        Command::Synth(a) => synth(&a),
    }
}

fn spec_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        Some(p) => serde_json::from_value(Value::Object(read_table(p)?)).map_err(CliError::validation),
        None => Ok(T::default()),
    }
}

fn synth(a: &SynthArgs) -> CliResult<()> {
    std::fs::create_dir_all(&a.output)?;
    let mut ctx = Context::new(&a.output);
    let config = match a.kind {
        SynthKind::Grains => {
            let mut spec: GrainPackSpec = spec_or_default(a.config.as_deref())?;
            spec.seed = a.seed.unwrap_or(spec.seed);
            let pack = gen_grain_pack(&spec)?;
            ctx.write_image("image.tif", &pack.image)?;
            ctx.write_image("pore_indicator.tif", &pack.pore_indicator)?;
            ctx.write_json("truth.json", &json!({ "porosity": pack.porosity, "pore_length": pack.pore_length, "grains": pack.grains.len() }))?;
            serde_json::to_value(&spec)
        }
        SynthKind::Warp => {
            let mut spec: WarpPairSpec = spec_or_default(a.config.as_deref())?;
            spec.seed = a.seed.unwrap_or(spec.seed);
            let pair = gen_warp_pair(&spec)?;
            ctx.write_image("reference.tif", &pair.reference)?;
            ctx.write_image("secondary.tif", &pair.secondary)?;
            let cs = *pair.reference.coords();
            let mut rows = Vec::new();
            for r in (0..cs.rows).step_by(8) {
                for c in (0..cs.cols).step_by(8) {
                    let p = cs.pixel_to_phys(r, c);
                    let d = pair.displacement_m(r, c);
                    rows.push(vec![r.to_string(), c.to_string(), num(p[0]), num(p[1]), num(d[0]), num(d[1])]);
                }
            }
            ctx.write_csv("truth_field.csv", &["row", "col", "x_m", "y_m", "dx_m", "dy_m"], &rows)?;
            serde_json::to_value(&spec)
        }
        SynthKind::Plume => {
            let mut spec: PlumeSpec = spec_or_default(a.config.as_deref())?;
            spec.seed = a.seed.unwrap_or(spec.seed);
            let seq = gen_plume_sequence(&spec)?;
            for (k, r) in seq.references.iter().enumerate() {
                ctx.write_image(&format!("references/reference_{k:03}.tif"), r)?;
            }
            let mut rows = Vec::new();
            for (k, f) in seq.frames.iter().enumerate() {
                ctx.write_image(&format!("frames/frame_{k:03}.tif"), f)?;
                let mask = PhysicalImage::from_mask(&seq.masks[k], *f.coords())?.with_timestamp(f.timestamp());
                ctx.write_image(&format!("masks/mask_{k:03}.png"), &mask)?;
                rows.push(vec![format!("frame_{k:03}"), num(seq.times[k]), num(seq.volumes[k])]);
            }
            ctx.write_csv("truth_volumes.csv", &["image", "time_s", "volume_m3"], &rows)?;
            serde_json::to_value(&spec)
        }
        SynthKind::Laser => {
            let mut spec: LaserGridSpec = spec_or_default(a.config.as_deref())?;
            spec.seed = a.seed.unwrap_or(spec.seed);
            let grid = gen_laser_grid(&spec)?;
            ctx.write_image("grid.tif", &grid.image)?;
            ctx.write_json("truth.json", &json!({ "homography": grid.homography }))?;
            serde_json::to_value(&spec)
        }
    }
    .map_err(CliError::runtime)?;
    ctx.write_json("spec.json", &config)?;
    ctx.manifest.finish(json!({ "synth": config }))?;
    Ok(())
}
