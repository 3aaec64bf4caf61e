use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array3, Axis};
use physimg::align::{align, warp, AlignConfig, Interpolation, WarpDirection};
use physimg::imgcore::{self, ColorSpace, PhysicalImage, Roi};
use physimg::quantify::{
    calibrate, compare_segmentations, concentration_signal, detect_finger_tips, track_fingers, volume_series, CalibrationConfig,
    ConcentrationConfig, Geometry, GrowthDirection, LinearConcentrationModel, TipConfig, TipFrame,
};
use physimg::registry::Registry;
use physimg::regularize::{tv_denoise_plane, RegularizationConfig};
use physimg::segment::{
    binary_concentration, channel_plane, watershed_labels, LabelMap, PhaseConfig, ReferenceStack, SignalChannel, ThresholdModel,
    WatershedConfig,
};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::BlockSpec;
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;

/// A named image of the series.
#[derive(Clone, Debug)]
pub struct Frame {
    pub name: String,
    pub image: PhysicalImage,
}

/// What earlier blocks make available to later ones.
#[derive(Clone, Debug, Default)]
pub struct Provided {
    pub references: bool,
    pub labels: bool,
    pub masks: bool,
}

/// State shared by the analysis blocks of one pipeline run.
pub struct Context {
    pub frames: Vec<Frame>,
    pub references: Vec<PhysicalImage>,
    pub labels: Option<LabelMap>,
    pub masks: Option<Vec<Frame>>,
    pub out: PathBuf,
    pub manifest: ManifestBuilder,
}

impl Context {
    pub fn new(out: &Path) -> Self {
        Self { frames: Vec::new(), references: Vec::new(), labels: None, masks: None, out: out.to_path_buf(), manifest: ManifestBuilder::new(out) }
    }

    fn prepare(&self, rel: &str) -> CliResult<PathBuf> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(path)
    }

    /// Saves a raster and its sidecar.
    pub fn write_image(&mut self, rel: &str, image: &PhysicalImage) -> CliResult<()> {
        let path = self.prepare(rel)?;
        imgcore::save(image, &path)?;
        self.manifest.record(rel);
        self.manifest.record(&sidecar_rel(rel));
        Ok(())
    }

    pub fn write_labels(&mut self, rel: &str, labels: &LabelMap) -> CliResult<()> {
        let path = self.prepare(rel)?;
        labels.save(&path)?;
        self.manifest.record(rel);
        self.manifest.record(&sidecar_rel(rel));
        Ok(())
    }

    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.prepare(rel)?;
        let mut w = csv::Writer::from_path(&path).map_err(CliError::runtime)?;
        w.write_record(header).map_err(CliError::runtime)?;
        for row in rows {
            w.write_record(row).map_err(CliError::runtime)?;
        }
        w.flush()?;
        self.manifest.record(rel);
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        let path = self.prepare(rel)?;
        let text = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
        std::fs::write(path, text + "\n")?;
        self.manifest.record(rel);
        Ok(())
    }

    fn stack(&self) -> CliResult<ReferenceStack> {
        Ok(ReferenceStack::new(self.references.clone())?)
    }

    /// Masks from an earlier phase block, else the input frames.
    fn mask_frames(&self) -> Vec<Frame> {
        self.masks.clone().unwrap_or_else(|| self.frames.clone())
    }
}

fn sidecar_rel(rel: &str) -> String {
    Path::new(rel).with_extension("json").to_string_lossy().replace('\\', "/")
}

/// Shortest round-trip formatting, so reruns produce identical CSV text.
pub fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One step of the analysis sequence.
pub trait Analysis: Send + Sync {
    fn kind(&self) -> &'static str;
    /// Reads parameters; missing keys take their defaults.
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()>;
    /// Parameters with defaults filled in.
    fn params(&self) -> Value;
    /// Checks dependencies on earlier blocks and records what this one
    /// provides.
    fn check(&self, provided: &mut Provided) -> Result<(), String>;
    fn run(&self, ctx: &mut Context) -> CliResult<()>;
}

fn parse_params<C: DeserializeOwned>(kind: &str, params: &Map<String, Value>) -> CliResult<C> {
    serde_json::from_value(Value::Object(params.clone())).map_err(|e| CliError::Validation(format!("{kind} block: {e}")))
}

fn to_value(c: &impl Serialize) -> Value {
    serde_json::to_value(c).expect("block parameters serialize")
}

pub struct AnalysisRegistry(Registry<dyn Analysis>);

impl AnalysisRegistry {
    pub fn build(&self, spec: &BlockSpec) -> CliResult<Box<dyn Analysis>> {
        let mut block = self.0.create(&spec.kind).map_err(CliError::validation)?;
        block.configure(&spec.params)?;
        Ok(block)
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.names()
    }
}

pub fn analysis_registry() -> AnalysisRegistry {
    let mut reg: Registry<dyn Analysis> = Registry::new();
    reg.register("denoise", || Box::new(Denoise::default()));
    reg.register("facies", || Box::new(Facies::default()));
    reg.register("phases", || Box::new(Phases::default()));
    reg.register("concentration", || Box::new(Concentration::default()));
    reg.register("compare", || Box::new(Compare::default()));
    reg.register("fingers", || Box::new(Fingers::default()));
    reg.register("align", || Box::new(Align::default()));
    AnalysisRegistry(reg)
}

/// Runs `f` over the frames in parallel; failures are recorded and the
/// remaining results returned in series order.
fn per_frame<T: Send>(
    ctx: &mut Context,
    block: &str,
    frames: &[Frame],
    f: impl Fn(&Frame) -> CliResult<T> + Sync,
) -> Vec<(usize, T)> {
    let results: Vec<_> = frames
        .par_iter()
        .map(|fr| {
            let t = Instant::now();
            let r = f(fr);
            (r, t.elapsed().as_secs_f64())
        })
        .collect();
    let mut ok = Vec::new();
    for (k, (r, secs)) in results.into_iter().enumerate() {
        match r {
            Ok(v) => {
                log::info!("block={block} item={} status=ok seconds={secs:.3}", frames[k].name);
                ok.push((k, v));
            }
            Err(e) => ctx.manifest.fail(block, &frames[k].name, e),
        }
    }
    ok
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseParams {
    /// Meters.
    pub mu: f64,
    pub omega: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self { mu: 0.0, omega: 1.0, max_iter: 1000, tol: 1e-6 }
    }
}

impl DenoiseParams {
    pub fn apply(&self, image: &PhysicalImage) -> CliResult<PhysicalImage> {
        let rc = RegularizationConfig::with_mu(self.mu).omega(self.omega).iterations(self.max_iter, self.tol);
        let planes = (0..image.channels())
            .map(|k| Ok(tv_denoise_plane(&image.channel(k), image.coords(), &rc)?.0.mapv(|v| v.clamp(0.0, 1.0))))
            .collect::<CliResult<Vec<_>>>()?;
        let views: Vec<_> = planes.iter().map(|p| p.view()).collect();
        let data: Array3<f64> = ndarray::stack(Axis(2), &views).map_err(CliError::runtime)?;
        let cs = match image.colorspace() {
            ColorSpace::Binary => ColorSpace::Gray,
            c => c,
        };
        Ok(image.with_data_and_colorspace(data, cs)?)
    }
}

#[derive(Default)]
struct Denoise(DenoiseParams);

impl Analysis for Denoise {
    fn kind(&self) -> &'static str {
        "denoise"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        let rc = RegularizationConfig::with_mu(self.0.mu).omega(self.0.omega).iterations(self.0.max_iter, self.0.tol);
        rc.validate().map_err(CliError::validation)
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, _: &mut Provided) -> Result<(), String> {
        Ok(())
    }
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let frames = ctx.frames.clone();
        for (k, img) in per_frame(ctx, "denoise", &frames, |fr| self.0.apply(&fr.image)) {
            ctx.write_image(&format!("denoise/{}.tif", frames[k].name), &img)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct FaciesParams {
    channel: SignalChannel,
    #[serde(flatten)]
    watershed: WatershedConfig,
}

#[derive(Default)]
struct Facies(FaciesParams);

impl Analysis for Facies {
    fn kind(&self) -> &'static str {
        "facies"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        Ok(())
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, provided: &mut Provided) -> Result<(), String> {
        provided.labels = true;
        Ok(())
    }
    /// Segments the baseline reference, or the first image without one.
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let t = Instant::now();
        let source = ctx.references.first().or(ctx.frames.first().map(|f| &f.image)).ok_or_else(|| CliError::runtime("no image to segment"))?;
        let gray = PhysicalImage::from_plane(channel_plane(source, self.0.channel), *source.coords(), ColorSpace::Gray)?;
        let labels = watershed_labels(&gray, &self.0.watershed)?;
        let area = labels.coords().pixel_area();
        let rows: Vec<Vec<String>> =
            labels.pixel_counts().iter().enumerate().map(|(l, &n)| vec![l.to_string(), n.to_string(), num(n as f64 * area)]).collect();
        ctx.write_labels("facies/labels.png", &labels)?;
        ctx.write_csv("facies/areas.csv", &["label", "pixels", "area_m2"], &rows)?;
        log::info!("block=facies labels={} seconds={:.3}", labels.label_count(), t.elapsed().as_secs_f64());
        ctx.labels = Some(labels);
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct PhasesParams {
    #[serde(flatten)]
    phase: PhaseConfig,
    threshold: ThresholdModel,
}

#[derive(Default)]
struct Phases(PhasesParams);

impl Analysis for Phases {
    fn kind(&self) -> &'static str {
        "phases"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        Ok(())
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, provided: &mut Provided) -> Result<(), String> {
        if !provided.references {
            return Err("needs reference images".into());
        }
        provided.masks = true;
        Ok(())
    }
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let stack = ctx.stack()?;
        let labels = match &ctx.labels {
            Some(l) => l.clone(),
            None => LabelMap::uniform(*stack.base().coords()),
        };
        self.0.threshold.validate(labels.label_count()).map_err(CliError::validation)?;
        let frames = ctx.frames.clone();
        let masks =
            per_frame(ctx, "phases", &frames, |fr| Ok(binary_concentration(&fr.image, &stack, &labels, &self.0.threshold, &self.0.phase)?));
        let mut rows = Vec::new();
        let mut out = Vec::new();
        for (k, m) in masks {
            let fr = &frames[k];
            ctx.write_image(&format!("phases/{}.png", fr.name), &m)?;
            let area = m.data().iter().filter(|&&v| v > 0.5).count() as f64 * m.coords().pixel_area();
            rows.push(vec![fr.name.clone(), opt_num(fr.image.timestamp()), num(area)]);
            out.push(Frame { name: fr.name.clone(), image: m });
        }
        ctx.write_csv("phases/areas.csv", &["image", "time_s", "area_m2"], &rows)?;
        ctx.masks = Some(out);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationParams {
    /// Injection rate in m^3/s during the calibration window.
    rate: f64,
    /// Frames with timestamps up to this time (s) are used; all if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    until: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct ConcentrationParams {
    #[serde(flatten)]
    signal: ConcentrationConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationParams>,
    porosity: f64,
    /// Meters.
    depth: f64,
}

impl Default for ConcentrationParams {
    fn default() -> Self {
        Self { signal: ConcentrationConfig::default(), alpha: None, beta: 0.0, calibration: None, porosity: 1.0, depth: 1.0 }
    }
}

#[derive(Default)]
struct Concentration(ConcentrationParams);

impl Analysis for Concentration {
    fn kind(&self) -> &'static str {
        "concentration"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        match (&self.0.alpha, &self.0.calibration) {
            (Some(a), None) => LinearConcentrationModel::new(*a, self.0.beta).map(|_| ()).map_err(CliError::validation),
            (None, Some(c)) if c.rate > 0.0 => Ok(()),
            (None, Some(_)) => Err(CliError::Validation("concentration block: calibration rate must be positive".into())),
            _ => Err(CliError::Validation("concentration block: give exactly one of alpha or calibration".into())),
        }
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, provided: &mut Provided) -> Result<(), String> {
        if !provided.references {
            return Err("needs reference images".into());
        }
        Ok(())
    }
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let p = &self.0;
        let stack = ctx.stack()?;
        let geometry = Geometry::new(stack.base().coords(), p.porosity, p.depth)?;
        let frames = ctx.frames.clone();
        let signals = per_frame(ctx, "concentration", &frames, |fr| Ok(concentration_signal(&fr.image, &stack, &p.signal)?));
        let model = match (&p.alpha, &p.calibration) {
            (Some(a), _) => LinearConcentrationModel::new(*a, p.beta)?,
            (None, Some(c)) => {
                let t = Instant::now();
                let (mut sigs, mut times) = (Vec::new(), Vec::new());
                for (k, s) in &signals {
                    let ts = frames[*k].image.timestamp().ok_or_else(|| CliError::runtime(format!("{} has no timestamp", frames[*k].name)))?;
                    if c.until.is_none_or(|u| ts <= u) {
                        sigs.push(s.clone());
                        times.push(ts);
                    }
                }
                let m = calibrate(&sigs, &times, c.rate, &geometry, &CalibrationConfig { beta: p.beta, ..Default::default() })?;
                log::info!("block=calibration frames={} alpha={} seconds={:.3}", sigs.len(), m.alpha, t.elapsed().as_secs_f64());
                m
            }
            (None, None) => unreachable!("checked in configure"),
        };
        let all: Vec<_> = signals.iter().map(|(_, s)| s.clone()).collect();
        let volumes = volume_series(&all, &model, &geometry)?;
        let mut rows = Vec::new();
        for ((k, s), v) in signals.iter().zip(&volumes) {
            let fr = &frames[*k];
            let img = PhysicalImage::from_plane_clamped(model.apply_plane(&s.view()), *fr.image.coords())?.with_timestamp(fr.image.timestamp());
            ctx.write_image(&format!("concentration/{}.tif", fr.name), &img)?;
            rows.push(vec![fr.name.clone(), opt_num(fr.image.timestamp()), num(*v)]);
        }
        ctx.write_csv("concentration/volumes.csv", &["image", "time_s", "volume_m3"], &rows)?;
        ctx.write_json("concentration/model.json", &model)?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CompareParams {
    /// Mask rasters with sidecars; defaults to the phase masks or the
    /// input images.
    masks: Vec<PathBuf>,
}

#[derive(Default)]
struct Compare(CompareParams);

impl Analysis for Compare {
    fn kind(&self) -> &'static str {
        "compare"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        Ok(())
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, _: &mut Provided) -> Result<(), String> {
        for m in &self.0.masks {
            if !m.is_file() {
                return Err(format!("mask {} does not exist", m.display()));
            }
        }
        Ok(())
    }
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let t = Instant::now();
        let frames = if self.0.masks.is_empty() {
            ctx.mask_frames()
        } else {
            self.0
                .masks
                .iter()
                .map(|p| Ok(Frame { name: stem(p), image: imgcore::load(p)? }))
                .collect::<CliResult<Vec<_>>>()?
        };
        let images: Vec<_> = frames.iter().map(|f| f.image.clone()).collect();
        let cmp = compare_segmentations(&images, None)?;
        let mut rows: Vec<Vec<String>> =
            frames.iter().zip(&cmp.fractions.unique).map(|(f, v)| vec![format!("only:{}", f.name), num(*v)]).collect();
        for (k, v) in cmp.fractions.overlap.iter().enumerate() {
            rows.push(vec![format!("overlap:{}", k + 2), num(*v)]);
        }
        ctx.write_image("compare/overlay.png", &cmp.image)?;
        ctx.write_csv("compare/fractions.csv", &["category", "fraction"], &rows)?;
        log::info!("block=compare masks={} seconds={:.3}", frames.len(), t.elapsed().as_secs_f64());
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct FingersParams {
    #[serde(flatten)]
    tips: TipConfig,
    direction: GrowthDirection,
    #[serde(skip_serializing_if = "Option::is_none")]
    roi: Option<Roi>,
    /// Largest tip displacement between frames, pixels.
    hop_px: f64,
}

impl Default for FingersParams {
    fn default() -> Self {
        Self { tips: TipConfig::default(), direction: GrowthDirection::Down, roi: None, hop_px: 10.0 }
    }
}

#[derive(Default)]
struct Fingers(FingersParams);

impl Analysis for Fingers {
    fn kind(&self) -> &'static str {
        "fingers"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        if !(self.0.hop_px > 0.0) {
            return Err(CliError::Validation("fingers block: hop_px must be positive".into()));
        }
        Ok(())
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, _: &mut Provided) -> Result<(), String> {
        Ok(())
    }
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let p = &self.0;
        let frames = ctx.mask_frames();
        let detected = per_frame(ctx, "fingers", &frames, |fr| {
            let time = fr.image.timestamp().ok_or_else(|| CliError::runtime("mask has no timestamp"))?;
            Ok(TipFrame { time, tips: detect_finger_tips(&fr.image, p.roi.as_ref(), p.direction, &p.tips)? })
        });
        let mut rows = Vec::new();
        for (k, tf) in &detected {
            for tip in &tf.tips {
                rows.push(vec![frames[*k].name.clone(), num(tf.time), num(tip[0]), num(tip[1])]);
            }
        }
        ctx.write_csv("fingers/tips.csv", &["image", "time_s", "x_m", "y_m"], &rows)?;
        let Some(first) = frames.first() else { return Ok(()) };
        let hop = p.hop_px * first.image.coords().dx().max(first.image.coords().dy());
        let series: Vec<TipFrame> = detected.into_iter().map(|(_, tf)| tf).collect();
        let tracks = track_fingers(&series, hop)?;
        let mut rows = Vec::new();
        for t in &tracks {
            for pt in &t.points {
                rows.push(vec![t.id.to_string(), num(pt.time), num(pt.position[0]), num(pt.position[1]), num(t.length), num(t.weight)]);
            }
        }
        ctx.write_csv("fingers/trajectories.csv", &["id", "time_s", "x_m", "y_m", "length_m", "weight"], &rows)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    #[serde(flatten)]
    pub align: AlignConfig,
    /// Glyph sampling stride in pixels.
    pub glyph_stride: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self { align: AlignConfig::default(), glyph_stride: 16 }
    }
}

#[derive(Default)]
struct Align(AlignParams);

impl Analysis for Align {
    fn kind(&self) -> &'static str {
        "align"
    }
    fn configure(&mut self, params: &Map<String, Value>) -> CliResult<()> {
        self.0 = parse_params(self.kind(), params)?;
        if self.0.glyph_stride == 0 {
            return Err(CliError::Validation("align block: glyph_stride must be positive".into()));
        }
        Ok(())
    }
    fn params(&self) -> Value {
        to_value(&self.0)
    }
    fn check(&self, provided: &mut Provided) -> Result<(), String> {
        if !provided.references {
            return Err("needs a reference image".into());
        }
        Ok(())
    }
    fn run(&self, ctx: &mut Context) -> CliResult<()> {
        let reference = ctx.references[0].clone();
        let frames = ctx.frames.clone();
        let results = per_frame(ctx, "align", &frames, |fr| {
            let a = align(&reference, &fr.image, &self.0.align)?;
            let warped = warp(&fr.image, &a.field, WarpDirection::Forward, Interpolation::Bilinear)?;
            Ok((a, warped))
        });
        for (k, (a, warped)) in results {
            let name = &frames[k].name;
            let f = &a.field;
            let samples: Vec<Vec<String>> = f
                .samples
                .iter()
                .map(|s| {
                    vec![
                        num(s.center[0]),
                        num(s.center[1]),
                        num(s.displacement[0]),
                        num(s.displacement[1]),
                        num(s.score),
                        s.accepted.to_string(),
                        s.prior.to_string(),
                    ]
                })
                .collect();
            ctx.write_csv(&format!("align/{name}/samples.csv"), &["x_m", "y_m", "dx_m", "dy_m", "score", "accepted", "prior"], &samples)?;
            let cs = f.domain;
            let mut grid = Vec::new();
            for r in 0..cs.rows {
                for c in 0..cs.cols {
                    if r % self.0.glyph_stride == 0 && c % self.0.glyph_stride == 0 {
                        let p = cs.pixel_to_phys(r, c);
                        let d = f.eval(p);
                        grid.push(vec![r.to_string(), c.to_string(), num(p[0]), num(p[1]), num(d[0]), num(d[1])]);
                    }
                }
            }
            ctx.write_csv(&format!("align/{name}/field.csv"), &["row", "col", "x_m", "y_m", "dx_m", "dy_m"], &grid)?;
            let glyphs: Vec<Vec<String>> =
                f.glyphs(self.0.glyph_stride).iter().map(|g| vec![num(g.x), num(g.y), num(g.dx), num(g.dy)]).collect();
            ctx.write_csv(&format!("align/{name}/glyphs.csv"), &["x_m", "y_m", "dx_m", "dy_m"], &glyphs)?;
            let levels: Vec<Vec<String>> = a
                .levels
                .iter()
                .map(|l| vec![l.level.to_string(), l.num_v.to_string(), l.num_h.to_string(), l.accepted.to_string(), l.total.to_string()])
                .collect();
            ctx.write_csv(&format!("align/{name}/levels.csv"), &["level", "num_v", "num_h", "accepted", "total"], &levels)?;
            let rel = format!("align/{name}/field.json");
            let path = ctx.prepare(&rel)?;
            std::fs::write(path, f.to_json()?)?;
            ctx.manifest.record(&rel);
            ctx.write_image(&format!("align/{name}/aligned.tif"), &warped)?;
        }
        Ok(())
    }
}

pub fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}
