use std::path::Path;
use std::time::Instant;

use physimg::align::{align, warp, AlignConfig, Interpolation, WarpDirection};
use physimg::corrections::{
    apply_color_correction, build_geometric_correction, classic_checker_layout, fit_color_correction, Correction, CorrectionChain,
    DriftCorrection, Swatch,
};
use physimg::imgcore::{self, PhysicalImage};
use physimg::segment::LabelMap;
use rayon::prelude::*;

use crate::blocks::{analysis_registry, stem, Context, Frame};
use crate::config::{ColorBlock, CorrectionBlock, ImageGeometry, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;

/// Loads a raster with its sidecar, or attaches `geometry` when given.
pub fn load_image(path: &Path, geometry: Option<&ImageGeometry>, timestamp: Option<f64>) -> CliResult<PhysicalImage> {
    let img = match geometry {
        Some(g) => imgcore::load_with_geometry(path, g.width, g.height, g.origin, None)?,
        None => imgcore::load(path)?,
    };
    Ok(match timestamp {
        Some(t) => img.with_timestamp(Some(t)),
        None => img,
    })
}

/// Color correction fitted to each image's own swatches.
struct SwatchColor {
    swatches: Vec<Swatch>,
}

impl Correction for SwatchColor {
    fn name(&self) -> &str {
        "color"
    }
    fn apply(&self, image: &PhysicalImage) -> physimg::Result<PhysicalImage> {
        let cc = fit_color_correction(image, &self.swatches)?;
        apply_color_correction(&cc, image)
    }
}

/// Warps each image onto a fixed reference.
struct Deformation {
    reference: PhysicalImage,
    config: AlignConfig,
}

impl Correction for Deformation {
    fn name(&self) -> &str {
        "deformation"
    }
    fn apply(&self, image: &PhysicalImage) -> physimg::Result<PhysicalImage> {
        let a = align(&self.reference, image, &self.config)?;
        warp(image, &a.field, WarpDirection::Forward, Interpolation::Bilinear)
    }
}

fn swatches(block: &ColorBlock) -> Vec<Swatch> {
    match block.checker {
        Some(checker) if block.swatches.is_empty() => classic_checker_layout(checker),
        _ => block.swatches.clone(),
    }
}

/// Chains for the baseline reference, the other references and the images.
/// Drift and deformation are measured against the corrected baseline.
fn build_chains(cfg: &PipelineConfig, raw_base: Option<&PhysicalImage>) -> CliResult<(CorrectionChain, CorrectionChain, CorrectionChain)> {
    let mut base = CorrectionChain::new();
    for block in &cfg.corrections {
        match block {
            CorrectionBlock::Color(c) => base = base.push(Box::new(SwatchColor { swatches: swatches(c) })),
            CorrectionBlock::Geometry(spec) => base = base.push(Box::new(build_geometric_correction(spec)?)),
            _ => {}
        }
    }
    let corrected_base = raw_base.map(|b| base.apply(b)).transpose()?;
    let mut refs = CorrectionChain::new();
    let mut images = CorrectionChain::new();
    for block in &cfg.corrections {
        match block {
            CorrectionBlock::Color(c) => {
                refs = refs.push(Box::new(SwatchColor { swatches: swatches(c) }));
                images = images.push(Box::new(SwatchColor { swatches: swatches(c) }));
            }
            CorrectionBlock::Geometry(spec) => {
                refs = refs.push(Box::new(build_geometric_correction(spec)?));
                images = images.push(Box::new(build_geometric_correction(spec)?));
            }
            CorrectionBlock::Drift(d) => {
                let r = corrected_base.clone().expect("validated");
                refs = refs.push(Box::new(DriftCorrection::new(r.clone(), d.roi, d.max_shift)));
                images = images.push(Box::new(DriftCorrection::new(r, d.roi, d.max_shift)));
            }
            CorrectionBlock::Deformation(a) => {
                let r = corrected_base.clone().expect("validated");
                images = images.push(Box::new(Deformation { reference: r, config: a.clone() }));
            }
        }
    }
    Ok((base, refs, images))
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
}

/// Validates, then executes corrections and analyses in declared order and
/// writes `manifest.json`. Per-image failures are recorded and the series
/// continues; the run then reports a runtime error after the manifest is
/// written.
pub fn run(cfg: &PipelineConfig) -> CliResult<RunOutcome> {
    run_seeded(cfg, None)
}

/// Like [`run`], with a label map available to the analyses from the start.
pub fn run_seeded(cfg: &PipelineConfig, labels: Option<LabelMap>) -> CliResult<RunOutcome> {
    cfg.validate()?;
    let canonical = cfg.canonical()?;
    let registry = analysis_registry();
    let blocks = cfg.analyses.iter().map(|s| registry.build(s)).collect::<CliResult<Vec<_>>>()?;
    let paths = cfg.image_paths()?;
    let mut names: Vec<String> = paths.iter().map(|p| stem(p)).collect();
    let mut seen = std::collections::BTreeSet::new();
    if names.iter().any(|n| !seen.insert(n.clone())) {
        return Err(CliError::Validation("input image file stems must be unique".into()));
    }

    std::fs::create_dir_all(&cfg.output)?;
    let mut ctx = Context::new(&cfg.output);
    ctx.labels = labels;
    let geometry = cfg.input.geometry.as_ref();

    let t = Instant::now();
    let raw_refs = cfg.input.references.iter().map(|p| load_image(p, geometry, None)).collect::<CliResult<Vec<_>>>()?;
    let (base_chain, ref_chain, image_chain) = build_chains(cfg, raw_refs.first())?;
    log::info!("block=chain corrections={:?} seconds={:.3}", image_chain.names(), t.elapsed().as_secs_f64());

    for (k, r) in raw_refs.iter().enumerate() {
        let chain = if k == 0 { &base_chain } else { &ref_chain };
        let corrected = chain.apply(r)?;
        ctx.write_image(&format!("references/{}.tif", stem(&cfg.input.references[k])), &corrected)?;
        ctx.references.push(corrected);
    }

    let timestamps = cfg.input.timestamps.clone();
    let loaded: Vec<_> = paths
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let t = Instant::now();
            let r = load_image(p, geometry, timestamps.as_ref().map(|ts| ts[k])).and_then(|img| Ok(image_chain.apply(&img)?));
            (r, t.elapsed().as_secs_f64())
        })
        .collect();
    for (k, (r, secs)) in loaded.into_iter().enumerate() {
        let name = std::mem::take(&mut names[k]);
        match r {
            Ok(image) => {
                log::info!("block=corrections item={name} status=ok seconds={secs:.3}");
                ctx.write_image(&format!("corrected/{name}.tif"), &image)?;
                ctx.frames.push(Frame { name, image });
            }
            Err(e) => ctx.manifest.fail("corrections", &name, e),
        }
    }

    for block in &blocks {
        let t = Instant::now();
        if let Err(e) = block.run(&mut ctx) {
            ctx.manifest.fail(block.kind(), "series", &e);
        }
        log::info!("block={} seconds={:.3}", block.kind(), t.elapsed().as_secs_f64());
    }

    let failures = ctx.manifest.failures().len();
    let manifest = ctx.manifest.finish(canonical)?;
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} item(s) failed; see {}", cfg.output.join("manifest.json").display())));
    }
    Ok(RunOutcome { manifest })
}
