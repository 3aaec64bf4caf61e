use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{add_noise, stream_rng, texture, TextureSpec};
use crate::error::{Error, Result};
use crate::imgcore::{ColorSpace, CoordinateSystem, PhysicalImage};
use crate::quantify::{total_volume, Geometry, LinearConcentrationModel};

/// Piecewise-constant injection: `rate` (m^3/s) applies from `start` (s)
/// until the next stage begins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionStage {
    pub start: f64,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlumeSpec {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub width: f64,
    pub height: f64,
    /// Injection point in physical coordinates.
    pub source: [f64; 2],
    pub porosity: f64,
    pub depth: f64,
    pub stages: Vec<InjectionStage>,
    pub times: Vec<f64>,
    pub model: LinearConcentrationModel,
    /// Concentration inside the plume core.
    pub core_concentration: f64,
    /// Width of the linear concentration ramp at the plume edge, pixels.
    pub rim_px: f64,
    pub background: TextureSpec,
    pub noise_sigma: f64,
    /// Amplitude of a per-frame low-frequency illumination sinusoid.
    pub ripple_amplitude: f64,
    /// Ripple wavelength as a fraction of the image width.
    pub ripple_wavelength: f64,
    pub num_references: usize,
}

impl Default for PlumeSpec {
    fn default() -> Self {
        let rate = 500e-6 / 3600.0;
        Self {
            seed: 0,
            rows: 400,
            cols: 640,
            width: 0.64,
            height: 0.4,
            source: [0.32, 0.0],
            porosity: 0.4,
            depth: 0.02,
            stages: vec![
                InjectionStage { start: 0.0, rate },
                InjectionStage { start: 3600.0, rate: 2.0 * rate },
                InjectionStage { start: 5400.0, rate: 0.0 },
            ],
            times: (1..=14).map(|k| k as f64 * 500.0).collect(),
            model: LinearConcentrationModel { alpha: 1.5, beta: 0.0 },
            core_concentration: 0.8,
            rim_px: 8.0,
            background: TextureSpec { correlation_px: 2.0, contrast: 0.03, mean: 0.3 },
            noise_sigma: 0.003,
            ripple_amplitude: 0.0,
            ripple_wavelength: 0.6,
            num_references: 1,
        }
    }
}

impl PlumeSpec {
    /// Injected volume up to time `t`.
    pub fn injected_volume(&self, t: f64) -> f64 {
        let mut v = 0.0;
        for (k, s) in self.stages.iter().enumerate() {
            let end = self.stages.get(k + 1).map_or(f64::INFINITY, |n| n.start);
            if t > s.start {
                v += s.rate * (t.min(end) - s.start);
            }
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct PlumeSequence {
    /// Plume-free images; the first is the baseline.
    pub references: Vec<PhysicalImage>,
    pub frames: Vec<PhysicalImage>,
    pub times: Vec<f64>,
    pub model: LinearConcentrationModel,
    pub geometry: Geometry,
    pub concentrations: Vec<Array2<f64>>,
    /// Concentration thresholded at 0.5.
    pub masks: Vec<Array2<bool>>,
    /// Injected volume at each frame time.
    pub volumes: Vec<f64>,
}

fn plume_field(coords: &CoordinateSystem, spec: &PlumeSpec, radius_px: f64) -> Array2<f64> {
    let (sr, sc) = coords.phys_to_continuous(spec.source);
    let sy = coords.dy() / coords.dx();
    Array2::from_shape_fn((coords.rows, coords.cols), |(r, c)| {
        let dr = (r as f64 - sr) * sy;
        let dc = c as f64 - sc;
        let dist = (dr * dr + dc * dc).sqrt();
        spec.core_concentration * ((radius_px - dist) / spec.rim_px).clamp(0.0, 1.0)
    })
}

/// Plume radius (pixels) whose discrete volume equals `target`, by bisection.
fn solve_radius(coords: &CoordinateSystem, spec: &PlumeSpec, geometry: &Geometry, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let volume = |r: f64| total_volume(&plume_field(coords, spec, r).view(), geometry);
    let mut lo = 0.0;
    let mut hi = (coords.rows.max(coords.cols) as f64) * 3.0 + spec.rim_px;
    if volume(hi)? < target {
        return Err(Error::invalid("injected volume exceeds the imaged pore volume"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if volume(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ripple<R: Rng>(rows: usize, cols: usize, spec: &PlumeSpec, rng: &mut R) -> Array2<f64> {
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let tilt: f64 = rng.random_range(-0.5..0.5);
    let k = std::f64::consts::TAU / (spec.ripple_wavelength * cols as f64);
    Array2::from_shape_fn((rows, cols), |(r, c)| spec.ripple_amplitude * (k * (c as f64 + tilt * r as f64) + phase).sin())
}

pub fn gen_plume_sequence(spec: &PlumeSpec) -> Result<PlumeSequence> {
    if spec.stages.iter().any(|s| s.rate < 0.0) {
        return Err(Error::invalid("injection rate must be non-negative"));
    }
    if spec.num_references == 0 {
        return Err(Error::invalid("at least one reference image is required"));
    }
    let coords = CoordinateSystem::new(spec.rows, spec.cols, spec.width, spec.height, [0.0, 0.0])?;
    let geometry = Geometry::new(&coords, spec.porosity, spec.depth)?;
    let (rows, cols) = (spec.rows, spec.cols);
    let mut bg_rng = stream_rng(spec.seed, 0);
    let background = texture(rows, cols, &spec.background, &mut bg_rng);

    // Stream 1..=num_references for references, then one per frame.
    let render = |stream: u64, conc: Option<&Array2<f64>>| -> Result<PhysicalImage> {
        let mut rng = stream_rng(spec.seed, stream);
        let rip = ripple(rows, cols, spec, &mut rng);
        let mut plane = Array2::from_shape_fn((rows, cols), |(r, c)| {
            let signal = match conc {
                Some(cf) if cf[[r, c]] > 0.0 => (cf[[r, c]] - spec.model.beta) / spec.model.alpha,
                _ => 0.0,
            };
            (background[[r, c]] + rip[[r, c]] + signal).clamp(0.0, 1.0)
        });
        add_noise(&mut plane, spec.noise_sigma, &mut rng);
        Ok(PhysicalImage::from_plane(plane, coords, ColorSpace::Gray)?)
    };
    let references = (0..spec.num_references).map(|k| render(1 + k as u64, None)).collect::<Result<Vec<_>>>()?;

    let mut frames = Vec::with_capacity(spec.times.len());
    let mut concentrations = Vec::with_capacity(spec.times.len());
    let mut volumes = Vec::with_capacity(spec.times.len());
    for (k, &t) in spec.times.iter().enumerate() {
        let v = spec.injected_volume(t);
        let radius = solve_radius(&coords, spec, &geometry, v)?;
        let conc = if v > 0.0 { plume_field(&coords, spec, radius) } else { Array2::zeros((rows, cols)) };
        frames.push(render((1 + spec.num_references + k) as u64, Some(&conc))?.with_timestamp(Some(t)));
        concentrations.push(conc);
        volumes.push(v);
    }
    let masks = concentrations.iter().map(|c| c.mapv(|v| v >= 0.5)).collect();
    Ok(PlumeSequence {
        references,
        frames,
        times: spec.times.clone(),
        model: spec.model,
        geometry,
        concentrations,
        masks,
        volumes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PlumeSpec {
        let rate = 1e-7;
        PlumeSpec {
            rows: 100,
            cols: 160,
            width: 0.16,
            height: 0.1,
            source: [0.08, 0.0],
            stages: vec![InjectionStage { start: 0.0, rate }, InjectionStage { start: 100.0, rate: 0.0 }],
            times: vec![25.0, 50.0, 100.0, 150.0],
            ..Default::default()
        }
    }

    #[test]
    fn zero_rate_frames_equal_reference() {
        let mut spec = small();
        spec.stages = vec![InjectionStage { start: 0.0, rate: 0.0 }];
        spec.noise_sigma = 0.0;
        let seq = gen_plume_sequence(&spec).unwrap();
        for f in &seq.frames {
            assert_eq!(f.data(), seq.references[0].data());
        }
    }

    #[test]
    fn volumes_follow_schedule() {
        let spec = small();
        let seq = gen_plume_sequence(&spec).unwrap();
        for (k, c) in seq.concentrations.iter().enumerate() {
            let v = total_volume(&c.view(), &seq.geometry).unwrap();
            let want = 1e-7 * spec.times[k].min(100.0);
            assert!(((v - want) / want).abs() < 1e-9, "{v} vs {want}");
            assert!((seq.volumes[k] - want).abs() < 1e-18);
        }
        assert_eq!(seq.concentrations[2], seq.concentrations[3]);
    }

    #[test]
    fn masks_threshold_concentration() {
        let seq = gen_plume_sequence(&small()).unwrap();
        for (m, c) in seq.masks.iter().zip(&seq.concentrations) {
            assert!(m.iter().zip(c.iter()).all(|(&b, &v)| b == (v >= 0.5)));
        }
    }
}
