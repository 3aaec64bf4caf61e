use ndarray::{Array2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{total_volume, Geometry, LinearConcentrationModel};
use crate::error::{Error, Result};
use crate::imgcore::PhysicalImage;
use crate::regularize::{tv_denoise_plane, RegularizationConfig};
use crate::segment::{difference, fuse_references, DifferenceSign, ReferenceStack, SignalChannel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConcentrationConfig {
    pub channel: SignalChannel,
    pub sign: DifferenceSign,
    /// Subtract the fused floor of the reference stack.
    pub fuse: bool,
    /// Darcy-scale TV strength in meters; 0 disables regularization.
    pub mu: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self { channel: SignalChannel::Negkey, sign: DifferenceSign::Positive, fuse: false, mu: 0.0, max_iter: 1000, tol: 1e-6 }
    }
}

/// Regularized difference signal of `image` against the stack. Negative
/// values are kept; the model's cut-off removes them.
pub fn concentration_signal(image: &PhysicalImage, stack: &ReferenceStack, cfg: &ConcentrationConfig) -> Result<Array2<f64>> {
    let mut signal = difference(image, stack.base(), cfg.channel, cfg.sign)?;
    if cfg.fuse && stack.len() >= 2 {
        let floor = fuse_references(stack, cfg.channel, cfg.sign)?;
        Zip::from(&mut signal).and(&floor).for_each(|s, &f| *s -= f);
    }
    if cfg.mu > 0.0 {
        let rc = RegularizationConfig::with_mu(cfg.mu).iterations(cfg.max_iter, cfg.tol);
        signal = tv_denoise_plane(&signal.view(), image.coords(), &rc)?.0;
    }
    Ok(signal)
}

/// Concentration field `clamp(alpha s + beta, 0, 1)` of the regularized
/// signal. A model is required.
pub fn concentration(image: &PhysicalImage, stack: &ReferenceStack, model: Option<&LinearConcentrationModel>, cfg: &ConcentrationConfig) -> Result<PhysicalImage> {
    let model = model.ok_or_else(|| Error::invalid("no concentration model: calibrate or give alpha and beta"))?;
    let signal = concentration_signal(image, stack, cfg)?;
    let out = PhysicalImage::from_plane_clamped(model.apply_plane(&signal.view()), *image.coords())?;
    Ok(out.with_timestamp(image.timestamp()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Fixed offset of the model.
    pub beta: f64,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { beta: 0.0, rel_tol: 1e-12 }
    }
}

/// Least-squares slope of `values` against `times`.
pub fn regression_slope(times: &[f64], values: &[f64]) -> f64 {
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mv = values.iter().sum::<f64>() / n;
    let num: f64 = times.iter().zip(values).map(|(t, v)| (t - mt) * (v - mv)).sum();
    let den: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    num / den
}

/// Volume series of precomputed signals under `model`.
pub fn volume_series(signals: &[Array2<f64>], model: &LinearConcentrationModel, geometry: &Geometry) -> Result<Vec<f64>> {
    signals.iter().map(|s| total_volume(&model.apply_plane(&s.view()).view(), geometry)).collect()
}

/// Scale `alpha` such that the regression slope of total volume against
/// time equals `rate` (m^3/s), for signals recorded during constant-rate
/// injection.
pub fn calibrate(signals: &[Array2<f64>], times: &[f64], rate: f64, geometry: &Geometry, cfg: &CalibrationConfig) -> Result<LinearConcentrationModel> {
    if signals.len() < 2 || signals.len() != times.len() {
        return Err(Error::invalid("calibration needs at least two frames with matching times"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("calibration times must be strictly increasing"));
    }
    if !(rate > 0.0) {
        return Err(Error::Degenerate("calibration needs a positive injection rate".into()));
    }
    let slope = |alpha: f64| -> Result<f64> {
        let m = LinearConcentrationModel { alpha, beta: cfg.beta };
        Ok(regression_slope(times, &volume_series(signals, &m, geometry)?))
    };
    let (mut lo, mut hi) = (1e-9, 1.0);
    while slope(hi)? < rate {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Degenerate("signal does not grow enough over the series to match the injection rate".into()));
        }
    }
    while slope(lo)? > rate {
        lo /= 2.0;
        if lo < 1e-15 {
            return Err(Error::Degenerate("volume slope exceeds the rate for every positive alpha".into()));
        }
    }
    while (hi - lo) > cfg.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if slope(mid)? < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    LinearConcentrationModel::new(0.5 * (lo + hi), cfg.beta)
}

/// Computes the signals of `frames` (in parallel) and calibrates.
pub fn calibrate_images(
    frames: &[PhysicalImage],
    stack: &ReferenceStack,
    rate: f64,
    geometry: &Geometry,
    signal_cfg: &ConcentrationConfig,
    cfg: &CalibrationConfig,
) -> Result<(LinearConcentrationModel, Vec<Array2<f64>>)> {
    let times = frames
        .iter()
        .map(|f| f.timestamp().ok_or_else(|| Error::invalid("calibration frames need timestamps")))
        .collect::<Result<Vec<_>>>()?;
    let signals = frames.par_iter().map(|f| concentration_signal(f, stack, signal_cfg)).collect::<Result<Vec<_>>>()?;
    Ok((calibrate(&signals, &times, rate, geometry, cfg)?, signals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::CoordinateSystem;

    fn growing(k: usize) -> Vec<Array2<f64>> {
        // k frames, frame j has j*10 pixels at signal 0.2
        (0..k).map(|j| Array2::from_shape_fn((10, 40), |(r, c)| if r * 40 + c < j * 10 { 0.2 } else { 0.0 })).collect()
    }

    #[test]
    fn recovers_alpha_and_scales_inversely() {
        let cs = CoordinateSystem::new(10, 40, 0.4, 0.1, [0.0, 0.0]).unwrap();
        let g = Geometry::new(&cs, 0.5, 0.01).unwrap();
        let times: Vec<f64> = (0..6).map(|j| j as f64 * 10.0).collect();
        let signals = growing(6);
        // alpha = 2: volume per frame = j*10 * 0.4 * 0.5*0.01*1e-4 -> slope 2e-7 per 10 s
        let rate = 10.0 * 0.4 * 0.5 * 0.01 * 1e-4 / 10.0;
        let m = calibrate(&signals, &times, rate, &g, &CalibrationConfig::default()).unwrap();
        assert!((m.alpha - 2.0).abs() < 1e-9, "{}", m.alpha);
        let scaled: Vec<_> = signals.iter().map(|s| s * 4.0).collect();
        let m4 = calibrate(&scaled, &times, rate, &g, &CalibrationConfig::default()).unwrap();
        assert!((m4.alpha * 4.0 / m.alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_growth_is_degenerate() {
        let cs = CoordinateSystem::new(10, 40, 0.4, 0.1, [0.0, 0.0]).unwrap();
        let g = Geometry::new(&cs, 0.5, 0.01).unwrap();
        let flat = vec![Array2::zeros((10, 40)); 4];
        let times = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(calibrate(&flat, &times, 1e-6, &g, &CalibrationConfig::default()), Err(Error::Degenerate(_))));
        assert!(calibrate(&flat, &times, 0.0, &g, &CalibrationConfig::default()).is_err());
    }
}
