use serde::{Deserialize, Serialize};

use super::{tv_denoise, ParamField, RegularizationConfig, TvOutput};
use crate::error::{Error, Result};
use crate::imgcore::PhysicalImage;

/// Which phase a Darcy-scale average is taken over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Whole material, `omega = 1`.
    Full,
    /// Pore space, `omega = g0`.
    Pore,
    /// Solid, `omega = 1 - g0`.
    Solid,
}

fn check_darcy_scale(config: &RegularizationConfig) {
    if let Some(l) = config.pore_length {
        let (mu_min, _) = config.mu.min_max();
        if mu_min < 3.0 * l {
            log::warn!("mu = {mu_min:.3e} m is below 3 pore lengths ({:.3e} m); result is not Darcy scale", 3.0 * l);
        }
    }
}

/// Darcy-scale regularization of `image` averaged over the given phase.
///
/// `pore_indicator` holds the pore-scale pore indicator `g0` in `[0, 1]`;
/// the configured `omega` is replaced by the phase weight.
pub fn upscale(image: &PhysicalImage, pore_indicator: &PhysicalImage, phase: Phase, config: &RegularizationConfig) -> Result<TvOutput> {
    image.coords().check_same_grid(pore_indicator.coords(), "pore indicator")?;
    let g0 = pore_indicator.plane()?;
    if g0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("pore indicator outside [0, 1]"));
    }
    let omega = match phase {
        Phase::Full => ParamField::Uniform(1.0),
        Phase::Pore => ParamField::Pixelwise(g0.to_owned()),
        Phase::Solid => ParamField::Pixelwise(g0.mapv(|v| 1.0 - v)),
    };
    if omega.identically_zero() {
        return Err(Error::Degenerate(format!("{phase:?} phase weight is identically zero")));
    }
    check_darcy_scale(config);
    let config = RegularizationConfig { omega, ..config.clone() };
    tv_denoise(image, &config)
}

/// Porosity field: Darcy-scale regularization of the pore indicator with
/// unit weight, clamped to `[0, 1]`.
pub fn porosity(pore_indicator: &PhysicalImage, config: &RegularizationConfig) -> Result<PhysicalImage> {
    let g0 = pore_indicator.plane()?;
    if g0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("pore indicator outside [0, 1]"));
    }
    check_darcy_scale(config);
    let config = RegularizationConfig { omega: ParamField::Uniform(1.0), ..config.clone() };
    let out = tv_denoise(pore_indicator, &config)?;
    let clamped = out.image.data().mapv(|v| v.clamp(0.0, 1.0));
    out.image.with_data(clamped)
}

/// The four regularized views of one pore-scale image plus porosity.
#[derive(Clone, Debug)]
pub struct ScaleSet {
    /// Pore-scale regularization.
    pub g: PhysicalImage,
    /// Darcy-scale, whole material.
    pub big_g: PhysicalImage,
    /// Darcy-scale, pore space.
    pub gp: PhysicalImage,
    /// Darcy-scale, solid.
    pub gs: PhysicalImage,
    /// Porosity.
    pub g0: PhysicalImage,
}

/// Computes `g` with `pore_config` and `G`, `G^p`, `G^s`, `G0` with
/// `darcy_config`.
pub fn scale_set(
    image: &PhysicalImage,
    pore_indicator: &PhysicalImage,
    pore_config: &RegularizationConfig,
    darcy_config: &RegularizationConfig,
) -> Result<ScaleSet> {
    let g = tv_denoise(image, &RegularizationConfig { omega: ParamField::Uniform(1.0), ..pore_config.clone() })?.image;
    let big_g = upscale(image, pore_indicator, Phase::Full, darcy_config)?.image;
    let gp = upscale(image, pore_indicator, Phase::Pore, darcy_config)?.image;
    let gs = upscale(image, pore_indicator, Phase::Solid, darcy_config)?.image;
    let g0 = porosity(pore_indicator, darcy_config)?;
    Ok(ScaleSet { g, big_g, gp, gs, g0 })
}
