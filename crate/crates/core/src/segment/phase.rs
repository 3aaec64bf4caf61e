use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::labels::{remove_small_components, LabelMap};
use super::threshold::{apply_thresholds, ThresholdModel};
use crate::error::{Error, Result};
use crate::imgcore::{luma, negkey, PhysicalImage};
use crate::regularize::{tv_denoise_plane, RegularizationConfig};

/// Scalar channel a difference signal is computed from. Single-channel
/// images use their only channel whatever is selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalChannel {
    #[default]
    Negkey,
    Red,
    Green,
    Blue,
    Luma,
}

pub fn channel_plane(image: &PhysicalImage, channel: SignalChannel) -> Array2<f64> {
    if image.channels() == 1 {
        return image.channel(0).to_owned();
    }
    let d = image.data();
    let (rows, cols, _) = d.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let rgb = [d[[r, c, 0]], d[[r, c, 1]], d[[r, c, 2]]];
        match channel {
            SignalChannel::Negkey => negkey(rgb),
            SignalChannel::Red => rgb[0],
            SignalChannel::Green => rgb[1],
            SignalChannel::Blue => rgb[2],
            SignalChannel::Luma => luma(rgb),
        }
    })
}

/// How a channel difference becomes a non-negative signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifferenceSign {
    /// `|s - r|`
    #[default]
    Absolute,
    /// `s - r`
    Positive,
    /// `r - s`
    Negative,
}

impl DifferenceSign {
    fn apply(self, s: f64, r: f64) -> f64 {
        match self {
            DifferenceSign::Absolute => (s - r).abs(),
            DifferenceSign::Positive => s - r,
            DifferenceSign::Negative => r - s,
        }
    }
}

/// Co-registered reference images; the first is the base.
#[derive(Clone, Debug)]
pub struct ReferenceStack {
    references: Vec<PhysicalImage>,
}

impl ReferenceStack {
    pub fn new(references: Vec<PhysicalImage>) -> Result<Self> {
        let first = references.first().ok_or_else(|| Error::invalid("reference stack is empty"))?;
        for r in &references[1..] {
            first.coords().check_same_grid(r.coords(), "reference")?;
            if r.colorspace() != first.colorspace() {
                return Err(Error::mismatch("references differ in color space"));
            }
        }
        Ok(Self { references })
    }

    pub fn base(&self) -> &PhysicalImage {
        &self.references[0]
    }

    pub fn references(&self) -> &[PhysicalImage] {
        &self.references
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }
}

/// Channel difference of `image` to `reference`.
pub fn difference(image: &PhysicalImage, reference: &PhysicalImage, channel: SignalChannel, sign: DifferenceSign) -> Result<Array2<f64>> {
    image.coords().check_same_grid(reference.coords(), "reference")?;
    let (s, r) = (channel_plane(image, channel), channel_plane(reference, channel));
    Ok(Zip::from(&s).and(&r).map_collect(|&a, &b| sign.apply(a, b)))
}

/// Pointwise maximum over the stack of the difference to the base
/// reference, clamped at 0.
pub fn fuse_references(stack: &ReferenceStack, channel: SignalChannel, sign: DifferenceSign) -> Result<Array2<f64>> {
    if stack.len() < 2 {
        return Err(Error::invalid("fusing needs at least two references"));
    }
    let base = stack.base();
    let mut floor = Array2::zeros((base.rows(), base.cols()));
    for r in &stack.references()[1..] {
        let d = difference(r, base, channel, sign)?;
        Zip::from(&mut floor).and(&d).for_each(|f, &v| *f = f64::max(*f, v));
    }
    Ok(floor)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub channel: SignalChannel,
    pub sign: DifferenceSign,
    /// Subtract the fused floor of the reference stack (needs two or more
    /// references).
    pub fuse: bool,
    /// Darcy-scale TV strength in meters; 0 disables regularization.
    pub mu: f64,
    pub max_iter: usize,
    /// Components smaller than this area (m^2) are removed; defaults to
    /// `(5 pore_length)^2` when a pore length is given.
    pub min_area: Option<f64>,
    pub pore_length: Option<f64>,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { channel: SignalChannel::Negkey, sign: DifferenceSign::Absolute, fuse: true, mu: 0.0, max_iter: 500, min_area: None, pore_length: None }
    }
}

impl PhaseConfig {
    fn min_pixels(&self, pixel_area: f64) -> usize {
        let area = self.min_area.or(self.pore_length.map(|l| (5.0 * l).powi(2))).unwrap_or(0.0);
        (area / pixel_area).ceil() as usize
    }
}

/// `max(difference - floor, 0)` of `image` against the stack, with the
/// fused floor when enabled and available.
pub fn phase_signal(image: &PhysicalImage, stack: &ReferenceStack, cfg: &PhaseConfig) -> Result<Array2<f64>> {
    if image.colorspace() != stack.base().colorspace() {
        return Err(Error::mismatch(format!("image is {:?}, references are {:?}", image.colorspace(), stack.base().colorspace())));
    }
    let diff = difference(image, stack.base(), cfg.channel, cfg.sign)?;
    if cfg.fuse && stack.len() >= 2 {
        let floor = fuse_references(stack, cfg.channel, cfg.sign)?;
        Ok(Zip::from(&diff).and(&floor).map_collect(|&d, &f| (d - f).max(0.0)))
    } else {
        Ok(diff.mapv(|d| d.max(0.0)))
    }
}

/// Binary phase indicator: floor-cleaned difference signal, regularized,
/// thresholded per label, speckle removed.
pub fn binary_concentration(
    image: &PhysicalImage,
    stack: &ReferenceStack,
    labels: &LabelMap,
    model: &ThresholdModel,
    cfg: &PhaseConfig,
) -> Result<PhysicalImage> {
    let cs = *image.coords();
    cs.check_same_grid(labels.coords(), "label map")?;
    let signal = phase_signal(image, stack, cfg)?;
    let signal = if cfg.mu > 0.0 {
        let rc = RegularizationConfig::with_mu(cfg.mu).iterations(cfg.max_iter, 1e-5);
        tv_denoise_plane(&signal.view(), &cs, &rc)?.0
    } else {
        signal
    };
    let (mask, used) = apply_thresholds(&signal, labels, model)?;
    log::debug!("phase thresholds {used:?}");
    let mask = remove_small_components(&mask, cfg.min_pixels(cs.pixel_area()));
    PhysicalImage::from_mask(&mask, cs).map(|m| m.with_timestamp(image.timestamp()))
}

/// Intersection over union of two masks; 1 when both are empty.
pub fn iou(a: &Array2<bool>, b: &Array2<bool>) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b.iter()) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::{ColorSpace, CoordinateSystem};
    use ndarray::Array3;

    fn rgb(f: impl Fn(usize, usize) -> [f64; 3]) -> PhysicalImage {
        let data = Array3::from_shape_fn((20, 30, 3), |(r, c, k)| f(r, c)[k]);
        PhysicalImage::new(data, 0.03, 0.02, [0.0, 0.0], None).unwrap()
    }

    #[test]
    fn identical_references_give_zero_floor() {
        let a = rgb(|r, c| [0.1 * (r % 3) as f64, 0.02 * (c % 5) as f64, 0.3]);
        let stack = ReferenceStack::new(vec![a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(fuse_references(&stack, SignalChannel::Negkey, DifferenceSign::Absolute).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn floor_is_order_invariant() {
        let imgs: Vec<_> = (0..4).map(|k| rgb(move |r, c| [0.5 + 0.01 * ((r * 7 + c * k) % 5) as f64, 0.2, 0.1])).collect();
        let s1 = ReferenceStack::new(vec![imgs[0].clone(), imgs[1].clone(), imgs[2].clone(), imgs[3].clone()]).unwrap();
        let s2 = ReferenceStack::new(vec![imgs[0].clone(), imgs[3].clone(), imgs[1].clone(), imgs[2].clone()]).unwrap();
        assert_eq!(
            fuse_references(&s1, SignalChannel::Red, DifferenceSign::Absolute).unwrap(),
            fuse_references(&s2, SignalChannel::Red, DifferenceSign::Absolute).unwrap()
        );
    }

    #[test]
    fn base_reference_gives_empty_mask() {
        let a = rgb(|r, c| [0.4 + 0.01 * (r % 2) as f64, 0.3, 0.02 * (c % 3) as f64]);
        let stack = ReferenceStack::new(vec![a.clone()]).unwrap();
        let labels = LabelMap::uniform(*a.coords());
        let out = binary_concentration(&a, &stack, &labels, &ThresholdModel::fixed(0.05), &PhaseConfig::default()).unwrap();
        assert_eq!(out.colorspace(), ColorSpace::Binary);
        assert!(out.plane().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn label_geometry_must_match() {
        let a = rgb(|_, _| [0.4, 0.3, 0.2]);
        let stack = ReferenceStack::new(vec![a.clone()]).unwrap();
        let other = LabelMap::uniform(CoordinateSystem::new(10, 10, 1.0, 1.0, [0.0, 0.0]).unwrap());
        assert!(binary_concentration(&a, &stack, &other, &ThresholdModel::fixed(0.05), &PhaseConfig::default()).is_err());
    }
}
