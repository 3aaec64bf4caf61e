use serde::{Deserialize, Serialize};

use super::Correction;
use crate::correlate::{argmax, ncc_surface, refine_peak};
use crate::error::{Error, Result};
use crate::imgcore::{intensity_plane, sample, PhysicalImage, Roi};

/// Translation of `image` relative to `reference`, in pixels, such that
/// `image(r, c) ~ reference(r - dy, c - dx)`. Estimated by normalized
/// cross-correlation of the reference ROI over a window grown by
/// `max_shift` pixels, refined to subpixel accuracy.
pub fn estimate_drift(image: &PhysicalImage, reference: &PhysicalImage, roi: &Roi, max_shift: usize) -> Result<(f64, f64)> {
    image.coords().check_same_grid(reference.coords(), "drift reference")?;
    let (r0, r1, c0, c1) = roi.block(reference)?;
    let refp = intensity_plane(reference);
    let img = intensity_plane(image);
    let template = refp.slice(ndarray::s![r0..r1, c0..c1]);
    let n = template.len() as f64;
    let mean = template.sum() / n;
    if template.iter().all(|v| (v - mean).abs() < 1e-12) {
        return Err(Error::Degenerate("drift ROI has no contrast".into()));
    }
    let sr0 = r0.saturating_sub(max_shift);
    let sc0 = c0.saturating_sub(max_shift);
    let sr1 = (r1 + max_shift).min(image.rows());
    let sc1 = (c1 + max_shift).min(image.cols());
    let window = img.slice(ndarray::s![sr0..sr1, sc0..sc1]);
    let surface = ncc_surface(&template, &window);
    let (peak, _) = argmax(&surface.view());
    let (pr, pc) = refine_peak(&surface.view(), peak);
    Ok(((sc0 as f64 + pc) - c0 as f64, (sr0 as f64 + pr) - r0 as f64))
}

/// Removes translational drift relative to a fixed reference.
#[derive(Clone, Debug)]
pub struct DriftCorrection {
    pub reference: PhysicalImage,
    pub roi: Roi,
    pub max_shift: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub dx: f64,
    pub dy: f64,
}

impl DriftCorrection {
    pub fn new(reference: PhysicalImage, roi: Roi, max_shift: usize) -> Self {
        Self { reference, roi, max_shift }
    }

    pub fn estimate(&self, image: &PhysicalImage) -> Result<DriftEstimate> {
        let (dx, dy) = estimate_drift(image, &self.reference, &self.roi, self.max_shift)?;
        Ok(DriftEstimate { dx, dy })
    }

    /// Shifts `image` back by the estimated drift.
    pub fn correct(&self, image: &PhysicalImage) -> Result<(PhysicalImage, DriftEstimate)> {
        let est = self.estimate(image)?;
        log::debug!("drift ({:.3}, {:.3}) px", est.dx, est.dy);
        let planes: Vec<_> = (0..image.channels())
            .map(|k| sample::shift_plane(&image.channel(k), -est.dx, -est.dy, sample::Border::Clamp))
            .collect();
        let views: Vec<_> = planes.iter().map(|p| p.view()).collect();
        let data = ndarray::stack(ndarray::Axis(2), &views).expect("equal plane shapes");
        Ok((image.with_data(data)?, est))
    }
}

impl Correction for DriftCorrection {
    fn name(&self) -> &str {
        "drift"
    }

    fn apply(&self, image: &PhysicalImage) -> Result<PhysicalImage> {
        Ok(self.correct(image)?.0)
    }
}
