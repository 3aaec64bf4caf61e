use ndarray::s;
use serde::{Deserialize, Serialize};

use super::PhysicalImage;
use crate::error::{Error, Result};

/// Slack (in pixels) when deciding whether a pixel center lies in a box,
/// absorbing round-off in `coordinate / pitch`.
const CENTER_SLACK: f64 = 1e-7;

/// Axis-aligned physical box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub lower_left: [f64; 2],
    pub upper_right: [f64; 2],
}

impl Roi {
    pub fn new(lower_left: [f64; 2], upper_right: [f64; 2]) -> Self {
        Self { lower_left, upper_right }
    }

    pub fn whole(cs: &super::CoordinateSystem) -> Self {
        Self { lower_left: cs.origin, upper_right: [cs.right(), cs.top()] }
    }

    pub fn block(&self, image: &PhysicalImage) -> Result<(usize, usize, usize, usize)> {
        roi_pixel_block(image, self.lower_left, self.upper_right)
    }

    pub fn extract(&self, image: &PhysicalImage) -> Result<PhysicalImage> {
        extract_roi(image, self.lower_left, self.upper_right)
    }
}

/// Pixel block `(r0, r1, c0, c1)` (half-open) of all pixels whose centers lie
/// in the physical box, clipped to the domain.
pub fn roi_pixel_block(image: &PhysicalImage, lower_left: [f64; 2], upper_right: [f64; 2]) -> Result<(usize, usize, usize, usize)> {
    if !(lower_left[0] < upper_right[0] && lower_left[1] < upper_right[1]) {
        return Err(Error::invalid("ROI lower-left corner must be below and left of the upper-right corner"));
    }
    let cs = image.coords();
    // Continuous positions: pixel k has its center at k.
    let c_lo = ((lower_left[0] - cs.origin[0]) / cs.dx() - 0.5 - CENTER_SLACK).ceil();
    let c_hi = ((upper_right[0] - cs.origin[0]) / cs.dx() - 0.5 + CENTER_SLACK).floor();
    let r_lo = ((cs.top() - upper_right[1]) / cs.dy() - 0.5 - CENTER_SLACK).ceil();
    let r_hi = ((cs.top() - lower_left[1]) / cs.dy() - 0.5 + CENTER_SLACK).floor();

    let c0 = c_lo.max(0.0);
    let c1 = c_hi.min(cs.cols as f64 - 1.0);
    let r0 = r_lo.max(0.0);
    let r1 = r_hi.min(cs.rows as f64 - 1.0);
    if c0 > c1 || r0 > r1 {
        return Err(Error::EmptyRoi);
    }
    Ok((r0 as usize, r1 as usize + 1, c0 as usize, c1 as usize + 1))
}

/// Rectangular sub-image given by physical corners; partially outside ROIs
/// are clipped to the domain.
pub fn extract_roi(image: &PhysicalImage, lower_left: [f64; 2], upper_right: [f64; 2]) -> Result<PhysicalImage> {
    let (r0, r1, c0, c1) = roi_pixel_block(image, lower_left, upper_right)?;
    extract_block(image, r0, r1, c0, c1)
}

/// Sub-image of the half-open pixel block.
pub fn extract_block(image: &PhysicalImage, r0: usize, r1: usize, c0: usize, c1: usize) -> Result<PhysicalImage> {
    if r1 < r0 + 2 || c1 < c0 + 2 {
        return Err(Error::invalid(format!("sub-image {}x{} is smaller than 2x2 pixels", r1.saturating_sub(r0), c1.saturating_sub(c0))));
    }
    let coords = image.coords().sub(r0, r1, c0, c1)?;
    let data = image.data().slice(s![r0..r1, c0..c1, ..]).to_owned();
    Ok(PhysicalImage::from_parts_unchecked(data, coords, image.timestamp(), image.colorspace()))
}
