use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{add_noise, stream_rng};
use crate::corrections::{apply_homography, unit_square_homography};
use crate::error::{Error, Result};
use crate::imgcore::{ColorSpace, CoordinateSystem, PhysicalImage};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LaserGridSpec {
    pub seed: u64,
    /// Physical size of the gridded target in meters.
    pub target_width: f64,
    pub target_height: f64,
    /// Target pixel pitch used to express line widths.
    pub pitch: f64,
    pub spacing: f64,
    /// Gaussian line half-width in target pixels.
    pub line_sigma_px: f64,
    /// Distorted image size `[rows, cols]`.
    pub shape: [usize; 2],
    /// Where the target corners land in the distorted image, `(col, row)`
    /// edge coordinates, ordered top-left, top-right, bottom-right,
    /// bottom-left.
    pub corners: [[f64; 2]; 4],
    pub bulge: [f64; 2],
    pub background: f64,
    pub line_intensity: f64,
    pub noise_sigma: f64,
}

impl Default for LaserGridSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            target_width: 1.0,
            target_height: 0.6,
            pitch: 1e-3,
            spacing: 0.1,
            line_sigma_px: 1.5,
            shape: [600, 1000],
            corners: [[0.0, 0.0], [1000.0, 0.0], [1000.0, 600.0], [0.0, 600.0]],
            bulge: [0.0; 2],
            background: 0.1,
            line_intensity: 0.9,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LaserGrid {
    pub image: PhysicalImage,
    /// Homography from normalized target coordinates (after bulge) to
    /// distorted edge coordinates.
    pub homography: [[f64; 3]; 3],
}

fn line_profile(pos_px: f64, spacing_px: f64, sigma: f64) -> f64 {
    let k = (pos_px / spacing_px).round();
    let d = pos_px - k * spacing_px;
    (-d * d / (2.0 * sigma * sigma)).exp()
}

fn bulge_inv(w: f64, k: f64) -> f64 {
    if k.abs() < 1e-12 {
        return w;
    }
    let b = 1.0 + k;
    (b - (b * b - 4.0 * k * w).max(0.0).sqrt()) / (2.0 * k)
}

/// Ideal grid intensity at target position `(x, y_down)` in target pixels.
pub fn ideal_grid_intensity(spec: &LaserGridSpec, x_px: f64, y_px: f64) -> f64 {
    let s = spec.spacing / spec.pitch;
    let l = line_profile(x_px, s, spec.line_sigma_px).max(line_profile(y_px, s, spec.line_sigma_px));
    spec.background + (spec.line_intensity - spec.background) * l
}

/// Renders a grid with lines every `spacing` through bulge then homography.
pub fn gen_laser_grid(spec: &LaserGridSpec) -> Result<LaserGrid> {
    if spec.bulge.iter().any(|k| !(k.abs() < 1.0)) {
        return Err(Error::invalid("bulge coefficients must satisfy |k| < 1"));
    }
    let h = unit_square_homography(&spec.corners)?;
    let hinv = h.try_inverse().ok_or_else(|| Error::Degenerate("homography not invertible".into()))?;
    let [rows, cols] = spec.shape;
    let tw = spec.target_width / spec.pitch;
    let th = spec.target_height / spec.pitch;
    let mut plane = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let qb = apply_homography(&hinv, [c as f64 + 0.5, r as f64 + 0.5]);
        let u = bulge_inv(qb[0], spec.bulge[0]);
        let v = bulge_inv(qb[1], spec.bulge[1]);
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return spec.background;
        }
        ideal_grid_intensity(spec, u * tw, v * th)
    });
    add_noise(&mut plane, spec.noise_sigma, &mut stream_rng(spec.seed, 0));
    let coords = CoordinateSystem::new(rows, cols, cols as f64 * spec.pitch, rows as f64 * spec.pitch, [0.0, 0.0])?;
    Ok(LaserGrid {
        image: PhysicalImage::from_plane(plane, coords, ColorSpace::Gray)?,
        homography: [0, 1, 2].map(|i| [h[(i, 0)], h[(i, 1)], h[(i, 2)]]),
    })
}
