use serde::{Deserialize, Serialize};

use super::DisplacementField;
use crate::error::Result;
use crate::imgcore::sample::{bilinear, nearest, Border};
use crate::imgcore::{ColorSpace, PhysicalImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpDirection {
    /// `out(x) = image(psi(x))`: brings the secondary image onto the
    /// reference.
    #[default]
    Forward,
    /// `out(x) = image(psi^-1(x))`: brings the reference onto the secondary.
    Inverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

/// Resamples `image` through the field. Samples falling outside the image
/// are 0. Binary images always use nearest-neighbor lookup.
pub fn warp(image: &PhysicalImage, field: &DisplacementField, direction: WarpDirection, interpolation: Interpolation) -> Result<PhysicalImage> {
    let cs = *image.coords();
    let interpolation = if image.colorspace() == ColorSpace::Binary { Interpolation::Nearest } else { interpolation };
    let mut data = image.data().clone();
    let planes: Vec<_> = (0..image.channels()).map(|k| image.channel(k)).collect();
    for r in 0..cs.rows {
        for c in 0..cs.cols {
            let p = cs.pixel_to_phys(r, c);
            let q = match direction {
                WarpDirection::Forward => field.map(p),
                WarpDirection::Inverse => field.inverse_map(p),
            };
            let (sr, sc) = cs.phys_to_continuous(q);
            for (k, plane) in planes.iter().enumerate() {
                data[[r, c, k]] = match interpolation {
                    Interpolation::Bilinear => bilinear(plane, sr, sc, Border::Fill(0.0)),
                    Interpolation::Nearest => nearest(plane, sr, sc, Border::Fill(0.0)),
                };
            }
        }
    }
    image.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::FieldSample;
    use crate::imgcore::CoordinateSystem;
    use ndarray::Array2;

    fn constant_field(cs: CoordinateSystem, d: [f64; 2]) -> DisplacementField {
        let samples = [[0.2, 0.2], [0.8, 0.2], [0.5, 0.8]]
            .iter()
            .map(|&c| FieldSample { center: c, displacement: d, score: 1.0, accepted: true, prior: false })
            .collect();
        DisplacementField::build(cs, samples, Vec::new(), [2, 2]).unwrap()
    }

    #[test]
    fn integer_shift_forward_and_back() {
        let cs = CoordinateSystem::new(10, 10, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let plane = Array2::from_shape_fn((10, 10), |(r, c)| (r * 10 + c) as f64 / 100.0);
        let img = PhysicalImage::from_plane(plane.clone(), cs, ColorSpace::Gray).unwrap();
        // two pixels to the right
        let field = constant_field(cs, [0.2, 0.0]);
        let fwd = warp(&img, &field, WarpDirection::Forward, Interpolation::Bilinear).unwrap();
        let f = fwd.plane().unwrap();
        assert!((f[[3, 4]] - plane[[3, 6]]).abs() < 1e-9);
        assert_eq!(f[[3, 9]], 0.0);
        let inv = warp(&img, &field, WarpDirection::Inverse, Interpolation::Nearest).unwrap();
        assert!((inv.plane().unwrap()[[3, 6]] - plane[[3, 4]]).abs() < 1e-9);
    }
}
