use ndarray::{Array3, Zip};

use super::{ColorSpace, PhysicalImage};
use crate::error::{Error, Result};

/// Rec. 709 luma weights.
pub const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

pub fn luma(rgb: [f64; 3]) -> f64 {
    (LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2]).clamp(0.0, 1.0)
}

/// Negative of the CMYK key channel: `1 - K` with `K = 1 - max(R, G, B)`.
pub fn negkey(rgb: [f64; 3]) -> f64 {
    rgb[0].max(rgb[1]).max(rgb[2])
}

/// Hue, saturation, value with hue scaled to `[0, 1)`.
pub fn rgb_to_hsv(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [h.clamp(0.0, 1.0), s, v]
}

/// Scalar intensity plane: luma for RGB, value for HSV, the channel itself
/// for single-channel images.
pub fn intensity_plane(image: &PhysicalImage) -> ndarray::Array2<f64> {
    match image.colorspace() {
        ColorSpace::Rgb => {
            let d = image.data();
            ndarray::Array2::from_shape_fn((image.rows(), image.cols()), |(r, c)| luma([d[[r, c, 0]], d[[r, c, 1]], d[[r, c, 2]]]))
        }
        ColorSpace::Hsv => image.channel(2).to_owned(),
        _ => image.channel(0).to_owned(),
    }
}

/// Pointwise color-space conversion.
///
/// Supported pairs: RGB to GRAY/HSV/NEGKEY/RGB, and identity for the
/// single-channel spaces.
pub fn to_colorspace(image: &PhysicalImage, target: ColorSpace) -> Result<PhysicalImage> {
    let source = image.colorspace();
    if source == target {
        return Ok(image.clone());
    }
    let unsupported = || Error::UnsupportedConversion { from: source, to: target };
    if source != ColorSpace::Rgb {
        return Err(unsupported());
    }
    let (rows, cols, _) = image.data().dim();
    let d = image.data();
    let out = match target {
        ColorSpace::Gray | ColorSpace::Negkey => {
            let f = if target == ColorSpace::Gray { luma } else { negkey };
            let mut out = Array3::zeros((rows, cols, 1));
            Zip::indexed(out.index_axis_mut(ndarray::Axis(2), 0)).for_each(|(r, c), o| {
                *o = f([d[[r, c, 0]], d[[r, c, 1]], d[[r, c, 2]]]);
            });
            out
        }
        ColorSpace::Hsv => {
            let mut out = Array3::zeros((rows, cols, 3));
            for r in 0..rows {
                for c in 0..cols {
                    let hsv = rgb_to_hsv([d[[r, c, 0]], d[[r, c, 1]], d[[r, c, 2]]]);
                    for k in 0..3 {
                        out[[r, c, k]] = hsv[k];
                    }
                }
            }
            out
        }
        ColorSpace::Rgb | ColorSpace::Binary => return Err(unsupported()),
    };
    image.with_data_and_colorspace(out, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(rgb: [f64; 3]) -> PhysicalImage {
        let d = Array3::from_shape_fn((2, 2, 3), |(_, _, k)| rgb[k]);
        PhysicalImage::new(d, 1.0, 1.0, [0.0, 0.0], None).unwrap()
    }

    fn value(img: &PhysicalImage) -> f64 {
        img.data()[[0, 0, 0]]
    }

    #[test]
    fn black_and_white() {
        let black = single([0.0; 3]);
        assert_eq!(value(&to_colorspace(&black, ColorSpace::Negkey).unwrap()), 0.0);
        // K = 1 - NEGKEY
        assert_eq!(1.0 - value(&to_colorspace(&black, ColorSpace::Negkey).unwrap()), 1.0);
        let white = single([1.0; 3]);
        assert!((value(&to_colorspace(&white, ColorSpace::Gray).unwrap()) - 1.0).abs() < 1e-12);
        assert_eq!(value(&to_colorspace(&white, ColorSpace::Negkey).unwrap()), 1.0);
    }

    #[test]
    fn negkey_is_channel_max() {
        let img = single([0.5, 0.25, 0.0]);
        assert_eq!(value(&to_colorspace(&img, ColorSpace::Negkey).unwrap()), 0.5);
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(rgb_to_hsv([1.0, 0.0, 0.0]), [0.0, 1.0, 1.0]);
        let g = rgb_to_hsv([0.0, 1.0, 0.0]);
        assert!((g[0] - 1.0 / 3.0).abs() < 1e-12);
        let b = rgb_to_hsv([0.0, 0.0, 0.5]);
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-12 && b[2] == 0.5);
    }

    #[test]
    fn unsupported_pairs() {
        let gray = to_colorspace(&single([0.3, 0.3, 0.3]), ColorSpace::Gray).unwrap();
        assert!(to_colorspace(&gray, ColorSpace::Hsv).is_err());
        assert_eq!(to_colorspace(&gray, ColorSpace::Gray).unwrap(), gray);
    }

    proptest! {
        #[test]
        fn negkey_and_gray_monotone(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0, d in 0.0f64..0.5, k in 0usize..3) {
            let base = [r, g, b];
            let mut up = base;
            up[k] = (up[k] + d).min(1.0);
            prop_assert!(negkey(up) >= negkey(base));
            prop_assert!(luma(up) >= luma(base));
        }
    }
}
