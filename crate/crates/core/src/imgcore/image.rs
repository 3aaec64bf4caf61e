use ndarray::{Array2, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::CoordinateSystem;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ColorSpace {
    Rgb,
    Gray,
    Hsv,
    /// Negative of the key channel of CMYK, i.e. `max(R, G, B)`.
    Negkey,
    Binary,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Rgb | ColorSpace::Hsv => 3,
            ColorSpace::Gray | ColorSpace::Negkey | ColorSpace::Binary => 1,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "RGB" => Ok(ColorSpace::Rgb),
            "GRAY" | "GREY" => Ok(ColorSpace::Gray),
            "HSV" => Ok(ColorSpace::Hsv),
            "NEGKEY" => Ok(ColorSpace::Negkey),
            "BINARY" => Ok(ColorSpace::Binary),
            other => Err(Error::invalid(format!("unknown color space `{other}`"))),
        }
    }
}

/// Dense intensity tensor of shape `(rows, cols, channels)` with an attached
/// physical coordinate system.
///
/// Values live in `[0, 1]`; binary images hold exactly 0 or 1. Images are
/// immutable values: every operation returns a new image.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalImage {
    data: Array3<f64>,
    coords: CoordinateSystem,
    timestamp: Option<f64>,
    colorspace: ColorSpace,
}

impl PhysicalImage {
    /// Builds an image with the default color space for its channel count
    /// (RGB for three channels, GRAY for one).
    pub fn new(data: Array3<f64>, width: f64, height: f64, origin: [f64; 2], timestamp: Option<f64>) -> Result<Self> {
        let cs = match data.dim().2 {
            3 => ColorSpace::Rgb,
            1 => ColorSpace::Gray,
            p => return Err(Error::invalid(format!("unsupported channel count {p}"))),
        };
        Self::with_colorspace(data, width, height, origin, timestamp, cs)
    }

    pub fn with_colorspace(
        data: Array3<f64>,
        width: f64,
        height: f64,
        origin: [f64; 2],
        timestamp: Option<f64>,
        colorspace: ColorSpace,
    ) -> Result<Self> {
        let (rows, cols, _) = data.dim();
        let coords = CoordinateSystem::new(rows, cols, width, height, origin)?;
        Self::from_parts(data, coords, timestamp, colorspace)
    }

    pub fn from_parts(
        data: Array3<f64>,
        coords: CoordinateSystem,
        timestamp: Option<f64>,
        colorspace: ColorSpace,
    ) -> Result<Self> {
        let (rows, cols, p) = data.dim();
        if rows != coords.rows || cols != coords.cols {
            return Err(Error::mismatch(format!(
                "data {rows}x{cols} vs coordinate system {}x{}",
                coords.rows, coords.cols
            )));
        }
        if p != colorspace.channels() {
            return Err(Error::invalid(format!("{colorspace:?} requires {} channel(s), got {p}", colorspace.channels())));
        }
        if let Some(t) = timestamp {
            if !t.is_finite() {
                return Err(Error::invalid("timestamp must be finite"));
            }
        }
        for &v in data.iter() {
            if !v.is_finite() {
                return Err(Error::invalid("NaN or infinite intensity"));
            }
            if colorspace == ColorSpace::Binary {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::invalid(format!("binary image holds value {v}")));
                }
            } else if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
            }
        }
        Ok(Self { data, coords, timestamp, colorspace })
    }

    /// Single-channel image from a plane on the given grid.
    pub fn from_plane(plane: Array2<f64>, coords: CoordinateSystem, colorspace: ColorSpace) -> Result<Self> {
        let data = plane.insert_axis(Axis(2));
        Self::from_parts(data, coords, None, colorspace)
    }

    /// Single-channel image clamping values into `[0, 1]` first.
    pub fn from_plane_clamped(plane: Array2<f64>, coords: CoordinateSystem) -> Result<Self> {
        Self::from_plane(plane.mapv(|v| v.clamp(0.0, 1.0)), coords, ColorSpace::Gray)
    }

    /// Binary image from a boolean mask.
    pub fn from_mask(mask: &Array2<bool>, coords: CoordinateSystem) -> Result<Self> {
        Self::from_plane(mask.mapv(|b| if b { 1.0 } else { 0.0 }), coords, ColorSpace::Binary)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f64> {
        self.data
    }

    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn rows(&self) -> usize {
        self.coords.rows
    }

    pub fn cols(&self) -> usize {
        self.coords.cols
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn width(&self) -> f64 {
        self.coords.width
    }

    pub fn height(&self) -> f64 {
        self.coords.height
    }

    pub fn origin(&self) -> [f64; 2] {
        self.coords.origin
    }

    pub fn timestamp(&self) -> Option<f64> {
        self.timestamp
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn with_timestamp(mut self, timestamp: Option<f64>) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn channel(&self, k: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(2), k)
    }

    /// The only channel of a single-channel image.
    pub fn plane(&self) -> Result<ArrayView2<'_, f64>> {
        if self.channels() != 1 {
            return Err(Error::invalid(format!("expected a single-channel image, got {} channels", self.channels())));
        }
        Ok(self.channel(0))
    }

    /// Boolean view of a binary (or thresholded at 0.5) single-channel image.
    pub fn mask(&self) -> Result<Array2<bool>> {
        Ok(self.plane()?.mapv(|v| v >= 0.5))
    }

    /// Replaces the tensor, keeping geometry, timestamp and color space.
    pub fn with_data(&self, data: Array3<f64>) -> Result<Self> {
        Self::from_parts(data, self.coords, self.timestamp, self.colorspace)
    }

    pub fn with_data_and_colorspace(&self, data: Array3<f64>, colorspace: ColorSpace) -> Result<Self> {
        Self::from_parts(data, self.coords, self.timestamp, colorspace)
    }

    pub(crate) fn from_parts_unchecked(
        data: Array3<f64>,
        coords: CoordinateSystem,
        timestamp: Option<f64>,
        colorspace: ColorSpace,
    ) -> Self {
        debug_assert_eq!(data.dim().0, coords.rows);
        debug_assert_eq!(data.dim().1, coords.cols);
        Self { data, coords, timestamp, colorspace }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_scale_pitch_is_one_millimeter() {
        let img = PhysicalImage::new(Array3::zeros((1500, 2800, 3)), 2.8, 1.5, [0.0, 0.0], None).unwrap();
        assert_eq!(img.colorspace(), ColorSpace::Rgb);
        assert!((img.coords().dx() - 0.001).abs() < 1e-15);
        assert!((img.coords().dy() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn zero_gray() {
        let img = PhysicalImage::new(Array3::zeros((2, 2, 1)), 1.0, 1.0, [0.0, 0.0], Some(12.5)).unwrap();
        assert_eq!(img.colorspace(), ColorSpace::Gray);
        assert!(img.data().iter().all(|&v| v == 0.0));
        assert_eq!(img.timestamp(), Some(12.5));
    }

    #[test]
    fn nan_rejected() {
        let mut d = Array3::zeros((4, 4, 3));
        d[[1, 2, 0]] = f64::NAN;
        assert!(matches!(PhysicalImage::new(d, 1.0, 1.0, [0.0, 0.0], None), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bad_channels_and_dims() {
        assert!(PhysicalImage::new(Array3::zeros((4, 4, 2)), 1.0, 1.0, [0.0, 0.0], None).is_err());
        assert!(PhysicalImage::new(Array3::zeros((4, 4, 1)), 0.0, 1.0, [0.0, 0.0], None).is_err());
        assert!(PhysicalImage::new(Array3::zeros((1, 4, 1)), 1.0, 1.0, [0.0, 0.0], None).is_err());
    }

    #[test]
    fn binary_must_be_zero_one() {
        let mut d = Array3::zeros((3, 3, 1));
        d[[0, 0, 0]] = 0.5;
        assert!(PhysicalImage::with_colorspace(d, 1.0, 1.0, [0.0, 0.0], None, ColorSpace::Binary).is_err());
    }
}
