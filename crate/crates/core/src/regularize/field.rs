use ndarray::Array2;

use crate::error::{Error, Result};
use crate::imgcore::{sample, CoordinateSystem, PhysicalImage};

/// A scalar parameter that is either constant or given per pixel.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamField {
    Uniform(f64),
    Pixelwise(Array2<f64>),
}

impl ParamField {
    pub fn value_at(&self, r: usize, c: usize) -> f64 {
        match self {
            ParamField::Uniform(v) => *v,
            ParamField::Pixelwise(a) => a[[r, c]],
        }
    }

    pub fn check_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if let ParamField::Pixelwise(a) = self {
            if a.dim() != (rows, cols) {
                return Err(Error::mismatch(format!("{what} field is {:?}, image is {rows}x{cols}", a.dim())));
            }
        }
        Ok(())
    }

    pub fn to_array(&self, rows: usize, cols: usize) -> Array2<f64> {
        match self {
            ParamField::Uniform(v) => Array2::from_elem((rows, cols), *v),
            ParamField::Pixelwise(a) => a.clone(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        match self {
            ParamField::Uniform(v) => (*v, *v),
            ParamField::Pixelwise(a) => a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn all_finite_nonnegative(&self) -> bool {
        match self {
            ParamField::Uniform(v) => v.is_finite() && *v >= 0.0,
            ParamField::Pixelwise(a) => a.iter().all(|v| v.is_finite() && *v >= 0.0),
        }
    }

    pub fn identically_zero(&self) -> bool {
        match self {
            ParamField::Uniform(v) => *v == 0.0,
            ParamField::Pixelwise(a) => a.iter().all(|&v| v == 0.0),
        }
    }

    /// Samples a single-channel physical field onto `target` by bilinear
    /// interpolation at the target pixel centers. The field values are taken
    /// in `scale` units (e.g. meters per unit intensity for a mu map).
    pub fn from_physical(field: &PhysicalImage, target: &CoordinateSystem, scale: f64) -> Result<Self> {
        let plane = field.plane()?;
        let src = field.coords();
        let out = Array2::from_shape_fn((target.rows, target.cols), |(r, c)| {
            let p = target.pixel_to_phys(r, c);
            let (sr, sc) = src.phys_to_continuous(p);
            scale * sample::bilinear(&plane, sr, sc, sample::Border::Clamp)
        });
        Ok(ParamField::Pixelwise(out))
    }
}

impl From<f64> for ParamField {
    fn from(v: f64) -> Self {
        ParamField::Uniform(v)
    }
}

impl From<Array2<f64>> for ParamField {
    fn from(a: Array2<f64>) -> Self {
        ParamField::Pixelwise(a)
    }
}
