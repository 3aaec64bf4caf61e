use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::CoordinateSystem;
use crate::regularize::ParamField;

/// Affine signal-to-concentration conversion with cut-offs at 0 and 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConcentrationModel {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LinearConcentrationModel {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.0 }
    }
}

impl LinearConcentrationModel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::invalid(format!("model needs alpha > 0, got alpha = {alpha}, beta = {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        (self.alpha * s + self.beta).clamp(0.0, 1.0)
    }

    pub fn apply_plane(&self, s: &ArrayView2<f64>) -> Array2<f64> {
        s.mapv(|v| self.apply(v))
    }
}

/// Volume measure of the imaged domain: porosity and depth per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub porosity: ParamField,
    /// Depth in meters.
    pub depth: ParamField,
    /// Pixel area in square meters.
    pub pixel_area: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Geometry {
    pub fn new(coords: &CoordinateSystem, porosity: impl Into<ParamField>, depth: impl Into<ParamField>) -> Result<Self> {
        let g = Self { porosity: porosity.into(), depth: depth.into(), pixel_area: coords.pixel_area(), rows: coords.rows, cols: coords.cols };
        g.porosity.check_shape(g.rows, g.cols, "porosity")?;
        g.depth.check_shape(g.rows, g.cols, "depth")?;
        let (plo, phi) = g.porosity.min_max();
        if !(plo >= 0.0 && phi <= 1.0) {
            return Err(Error::invalid("porosity must lie in [0, 1]"));
        }
        let (dlo, dhi) = g.depth.min_max();
        if !(dlo > 0.0 && dhi.is_finite()) {
            return Err(Error::invalid("depth must be positive"));
        }
        Ok(g)
    }

    /// Pore volume per pixel, `porosity * depth * pixel_area`.
    pub fn pore_volume(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows, self.cols), |(r, c)| {
            self.porosity.value_at(r, c) * self.depth.value_at(r, c) * self.pixel_area
        })
    }
}

/// Sum of `concentration * porosity * depth * pixel_area` in cubic meters.
pub fn total_volume(concentration: &ArrayView2<f64>, geometry: &Geometry) -> Result<f64> {
    if concentration.dim() != (geometry.rows, geometry.cols) {
        return Err(Error::mismatch(format!(
            "concentration {:?} vs geometry {}x{}",
            concentration.dim(),
            geometry.rows,
            geometry.cols
        )));
    }
    let mut total = 0.0;
    for ((r, c), &v) in concentration.indexed_iter() {
        total += v * geometry.porosity.value_at(r, c) * geometry.depth.value_at(r, c);
    }
    Ok(total * geometry.pixel_area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_and_cutoffs() {
        let m = LinearConcentrationModel::new(2.0, 0.0).unwrap();
        assert_eq!(m.apply(0.1), 0.2);
        assert_eq!(m.apply(0.7), 1.0);
        assert_eq!(m.apply(-0.3), 0.0);
        assert!(LinearConcentrationModel::new(0.0, 0.0).is_err());
        assert!(LinearConcentrationModel::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn unit_square_volume() {
        let cs = CoordinateSystem::new(100, 100, 1.0, 1.0, [0.0, 0.0]).unwrap();
        let g = Geometry::new(&cs, 0.4, 0.02).unwrap();
        let v = total_volume(&Array2::ones((100, 100)).view(), &g).unwrap();
        assert!((v - 0.008).abs() < 1e-15);
        assert_eq!(total_volume(&Array2::zeros((100, 100)).view(), &g).unwrap(), 0.0);
        assert!(total_volume(&Array2::zeros((10, 100)).view(), &g).is_err());
    }
}
