//! Single-image and reference-relative corrections: color, geometry, drift.
//!
//! Corrections are applied in the order color, geometry, drift,
//! deformation when an image is initialized with a chain.

mod color;
mod drift;
mod geometry;

pub use self::color::{
    apply_color_correction, classic_checker_layout, classic_checker_targets, fit_affine, fit_color_correction, swatch_mean,
    ColorCorrection, Swatch,
};
pub use self::drift::{estimate_drift, DriftCorrection, DriftEstimate};
pub use self::geometry::{
    apply_geometric_correction, apply_homography, build_geometric_correction, homography_from_points, unit_square_homography,
    GeometricCorrection, GeometrySpec,
};

use crate::error::Result;
use crate::imgcore::PhysicalImage;

/// An image-to-image correction step.
pub trait Correction: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, image: &PhysicalImage) -> Result<PhysicalImage>;
}

/// Ordered sequence of corrections.
#[derive(Default)]
pub struct CorrectionChain {
    steps: Vec<Box<dyn Correction>>,
}

impl CorrectionChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, step: Box<dyn Correction>) -> Self {
        self.steps.push(step);
        self
    }

    pub fn names(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.name()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply(&self, image: &PhysicalImage) -> Result<PhysicalImage> {
        let mut current = image.clone();
        for step in &self.steps {
            let t = std::time::Instant::now();
            current = step.apply(&current)?;
            log::debug!("correction {} took {:?}", step.name(), t.elapsed());
        }
        Ok(current)
    }
}
