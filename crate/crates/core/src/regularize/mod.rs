//! Weighted total-variation regularization and pore-to-Darcy upscaling.
//!
//! The regularization parameter `mu` is a physical length (meters, for a
//! unitless signal). It is converted to pixels through the image pitch, so a
//! fixed `mu` gives resolution-independent results. `mu` well below the pore
//! length keeps the pore structure (pore-scale image); `mu` well above it
//! averages it out (Darcy-scale image). The fidelity weight `omega` selects
//! which phase the average is taken over.

mod field;
mod tv;
mod upscale;

pub use self::field::ParamField;
pub use self::tv::{
    objective, pixel_problem, split_bregman, tv_denoise, tv_denoise_plane, PixelProblem, SolverControls, TvDiagnostics,
    TvOutput,
};
pub use self::upscale::{porosity, scale_set, upscale, Phase, ScaleSet};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizationConfig {
    /// Regularization strength in meters (scalar or per pixel).
    pub mu: ParamField,
    /// Fidelity weight (scalar or per pixel), non-negative.
    pub omega: ParamField,
    /// Bregman splitting penalty; `None` picks one from the mean pixel-unit
    /// edge weight.
    pub bregman_penalty: Option<f64>,
    pub max_iter: usize,
    /// Stop once the relative L2 change of an iterate drops below this.
    pub tol: f64,
    /// Gauss-Seidel sweeps per outer iteration.
    pub sweeps: usize,
    /// Characteristic pore diameter in meters, if known.
    pub pore_length: Option<f64>,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            mu: ParamField::Uniform(0.0),
            omega: ParamField::Uniform(1.0),
            bregman_penalty: None,
            max_iter: 1000,
            tol: 1e-6,
            sweeps: 2,
            pore_length: None,
        }
    }
}

impl RegularizationConfig {
    pub fn with_mu(mu: impl Into<ParamField>) -> Self {
        Self { mu: mu.into(), ..Self::default() }
    }

    pub fn omega(mut self, omega: impl Into<ParamField>) -> Self {
        self.omega = omega.into();
        self
    }

    pub fn penalty(mut self, p: f64) -> Self {
        self.bregman_penalty = Some(p);
        self
    }

    pub fn iterations(mut self, max_iter: usize, tol: f64) -> Self {
        self.max_iter = max_iter;
        self.tol = tol;
        self
    }

    pub fn pore_length(mut self, l: f64) -> Self {
        self.pore_length = Some(l);
        self
    }

    /// Solver controls for a problem whose mean pixel-unit edge weight is
    /// `mean_edge`.
    pub fn controls(&self, mean_edge: f64) -> SolverControls {
        let penalty = self.bregman_penalty.unwrap_or_else(|| (10.0 * mean_edge).clamp(1.0, 50.0));
        SolverControls { penalty, max_iter: self.max_iter, tol: self.tol, sweeps: self.sweeps }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.all_finite_nonnegative() {
            return Err(Error::invalid("mu must be finite and non-negative"));
        }
        if !self.omega.all_finite_nonnegative() {
            return Err(Error::invalid("omega must be finite and non-negative"));
        }
        if self.omega.identically_zero() {
            return Err(Error::Degenerate("omega is identically zero".into()));
        }
        if let Some(p) = self.bregman_penalty {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid("Bregman penalty must be positive"));
            }
        }
        if self.max_iter == 0 || self.sweeps == 0 {
            return Err(Error::invalid("max_iter and sweeps must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be non-negative"));
        }
        if let Some(l) = self.pore_length {
            if !(l > 0.0) {
                return Err(Error::invalid("pore length must be positive"));
            }
        }
        Ok(())
    }
}
