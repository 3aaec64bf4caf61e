//! Patchwise image alignment: per-patch translation estimates are
//! interpolated into a smooth displacement field, refined coarse to fine.
//!
//! Displacements are in meters with x to the right and y up. The field `d`
//! defines `psi(x) = x + d(x)` with `reference(x) ~ secondary(psi(x))`.

mod features;
mod field;
mod matcher;
mod multilevel;
mod tps;
mod warp;

pub use self::features::FeatureMatcher;
pub use self::field::{fidelity_raster, fixed_sides, BoundaryCondition, DisplacementField, FieldSample, Glyph, GridMap, Side};
pub use self::matcher::{estimate_patch_translation, matcher_registry, MatchConfig, NccMatcher, PatchMatch, PatchMatcher};
pub use self::multilevel::{align, AlignConfig, Alignment, LevelReport, LevelSpec};
pub use self::tps::ThinPlateSpline;
pub use self::warp::{warp, Interpolation, WarpDirection};
