//! Physical images: intensity tensors tied to a physical rectangle.

mod color;
mod coords;
mod grid;
mod image;
pub mod io;
mod patches;
mod roi;
pub mod sample;

pub use self::color::{intensity_plane, luma, negkey, rgb_to_hsv, to_colorspace, LUMA};
pub use self::coords::CoordinateSystem;
pub use self::grid::{add_grid, GRID_RGB};
pub use self::image::{ColorSpace, PhysicalImage};
pub use self::io::{load, load_raster, load_with_geometry, save, save_raster, Sidecar};
pub use self::patches::{make_patches, patch_blocks, PatchSet};
pub use self::roi::{extract_block, extract_roi, roi_pixel_block, Roi};

