//! Concentration maps, injection-rate calibration, segmentation comparison
//! and finger tracking.

mod compare;
mod concentration;
mod fingers;
mod model;

pub use self::compare::{compare_segmentations, overlap_gray, Comparison, ComparisonFractions, PALETTE};
pub use self::concentration::{
    calibrate, calibrate_images, concentration, concentration_signal, regression_slope, volume_series, CalibrationConfig,
    ConcentrationConfig,
};
pub use self::fingers::{detect_finger_tips, track_fingers, GrowthDirection, TipConfig, TipFrame, TrackPoint, Trajectory};
pub use self::model::{total_volume, Geometry, LinearConcentrationModel};
