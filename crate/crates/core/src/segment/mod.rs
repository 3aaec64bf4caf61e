//! Facies labeling, histogram thresholds and binary phase extraction.

mod histogram;
mod labels;
mod phase;
mod threshold;
mod watershed;

pub use self::histogram::{dynamic_threshold, is_bimodal, otsu_bin, otsu_threshold, Bimodality, Histogram, OTSU_TIE};
pub use self::labels::{connected_components, remove_small_components, LabelMap};
pub use self::phase::{
    binary_concentration, channel_plane, difference, fuse_references, iou, phase_signal, DifferenceSign, PhaseConfig, ReferenceStack,
    SignalChannel,
};
pub use self::threshold::{apply_thresholds, threshold_registry, Interval, ThresholdModel, ThresholdStrategy};
pub use self::watershed::{flood, gradient_modulus, watershed_labels, WatershedConfig};
