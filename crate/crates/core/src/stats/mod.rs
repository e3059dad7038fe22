//! Significance testing and detection scoring.

pub mod null;
pub mod peaks;
pub mod roc;
pub mod score;

pub use null::{calibrate_null, NullCalibration, NullFamily};
pub use peaks::{extract_detections, Detection};
pub use roc::{roc_auc, RocCurve, RocPoint};
pub use score::{apply_assignment, best_assignment, score, DetectionReport};

/// Matching margin for a filter of width `m`.
pub fn default_margin(width: usize) -> usize {
    width / 2
}
