//! Overlap and boundary metrics, and the per-vendor evaluation report.

mod overlap;
mod report;

pub use overlap::{boundary, dice_score, hausdorff};
pub use report::{
    argmax_classes, check_compatible, evaluate, score_samples, ClassStats, EvalReport, SampleScore, Segmenter,
    VendorStats, SPACING_MM,
};
