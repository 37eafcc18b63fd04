//! Confusion matrices, per-class metrics and localization errors.

mod confusion;
mod location;
mod metrics;
mod report;

pub use confusion::{confusion, ConfusionMatrix};
pub use location::{ale, ame, distance, DistanceMode};
pub use metrics::{class_metrics, f1_score, micro_recall, ClassMetrics};
pub use report::{
    confusion_csv, metrics_csv, round_half_up, summary_csv, SummaryRow, ACTIVITY_NAMES,
    METRICS_HEADER, SUMMARY_HEADER,
};

/// Class names for the location task, `#1` to `#16`.
pub fn location_names() -> Vec<String> {
    (1..=crate::NUM_LOCATIONS).map(|i| format!("#{i}")).collect()
}
