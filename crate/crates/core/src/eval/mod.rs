//! Confusion matrices, F1 scores, label-efficiency sweeps and projection
//! export.

mod metrics;
mod projection;
mod sweep;

pub use metrics::{confusion, f1_report, ConfusionMatrix, F1Report};
pub use projection::{export_projection, write_projection_csv, PointKind, ProjectionRow};
pub use sweep::{
    label_efficiency_sweep, summarize_sweep, write_sweep_csv, SweepPoint, SweepRun, SweepVariant, SWEEP_HEADER,
};
