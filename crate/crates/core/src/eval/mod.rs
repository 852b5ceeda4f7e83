//! Cross-validation, ranking metrics, hyperparameter sweeps and candidate
//! export.

mod cv;
mod folds;
mod metrics;
mod rank;

pub use cv::{prompt_set, run_cross_validation, run_sweep, write_sweep, FoldResult, MetricsReport, Summary, SweepAxis, SweepRow, METRICS_FORMAT};
pub use folds::{make_folds, FoldPlan};
pub use metrics::{auprc, auroc, auroc_brute_force, compute_confusion, compute_metrics, pr_curve, roc_curve, Confusion, Metrics};
pub use rank::{fit_full_model, rank_candidates, write_predictions, Candidate, PREDICTIONS_HEADER};
