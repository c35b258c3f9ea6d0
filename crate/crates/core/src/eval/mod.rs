//! Trial scoring, EER and report generation.

mod confusion;
mod eer;
mod report;
mod suite;

pub use confusion::{confusion_matrices, ConfusionMatrices, UtteranceDecision};
pub use eer::{compute_eer, det_curve, operating_points, EerResult, OperatingPoint, Scored};
pub use report::{
    decisions_from_trials, read_trials, render_csv, render_det, render_text, write_report, write_trials, TRIAL_HEADER,
};
pub use suite::{
    claims_for, run_experiment_suite, score_trials, summarize, EvalConfig, EvalReport, Framework, ModeResult,
    OrderingCheck, TrialScore,
};
