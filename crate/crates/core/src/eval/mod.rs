//! Ranking metrics and the experiment drivers.

mod experiments;
mod metrics;

pub use experiments::{
    correlate_signals, personalised_comparison, run_cv_experiment, subject_split_experiment,
    write_bins_csv, write_cumulative_csv, write_personalised_csv, write_scatter_csv,
    write_subject_split_csv, CvExperimentOptions, EvaluationReport, LengthSplitReport,
    PersonalisedOptions, PersonalisedReport, SignalCorrelations, SroccPair, SubjectSplitReport,
    UserDelta,
};
pub use metrics::{
    average_ranks, binned_misranking, mae, pairwise_accuracy, srocc, BinnedReport,
    CumulativePoint, LengthPair, MisrankBin, PairContext, PairFilter, LENGTH_CUTOFF_WORDS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("input lengths {a} and {b} unusable for this metric")]
    LengthMismatch { a: usize, b: usize },
    #[error("no eligible pairs under the filter")]
    NoEligiblePairs,
    #[error("rank variance is zero")]
    ZeroRankVariance,
    #[error("bad bin bounds ({lo}, {hi}]")]
    BadBin { lo: f64, hi: f64 },
    #[error("not enough overlapping observations: {0}")]
    InsufficientOverlap(String),
    #[error("knowledge area `{0}` has no lectures")]
    EmptyArea(String),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Label(#[from] crate::labels::LabelError),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
