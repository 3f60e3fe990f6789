//! Experiment runner: restarts over resampled data regimes, method arms,
//! k sweeps and aggregate reporting.

mod report;
mod run;
mod spec;

pub use report::{
    mean_std, top3_mean, track_labeling_series, AggregateRow, ArmError, ArmReport,
    AugmentationSummary, CurveReport, CurveRow, LabelingSeries, RunReport, SelfTrainSummary,
    SplitSummary, Timing, REPORT_SCHEMA_VERSION,
};
pub use run::{restart_seed, run_experiment, split_hash, sweep_k};
pub use spec::{ArmKind, ArmSpec, Base, DevMode, ExperimentData, ExperimentSpec, Method, ModelSpec};
