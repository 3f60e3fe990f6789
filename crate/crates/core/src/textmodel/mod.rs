//! Linear text classifier and regressor over hashed n-gram features,
//! trained with mini-batch SGD.

mod average;
mod features;
mod metrics;
mod params;
mod train;

pub use average::{average_checkpoints, exact_mean, exact_sum};
pub use features::{featurize, tokenize, FeatureConfig, FeatureVector, PairMode, SEPARATOR};
pub use metrics::{accuracy, average_ranks, evaluate, f1, score_labels, spearman, Metric};
pub use params::{
    argmax, init_params, predict, softmax, Head, InitScheme, ModelParams, Prediction, Predictor,
};
pub use train::{
    gradient, objective, train, Batch, LrSchedule, Stopping, TraceEntry, TrainConfig, TrainTrace,
    Trained,
};
