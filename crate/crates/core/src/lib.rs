//! Training, comparison, and group inference for self-organizing maps fit
//! to spatio-temporal volumes.
//!
//! The pipeline: fit one SOM per subject, compute pairwise sum-of-minimum
//! distances between maps (temporal, spatial, or joint), repair the metric
//! axioms by shortest-path closure, then test group differences with
//! restricted Frechet statistics under permutation nulls.

pub mod cli;
pub mod error;
pub mod inference;
pub mod io;
pub mod jaccard;
pub mod metrics;
pub mod seeding;
pub mod som;
pub mod synth;
pub mod trainer;
pub mod volume;

pub use error::{Error, Result};
pub use inference::{
    bonferroni_adjust, f_statistic, frechet_variance, group_stats, permutation_test,
    restricted_frechet_mean, t_statistic, BonferroniReport, FTestResult, GroupStats,
    GroupedSample, StatisticKind, TestResult,
};
pub use jaccard::{
    global_jaccard, jaccard_distance, overlap_report, sample_jaccard_index, UnitRanking,
};
pub use metrics::{
    hamming_distance, metric_closure, pairwise_distances, s_smd, som_distance, st_smd, t_smd,
    DistanceMatrix, MetricKind, TRIANGLE_TOL,
};
pub use som::{Assignment, GridSpec, Som};
pub use synth::{generate_study, generate_subject, Group, Scenario, ScenarioSpec};
pub use trainer::{
    bmu_index, neighborhood_kernel, quantization_error, train_batch, train_sequential,
    TrainingSchedule,
};
pub use volume::Volume;
