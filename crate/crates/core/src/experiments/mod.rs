//! Experiment protocols: training runs with either backend, evil twins,
//! augmentation probes, latent analysis and persisted run reports.

pub mod config;
pub mod metrics;
pub mod pca;
mod probe;
pub mod report;
mod train;
pub mod twins;

pub use config::{BackendInit, BackendKind, DatasetRef, ExperimentConfig, LatentOptimizer, TwinMode};
pub use metrics::{centroid_separation_ratio, cluster_metrics, knn_accuracy, ClusterMetrics};
pub use pca::{latent_pca, Pca};
pub use probe::{augment_probe, AugmentReport, Augmentation};
pub use report::{is_complete, load_report, write_report, LoadedReport, DETERMINISTIC_FILES};
pub use train::{
    batch_graph, evil_twin_train, pose_operators, train, train_with_twins, Backend, BatchGraph, Decoder, EpochLosses,
    Model, RunReport, TrainOutcome,
};
pub use twins::{assign_twins, derangement, TwinAssignment};
