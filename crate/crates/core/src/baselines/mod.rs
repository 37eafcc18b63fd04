//! Comparison methods: DTW with nearest neighbours, and an RBF SVM.

mod dtw;
mod knn;
mod svm;

pub use dtw::{dtw_distance, dtw_frames, Frames};
pub use knn::{
    distance_matrix, knn_classify, knn_vote, read_distance_matrix, write_distance_matrix,
    DistanceMatrix, DtwConfig, DIST_MAGIC,
};
pub use svm::{
    flatten_features, rbf_gram, BinarySvm, KernelCache, MulticlassSvm, SvmConfig,
};

pub const REPORT_HEADER: &str = "method,task,accuracy,config_string,wall_seconds";
