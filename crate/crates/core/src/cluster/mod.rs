//! K-Means over radial profiles, the explained-variance K rule, and
//! per-class share distributions.

mod kmeans;
mod matrix;

pub use kmeans::{
    assign, assignments_csv, kmeans_fit, select_k, share_distribution, total_sum_of_squares, ClusterModel,
    KMeansOptions, KSelection, KSweepEntry, DEFAULT_EXPLAINED_THRESHOLD,
};
pub use matrix::ProfileMatrix;
