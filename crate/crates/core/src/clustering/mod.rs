//! Control-flow clustering of encoded prefixes and runtime cluster
//! assignment.
//!
//! Two methods, matching the two control-flow encodings: model-based
//! clustering over frequency vectors and DBSCAN over activity sequences.
//! Trained cluster models are immutable and cheap to share; assignment is
//! pure.

mod dbscan;
mod edit_distance;
mod model_based;

pub use dbscan::{assign_dbscan, cluster_dbscan, DbscanClusters, Sequence};
pub use edit_distance::{edit_distance_normalized, levenshtein};
pub use model_based::{
    assign_model_based, cluster_model_based, select_k_by_bic, GaussianCluster, ModelBasedClusters,
};

/// Result of mapping a prefix to its nearest cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterAssignment {
    pub cluster_id: usize,
    pub distance: f64,
}
