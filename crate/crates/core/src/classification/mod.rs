//! Per-cluster classifiers: decision trees and random forests answering
//! queries with class, class support, and class probability.
//!
//! Trained models are immutable and pure to query; forest training runs
//! trees in parallel with per-tree RNG streams.

mod forest;
mod tree;

pub use forest::{predict_forest, train_forest, ForestConfig, RandomForest};
pub use tree::{predict_tree, train_tree, DecisionTree, LeafStats, TreeNode};

pub(crate) use tree::binary_entropy;

use serde::{Deserialize, Serialize};

use crate::event_model::DataSnapshot;
use crate::predicate::OutcomeLabel;

/// A classifier's answer for one data snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub predicted: OutcomeLabel,
    /// Class probability in [0, 1].
    pub probability: f64,
    /// Class support: correctly classified training rows behind the answer.
    pub support: u32,
}

/// Either classifier, as stored per cluster in a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
}

impl Classifier {
    pub fn predict(&self, snapshot: &DataSnapshot) -> Prediction {
        match self {
            Classifier::DecisionTree(tree) => predict_tree(tree, snapshot),
            Classifier::RandomForest(forest) => predict_forest(forest, snapshot),
        }
    }
}
