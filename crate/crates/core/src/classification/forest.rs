//! Random forest: bootstrap-resampled trees voting for the most popular
//! outcome, each split restricted to a random subset of the attributes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{predict_tree, DecisionTree, TreeTrainer};
use super::Prediction;
use crate::encoding::FeatureVector;
use crate::error::{Error, Result};
use crate::event_model::DataSnapshot;
use crate::predicate::OutcomeLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub trees_count: usize,
    /// Attributes considered per split; `None` chooses ceil(sqrt(d)).
    pub features_per_split: Option<usize>,
    /// Disabled only by tests comparing a 1-tree forest to a plain tree.
    pub bootstrap: bool,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees_count: 100,
            features_per_split: None,
            bootstrap: true,
            min_leaf: 2,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub features_per_split: usize,
}

/// Trains `trees_count` trees, each on its own bootstrap resample, each
/// split drawing `features_per_split` candidate attributes. Per-tree RNG
/// streams are keyed by tree index, so training is deterministic for a
/// given seed no matter how the trees are scheduled.
pub fn train_forest(rows: &[FeatureVector], config: &ForestConfig) -> Result<RandomForest> {
    if rows.is_empty() {
        return Err(Error::Training("cannot train a forest on zero rows".into()));
    }
    if config.trees_count == 0 {
        return Err(Error::Parameter("forest needs at least one tree".into()));
    }
    let dims = rows[0].values.len();
    let features_per_split = match config.features_per_split {
        Some(0) => return Err(Error::Parameter("features_per_split must be at least 1".into())),
        Some(m) => m,
        None => (dims as f64).sqrt().ceil().max(1.0) as usize,
    };

    let trees = (0..config.trees_count)
        .into_par_iter()
        .map(|tree_index| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, tree_index as u64));
            let indices: Vec<usize> = if config.bootstrap {
                (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect()
            } else {
                (0..rows.len()).collect()
            };
            let mut trainer = TreeTrainer::new(rows, config.min_leaf)?;
            trainer.features_per_split = Some(features_per_split);
            trainer.rng = Some(rng);
            trainer.train_on(&indices)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RandomForest {
        trees,
        features_per_split,
    })
}

/// Majority vote (ties favor compliant). Probability is the fraction of
/// trees voting for the winning class; support is the rounded mean leaf
/// support among those trees.
pub fn predict_forest(forest: &RandomForest, snapshot: &DataSnapshot) -> Prediction {
    let votes: Vec<Prediction> = forest
        .trees
        .iter()
        .map(|tree| predict_tree(tree, snapshot))
        .collect();
    let compliant = votes
        .iter()
        .filter(|v| v.predicted == OutcomeLabel::Compliant)
        .count();
    let winner = if compliant * 2 >= votes.len() {
        OutcomeLabel::Compliant
    } else {
        OutcomeLabel::NonCompliant
    };
    let majority: Vec<&Prediction> = votes.iter().filter(|v| v.predicted == winner).collect();
    let mean_support =
        majority.iter().map(|v| v.support as f64).sum::<f64>() / majority.len() as f64;
    Prediction {
        predicted: winner,
        probability: majority.len() as f64 / votes.len() as f64,
        support: mean_support.round() as u32,
    }
}

/// SplitMix64-style index mixing for per-tree seed derivation.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
