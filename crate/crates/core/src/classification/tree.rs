//! Decision-tree learning over data snapshots: greedy top-down induction
//! maximizing gain ratio, with an explicit `missing` branch at every split
//! so routing never fails.
//!
//! Leaves carry class support (training rows on the path whose label equals
//! the leaf's class) and class probability (support over all rows at the
//! leaf). Categorical attributes split one branch per observed value and are
//! tested at most once per path; numeric attributes split on a threshold at
//! midpoints between sorted distinct values and may be reused.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::encoding::FeatureVector;
use crate::error::{Error, Result};
use crate::event_model::{AttributeValue, DataSnapshot};
use crate::predicate::OutcomeLabel;

const MIN_GAIN: f64 = 1e-12;

/// Class statistics at a leaf (or, for internal nodes, of the rows that
/// reached the node; used when a query cannot take any real branch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    pub predicted: OutcomeLabel,
    pub support: u32,
    pub total: u32,
    pub probability: f64,
}

impl LeafStats {
    fn prediction(&self) -> Prediction {
        Prediction {
            predicted: self.predicted,
            probability: self.probability,
            support: self.support,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf(LeafStats),
    Categorical {
        attribute: String,
        /// One branch per category value observed at this node during
        /// training, keyed by the value's canonical rendering.
        branches: BTreeMap<String, TreeNode>,
        missing: Option<Box<TreeNode>>,
        /// Routing target for unseen categories (and missing values without
        /// a trained missing branch).
        fallback: LeafStats,
    },
    Numeric {
        attribute: String,
        threshold: f64,
        below_or_equal: Box<TreeNode>,
        above: Box<TreeNode>,
        missing: Option<Box<TreeNode>>,
        fallback: LeafStats,
    },
}

/// A trained decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub min_leaf: usize,
}

/// How a split treats an attribute's values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AttributeKind {
    Categorical,
    Numeric,
}

fn kind_of(value: &AttributeValue) -> Option<AttributeKind> {
    match value {
        AttributeValue::Text(_) | AttributeValue::Boolean(_) => Some(AttributeKind::Categorical),
        AttributeValue::Integer(_) | AttributeValue::Real(_) | AttributeValue::Timestamp(_) => {
            Some(AttributeKind::Numeric)
        }
        AttributeValue::Missing => None,
    }
}

/// Trains a tree on labeled rows with the default growth policy.
pub fn train_tree(rows: &[FeatureVector], min_leaf: usize) -> Result<DecisionTree> {
    TreeTrainer::new(rows, min_leaf)?.train()
}

/// Routes the snapshot through the tree. Missing values take the missing
/// branch; values never seen at a split fall back to the split node's own
/// class statistics, so every query reaches a defined leaf.
pub fn predict_tree(tree: &DecisionTree, snapshot: &DataSnapshot) -> Prediction {
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf(stats) => return stats.prediction(),
            TreeNode::Categorical {
                attribute,
                branches,
                missing,
                fallback,
            } => {
                let value = snapshot.get(attribute);
                if value.is_missing() {
                    match missing {
                        Some(child) => node = child,
                        None => return fallback.prediction(),
                    }
                } else {
                    match branches.get(&value.to_string()) {
                        Some(child) => node = child,
                        None => return fallback.prediction(),
                    }
                }
            }
            TreeNode::Numeric {
                attribute,
                threshold,
                below_or_equal,
                above,
                missing,
                fallback,
            } => match snapshot.get(attribute).as_numeric() {
                Some(x) if x <= *threshold => node = below_or_equal,
                Some(_) => node = above,
                None => match missing {
                    Some(child) => node = child,
                    None => return fallback.prediction(),
                },
            },
        }
    }
}

impl DecisionTree {
    /// Indented-text rendering of the tree for inspection.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        render_node(&self.root, 0, &mut out);
        out
    }
}

fn render_node(node: &TreeNode, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        TreeNode::Leaf(stats) => {
            let _ = writeln!(
                out,
                "{pad}-> {} (support {}, total {}, prob {:.2})",
                stats.predicted, stats.support, stats.total, stats.probability
            );
        }
        TreeNode::Categorical {
            attribute,
            branches,
            missing,
            ..
        } => {
            let _ = writeln!(out, "{pad}[{attribute}]");
            for (value, child) in branches {
                let _ = writeln!(out, "{pad}  = {value}:");
                render_node(child, depth + 2, out);
            }
            if let Some(child) = missing {
                let _ = writeln!(out, "{pad}  = missing:");
                render_node(child, depth + 2, out);
            }
        }
        TreeNode::Numeric {
            attribute,
            threshold,
            below_or_equal,
            above,
            missing,
            ..
        } => {
            let _ = writeln!(out, "{pad}[{attribute}]");
            let _ = writeln!(out, "{pad}  <= {threshold}:");
            render_node(below_or_equal, depth + 2, out);
            let _ = writeln!(out, "{pad}  > {threshold}:");
            render_node(above, depth + 2, out);
            if let Some(child) = missing {
                let _ = writeln!(out, "{pad}  = missing:");
                render_node(child, depth + 2, out);
            }
        }
    }
}

/// Tree induction over a fixed row set; the forest reuses it with feature
/// sampling and bootstrap index multisets.
pub(super) struct TreeTrainer<'a> {
    rows: &'a [FeatureVector],
    labels: Vec<OutcomeLabel>,
    kinds: BTreeMap<&'a str, AttributeKind>,
    min_leaf: usize,
    /// When set, each split considers only this many attributes, drawn from
    /// the trainer's RNG.
    pub(super) features_per_split: Option<usize>,
    pub(super) rng: Option<ChaCha8Rng>,
}

impl<'a> TreeTrainer<'a> {
    pub(super) fn new(rows: &'a [FeatureVector], min_leaf: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Training("cannot train a tree on zero rows".into()));
        }
        let labels = rows
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| Error::Training("training row without outcome label".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        // attribute kind = kind of the first non-missing value of the column
        let mut kinds = BTreeMap::new();
        for row in rows {
            for (name, value) in &row.values {
                if let Some(kind) = kind_of(value) {
                    kinds.entry(name.as_str()).or_insert(kind);
                }
            }
        }
        Ok(TreeTrainer {
            rows,
            labels,
            kinds,
            min_leaf,
            features_per_split: None,
            rng: None,
        })
    }

    pub(super) fn train(&mut self) -> Result<DecisionTree> {
        let indices: Vec<usize> = (0..self.rows.len()).collect();
        self.train_on(&indices)
    }

    pub(super) fn train_on(&mut self, indices: &[usize]) -> Result<DecisionTree> {
        if indices.is_empty() {
            return Err(Error::Training("cannot train a tree on zero rows".into()));
        }
        let root = self.build(indices, &BTreeSet::new());
        Ok(DecisionTree {
            root,
            min_leaf: self.min_leaf,
        })
    }

    fn leaf_stats(&self, indices: &[usize]) -> LeafStats {
        let compliant = indices
            .iter()
            .filter(|&&i| self.labels[i] == OutcomeLabel::Compliant)
            .count() as u32;
        let total = indices.len() as u32;
        let non_compliant = total - compliant;
        // majority class, ties resolved towards compliant
        let (predicted, support) = if compliant >= non_compliant {
            (OutcomeLabel::Compliant, compliant)
        } else {
            (OutcomeLabel::NonCompliant, non_compliant)
        };
        LeafStats {
            predicted,
            support,
            total,
            probability: support as f64 / total as f64,
        }
    }

    fn is_pure(&self, indices: &[usize]) -> bool {
        indices
            .windows(2)
            .all(|w| self.labels[w[0]] == self.labels[w[1]])
    }

    fn build(&mut self, indices: &[usize], used_categorical: &BTreeSet<String>) -> TreeNode {
        let stats = self.leaf_stats(indices);
        if self.is_pure(indices) || indices.len() < self.min_leaf {
            return TreeNode::Leaf(stats);
        }
        let candidates: Vec<&str> = self
            .kinds
            .iter()
            .filter(|(name, kind)| {
                **kind == AttributeKind::Numeric || !used_categorical.contains(**name)
            })
            .map(|(name, _)| *name)
            .collect();
        let candidates = self.sample_features(candidates);

        let mut best: Option<(f64, SplitPlan)> = None;
        for attribute in candidates {
            if let Some((ratio, plan)) = self.best_split(attribute, indices) {
                if best.as_ref().map_or(true, |(b, _)| ratio > *b) {
                    best = Some((ratio, plan));
                }
            }
        }
        let Some((_, plan)) = best else {
            return TreeNode::Leaf(stats);
        };

        match plan {
            SplitPlan::Categorical {
                attribute,
                branches,
                missing,
            } => {
                let mut used = used_categorical.clone();
                used.insert(attribute.clone());
                let branches = branches
                    .into_iter()
                    .map(|(value, part)| (value, self.build(&part, &used)))
                    .collect();
                let missing = missing.map(|part| Box::new(self.build(&part, &used)));
                TreeNode::Categorical {
                    attribute,
                    branches,
                    missing,
                    fallback: stats,
                }
            }
            SplitPlan::Numeric {
                attribute,
                threshold,
                below_or_equal,
                above,
                missing,
            } => TreeNode::Numeric {
                attribute,
                threshold,
                below_or_equal: Box::new(self.build(&below_or_equal, used_categorical)),
                above: Box::new(self.build(&above, used_categorical)),
                missing: missing.map(|part| Box::new(self.build(&part, used_categorical))),
                fallback: stats,
            },
        }
    }

    fn sample_features<'b>(&mut self, candidates: Vec<&'b str>) -> Vec<&'b str> {
        match (self.features_per_split, &mut self.rng) {
            (Some(m), Some(rng)) if m < candidates.len() => {
                let mut sampled: Vec<&str> = candidates
                    .choose_multiple(rng, m)
                    .copied()
                    .collect();
                sampled.sort_unstable();
                sampled
            }
            _ => candidates,
        }
    }

    /// Best admissible split on `attribute`, as (gain ratio, plan). A split
    /// is admissible when it produces at least two non-empty parts and
    /// strictly positive information gain.
    fn best_split(&self, attribute: &str, indices: &[usize]) -> Option<(f64, SplitPlan)> {
        match self.kinds[attribute] {
            AttributeKind::Categorical => {
                let mut branches: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                let mut missing: Vec<usize> = Vec::new();
                for &i in indices {
                    match self.value(i, attribute) {
                        v if v.is_missing() => missing.push(i),
                        v => branches.entry(v.to_string()).or_default().push(i),
                    }
                }
                let mut parts: Vec<&[usize]> = branches.values().map(|v| v.as_slice()).collect();
                if !missing.is_empty() {
                    parts.push(&missing);
                }
                let ratio = self.gain_ratio(indices, &parts)?;
                Some((
                    ratio,
                    SplitPlan::Categorical {
                        attribute: attribute.to_string(),
                        branches,
                        missing: (!missing.is_empty()).then_some(missing),
                    },
                ))
            }
            AttributeKind::Numeric => {
                let mut numeric: Vec<(f64, usize)> = Vec::new();
                let mut missing: Vec<usize> = Vec::new();
                for &i in indices {
                    match self.value(i, attribute).as_numeric() {
                        Some(x) => numeric.push((x, i)),
                        None => missing.push(i),
                    }
                }
                numeric.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut best: Option<(f64, f64)> = None; // (ratio, threshold)
                for w in numeric.windows(2) {
                    if w[0].0 == w[1].0 {
                        continue;
                    }
                    let threshold = (w[0].0 + w[1].0) / 2.0;
                    let below: Vec<usize> = numeric
                        .iter()
                        .filter(|(x, _)| *x <= threshold)
                        .map(|(_, i)| *i)
                        .collect();
                    let above: Vec<usize> = numeric
                        .iter()
                        .filter(|(x, _)| *x > threshold)
                        .map(|(_, i)| *i)
                        .collect();
                    let mut parts: Vec<&[usize]> = vec![&below, &above];
                    if !missing.is_empty() {
                        parts.push(&missing);
                    }
                    if let Some(ratio) = self.gain_ratio(indices, &parts) {
                        if best.map_or(true, |(b, _)| ratio > b) {
                            best = Some((ratio, threshold));
                        }
                    }
                }
                let (ratio, threshold) = best?;
                let below_or_equal: Vec<usize> = numeric
                    .iter()
                    .filter(|(x, _)| *x <= threshold)
                    .map(|(_, i)| *i)
                    .collect();
                let above: Vec<usize> = numeric
                    .iter()
                    .filter(|(x, _)| *x > threshold)
                    .map(|(_, i)| *i)
                    .collect();
                Some((
                    ratio,
                    SplitPlan::Numeric {
                        attribute: attribute.to_string(),
                        threshold,
                        below_or_equal,
                        above,
                        missing: (!missing.is_empty()).then_some(missing),
                    },
                ))
            }
        }
    }

    fn value(&self, row: usize, attribute: &str) -> &AttributeValue {
        self.rows[row]
            .values
            .get(attribute)
            .unwrap_or(&AttributeValue::Missing)
    }

    fn entropy(&self, indices: &[usize]) -> f64 {
        binary_entropy(
            indices
                .iter()
                .filter(|&&i| self.labels[i] == OutcomeLabel::Compliant)
                .count(),
            indices.len(),
        )
    }

    /// Gain ratio of partitioning `indices` into `parts`; `None` when the
    /// split is inadmissible (single part, zero gain, or zero split info).
    fn gain_ratio(&self, indices: &[usize], parts: &[&[usize]]) -> Option<f64> {
        if parts.len() < 2 {
            return None;
        }
        let n = indices.len() as f64;
        let mut remainder = 0.0;
        let mut split_info = 0.0;
        for part in parts {
            let fraction = part.len() as f64 / n;
            remainder += fraction * self.entropy(part);
            split_info -= fraction * fraction.log2();
        }
        let gain = self.entropy(indices) - remainder;
        if gain <= MIN_GAIN || split_info <= 0.0 {
            return None;
        }
        Some(gain / split_info)
    }
}

pub(crate) fn binary_entropy(positives: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = positives as f64 / total as f64;
    let q = 1.0 - p;
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(q)
}

enum SplitPlan {
    Categorical {
        attribute: String,
        branches: BTreeMap<String, Vec<usize>>,
        missing: Option<Vec<usize>>,
    },
    Numeric {
        attribute: String,
        threshold: f64,
        below_or_equal: Vec<usize>,
        above: Vec<usize>,
        missing: Option<Vec<usize>>,
    },
}
