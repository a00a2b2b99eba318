//! Offline training: select prefixes, encode them, cluster by control flow,
//! and train one classifier per cluster; bundle everything into a
//! serializable [`PredictiveModel`].
//!
//! The encoding-clustering pairing is fixed: model-based clustering consumes
//! frequency vectors, DBSCAN consumes activity sequences. Combined with the
//! two classifiers this yields the four instances `mbased_dt`, `dbscan_dt`,
//! `mbased_rf`, `dbscan_rf`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classification::{train_forest, train_tree, Classifier, ForestConfig};
use crate::clustering::{
    assign_dbscan, assign_model_based, cluster_dbscan, select_k_by_bic, ClusterAssignment,
    DbscanClusters, ModelBasedClusters,
};
use crate::encoding::{
    build_alphabet, encode_frequency, encode_prefix, EncodedPrefix, PrefixSelectionConfig,
};
use crate::error::{Error, Result};
use crate::event_model::{AttributeType, Event, EventLog};
use crate::predicate::{LtlFormula, OutcomeLabel, TraceLabeler};

pub const MODEL_VERSION: u32 = 1;

/// The four framework instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instance {
    MbasedDt,
    DbscanDt,
    MbasedRf,
    DbscanRf,
}

impl Instance {
    pub const ALL: [Instance; 4] = [
        Instance::MbasedDt,
        Instance::DbscanDt,
        Instance::MbasedRf,
        Instance::DbscanRf,
    ];

    pub fn uses_dbscan(self) -> bool {
        matches!(self, Instance::DbscanDt | Instance::DbscanRf)
    }

    pub fn uses_forest(self) -> bool {
        matches!(self, Instance::MbasedRf | Instance::DbscanRf)
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Instance::MbasedDt => "mbased_dt",
            Instance::DbscanDt => "dbscan_dt",
            Instance::MbasedRf => "mbased_rf",
            Instance::DbscanRf => "dbscan_rf",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for Instance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mbased_dt" => Ok(Instance::MbasedDt),
            "dbscan_dt" => Ok(Instance::DbscanDt),
            "mbased_rf" => Ok(Instance::MbasedRf),
            "dbscan_rf" => Ok(Instance::DbscanRf),
            other => Err(Error::Parameter(format!(
                "unknown instance {other:?} (expected mbased_dt, dbscan_dt, mbased_rf or dbscan_rf)"
            ))),
        }
    }
}

/// Clustering method plus its parameters; the control-flow encoding follows
/// from the choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringConfig {
    ModelBased { k_min: usize, k_max: usize },
    Dbscan { eps: f64, min_points: usize },
}

impl ClusteringConfig {
    pub fn default_model_based() -> Self {
        ClusteringConfig::ModelBased { k_min: 15, k_max: 35 }
    }

    pub fn default_dbscan() -> Self {
        ClusteringConfig::Dbscan {
            eps: 0.125,
            min_points: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierConfig {
    DecisionTree {
        min_leaf: usize,
    },
    RandomForest {
        trees_count: usize,
        /// `None` picks ceil(sqrt(d)) at training time.
        features_per_split: Option<usize>,
    },
}

impl ClassifierConfig {
    pub fn default_tree() -> Self {
        ClassifierConfig::DecisionTree { min_leaf: 2 }
    }

    pub fn default_forest() -> Self {
        ClassifierConfig::RandomForest {
            trees_count: 100,
            features_per_split: None,
        }
    }
}

/// Everything the offline phase needs beyond the training log itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub formula: LtlFormula,
    pub prefixes: PrefixSelectionConfig,
    pub clustering: ClusteringConfig,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl TrainingConfig {
    /// The named instance with its defaults: gap 5, prefixes up to length
    /// 21, k in 15..=35 or (eps 0.125, minPoints 4), 100 trees, seed 42.
    pub fn instance(instance: Instance, formula: LtlFormula) -> Self {
        TrainingConfig {
            formula,
            prefixes: PrefixSelectionConfig::default(),
            clustering: if instance.uses_dbscan() {
                ClusteringConfig::default_dbscan()
            } else {
                ClusteringConfig::default_model_based()
            },
            classifier: if instance.uses_forest() {
                ClassifierConfig::default_forest()
            } else {
                ClassifierConfig::default_tree()
            },
            seed: 42,
        }
    }

    pub fn instance_name(&self) -> Instance {
        match (&self.clustering, &self.classifier) {
            (ClusteringConfig::ModelBased { .. }, ClassifierConfig::DecisionTree { .. }) => {
                Instance::MbasedDt
            }
            (ClusteringConfig::Dbscan { .. }, ClassifierConfig::DecisionTree { .. }) => {
                Instance::DbscanDt
            }
            (ClusteringConfig::ModelBased { .. }, ClassifierConfig::RandomForest { .. }) => {
                Instance::MbasedRf
            }
            (ClusteringConfig::Dbscan { .. }, ClassifierConfig::RandomForest { .. }) => {
                Instance::DbscanRf
            }
        }
    }
}

/// Echo of the training configuration, stored inside the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub instance: Instance,
    pub gap: usize,
    pub max_prefix_length: usize,
    pub clustering: ClusteringConfig,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

/// The trained cluster structure, either centroid-based or exemplar-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterModel {
    ModelBased(ModelBasedClusters),
    Dbscan(DbscanClusters),
}

impl ClusterModel {
    pub fn cluster_count(&self) -> usize {
        match self {
            ClusterModel::ModelBased(mb) => mb.clusters.len(),
            ClusterModel::Dbscan(db) => db.clusters.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelBalance {
    pub compliant: usize,
    pub non_compliant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub training_traces: usize,
    pub total_prefixes: usize,
    /// DBSCAN-noise prefixes dropped from classifier training.
    pub noise_prefixes: usize,
    pub rows_per_cluster: Vec<usize>,
    pub label_balance_per_cluster: Vec<LabelBalance>,
}

/// A trained, self-contained predictive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveModel {
    pub version: u32,
    /// Textual form of the classification predicate used for labeling.
    pub formula: String,
    pub alphabet: Vec<String>,
    pub attribute_schema: BTreeMap<String, AttributeType>,
    pub config: ConfigEcho,
    pub clusters: ClusterModel,
    /// One classifier per cluster, indexed like the cluster model.
    pub classifiers: Vec<Classifier>,
    pub stats: TrainingStats,
    pub init_time_ms: f64,
}

impl PredictiveModel {
    /// Maps a running prefix to its nearest cluster, using the encoding the
    /// model was trained with.
    pub fn assign(&self, events: &[Event]) -> ClusterAssignment {
        match &self.clusters {
            ClusterModel::ModelBased(mb) => {
                let vector = encode_frequency(events, &self.alphabet).as_f64();
                assign_model_based(mb, &vector)
            }
            ClusterModel::Dbscan(db) => {
                let sequence: Vec<String> = events.iter().map(|e| e.activity.clone()).collect();
                assign_dbscan(db, &sequence)
            }
        }
    }

    pub fn classifier(&self, cluster_id: usize) -> Option<&Classifier> {
        self.classifiers.get(cluster_id)
    }
}

/// Selects, labels and encodes every training prefix of the log. Each prefix
/// is labeled by evaluating the predicate on its completed parent trace,
/// never on the prefix itself.
pub fn encode_training_prefixes(
    log: &EventLog,
    prefixes: &PrefixSelectionConfig,
    alphabet: &[String],
    labeler: &dyn TraceLabeler,
) -> Result<Vec<EncodedPrefix>> {
    let per_trace: Vec<Vec<EncodedPrefix>> = log
        .traces
        .par_iter()
        .map(|trace| {
            let label = labeler.label(trace);
            crate::encoding::select_prefixes(trace, prefixes)
                .into_iter()
                .map(|length| {
                    encode_prefix(trace, length, alphabet, &log.attribute_schema, Some(label))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trace.into_iter().flatten().collect())
}

/// Trains a predictive model using the configured formula for labeling.
pub fn train(log: &EventLog, config: &TrainingConfig) -> Result<PredictiveModel> {
    train_with_labeler(log, config, &config.formula)
}

/// Trains with an arbitrary classification function in place of the
/// built-in LTL evaluation.
pub fn train_with_labeler(
    log: &EventLog,
    config: &TrainingConfig,
    labeler: &dyn TraceLabeler,
) -> Result<PredictiveModel> {
    let started = Instant::now();
    if log.traces.is_empty() {
        return Err(Error::Training("training log is empty".into()));
    }
    let alphabet = build_alphabet(log);
    let prefixes = encode_training_prefixes(log, &config.prefixes, &alphabet, labeler)?;
    if prefixes.is_empty() {
        return Err(Error::Training("no prefixes selected from the training log".into()));
    }

    // cluster by control flow; membership[i] = cluster of prefix i (None = noise)
    let (clusters, membership) = match &config.clustering {
        ClusteringConfig::ModelBased { k_min, k_max } => {
            let vectors: Vec<Vec<f64>> = prefixes.iter().map(|p| p.frequency.as_f64()).collect();
            let distinct = prefixes
                .iter()
                .map(|p| &p.frequency.counts)
                .collect::<BTreeSet<_>>()
                .len();
            let k_max = (*k_max).min(distinct.max(1));
            let k_min = (*k_min).min(k_max);
            let fit = select_k_by_bic(&vectors, k_min, k_max, config.seed)?;
            let mut membership = vec![None; prefixes.len()];
            for (cid, cluster) in fit.clusters.iter().enumerate() {
                for &i in &cluster.members {
                    membership[i] = Some(cid);
                }
            }
            (ClusterModel::ModelBased(fit), membership)
        }
        ClusteringConfig::Dbscan { eps, min_points } => {
            let sequences: Vec<Vec<String>> = prefixes.iter().map(|p| p.sequence.clone()).collect();
            let fit = cluster_dbscan(&sequences, *eps, *min_points)?;
            if fit.clusters.is_empty() {
                return Err(Error::Training(
                    "no clusters: every training prefix fell into DBSCAN noise".into(),
                ));
            }
            let membership = fit.labels.clone();
            (ClusterModel::Dbscan(fit), membership)
        }
    };

    let cluster_count = clusters.cluster_count();
    let mut rows_per_cluster: Vec<Vec<usize>> = vec![Vec::new(); cluster_count];
    let mut noise_prefixes = 0usize;
    for (i, member_of) in membership.iter().enumerate() {
        match member_of {
            Some(cid) => rows_per_cluster[*cid].push(i),
            None => noise_prefixes += 1,
        }
    }
    if noise_prefixes > 0 {
        log::info!("dropping {noise_prefixes} noise prefixes from classifier training");
    }

    let classifiers: Vec<Classifier> = rows_per_cluster
        .par_iter()
        .enumerate()
        .map(|(cid, members)| {
            let rows: Vec<_> = members.iter().map(|&i| prefixes[i].features.clone()).collect();
            match &config.classifier {
                ClassifierConfig::DecisionTree { min_leaf } => {
                    train_tree(&rows, *min_leaf).map(Classifier::DecisionTree)
                }
                ClassifierConfig::RandomForest {
                    trees_count,
                    features_per_split,
                } => train_forest(
                    &rows,
                    &ForestConfig {
                        trees_count: *trees_count,
                        features_per_split: *features_per_split,
                        bootstrap: true,
                        min_leaf: 2,
                        seed: config.seed.wrapping_add(cid as u64),
                    },
                )
                .map(Classifier::RandomForest),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let label_balance_per_cluster = rows_per_cluster
        .iter()
        .map(|members| {
            let mut balance = LabelBalance::default();
            for &i in members {
                match prefixes[i].features.label {
                    Some(OutcomeLabel::Compliant) => balance.compliant += 1,
                    Some(OutcomeLabel::NonCompliant) => balance.non_compliant += 1,
                    None => {}
                }
            }
            balance
        })
        .collect();

    Ok(PredictiveModel {
        version: MODEL_VERSION,
        formula: labeler.describe(),
        alphabet,
        attribute_schema: log.attribute_schema.clone(),
        config: ConfigEcho {
            instance: config.instance_name(),
            gap: config.prefixes.gap,
            max_prefix_length: config.prefixes.max_length,
            clustering: config.clustering.clone(),
            classifier: config.classifier.clone(),
            seed: config.seed,
        },
        clusters,
        classifiers,
        stats: TrainingStats {
            training_traces: log.traces.len(),
            total_prefixes: prefixes.len(),
            noise_prefixes,
            rows_per_cluster: rows_per_cluster.iter().map(|m| m.len()).collect(),
            label_balance_per_cluster,
        },
        init_time_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

/// Writes the model as a versioned, self-describing JSON document.
pub fn save_model(model: &PredictiveModel, mut sink: impl Write) -> Result<()> {
    let text = serde_json::to_string_pretty(model)
        .map_err(|e| Error::CorruptModel(format!("serialization failed: {e}")))?;
    sink.write_all(text.as_bytes())?;
    Ok(())
}

/// Reads a model back, rejecting unknown versions and corrupt payloads.
pub fn load_model(mut source: impl Read) -> Result<PredictiveModel> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptModel("missing version field".into()))?;
    if version != u64::from(MODEL_VERSION) {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: MODEL_VERSION,
        });
    }
    let model: PredictiveModel =
        serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
    if model.classifiers.len() != model.clusters.cluster_count() {
        return Err(Error::CorruptModel(format!(
            "{} clusters but {} classifiers",
            model.clusters.cluster_count(),
            model.classifiers.len()
        )));
    }
    if model.classifiers.is_empty() {
        return Err(Error::CorruptModel("model holds no clusters".into()));
    }
    Ok(model)
}
