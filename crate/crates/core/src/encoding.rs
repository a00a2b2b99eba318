//! Prefix selection and encoding: control-flow views for clustering
//! (frequency vector over the training alphabet, or the raw activity
//! sequence) and the data view for classification (snapshot of the prefix's
//! last event plus the outcome label of the completed parent trace).
//!
//! All operations here are pure and independent of other traces in the log,
//! so encoding may run in parallel in any order.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::event_model::{snapshot_at, AttributeType, AttributeValue, Event, EventLog, Trace};
use crate::predicate::OutcomeLabel;

/// Which prefixes of each trace enter training: lengths `1, 1+g, 1+2g, ...`
/// capped by `max_length` and by the trace itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixSelectionConfig {
    pub gap: usize,
    pub max_length: usize,
}

impl Default for PrefixSelectionConfig {
    fn default() -> Self {
        PrefixSelectionConfig {
            gap: 5,
            max_length: 21,
        }
    }
}

/// Prefix lengths selected for one trace, ascending.
pub fn select_prefixes(trace: &Trace, config: &PrefixSelectionConfig) -> Vec<usize> {
    let cap = config.max_length.min(trace.len());
    (1..=cap).step_by(config.gap.max(1)).collect()
}

/// Sorted distinct activity labels of the training log.
pub fn build_alphabet(training: &EventLog) -> Vec<String> {
    let labels: BTreeSet<&str> = training
        .traces
        .iter()
        .flat_map(|t| t.events.iter().map(|e| e.activity.as_str()))
        .collect();
    labels.into_iter().map(str::to_string).collect()
}

/// Per-symbol occurrence counts over an ordered alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyVector {
    pub counts: Vec<u32>,
    /// Events whose label is not in the alphabet; they occupy no slot.
    pub unseen_events: usize,
}

impl FrequencyVector {
    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Counts each event under its alphabet slot; out-of-alphabet events are
/// ignored apart from the diagnostics tally.
pub fn encode_frequency(events: &[Event], alphabet: &[String]) -> FrequencyVector {
    let index: BTreeMap<&str, usize> = alphabet
        .iter()
        .enumerate()
        .map(|(i, label)| (label.as_str(), i))
        .collect();
    let mut counts = vec![0u32; alphabet.len()];
    let mut unseen = 0usize;
    for event in events {
        match index.get(event.activity.as_str()) {
            Some(&slot) => counts[slot] += 1,
            None => unseen += 1,
        }
    }
    FrequencyVector {
        counts,
        unseen_events: unseen,
    }
}

/// A prefix's control-flow encoding, as consumed by one clustering method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlFlowEncoding {
    Frequency(FrequencyVector),
    Sequence(Vec<String>),
}

/// The data view of a prefix: one value per schema attribute (the snapshot
/// of the prefix's last event) plus, for training prefixes, the label of the
/// completed parent trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: BTreeMap<String, AttributeValue>,
    pub label: Option<OutcomeLabel>,
}

/// One selected prefix, encoded for both clustering and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPrefix {
    pub case_id: String,
    pub prefix_length: usize,
    pub frequency: FrequencyVector,
    pub sequence: Vec<String>,
    pub features: FeatureVector,
}

/// Encodes the first `length` events of `trace`. Deterministic, and
/// independent of every other trace in the log.
pub fn encode_prefix(
    trace: &Trace,
    length: usize,
    alphabet: &[String],
    schema: &BTreeMap<String, AttributeType>,
    label: Option<OutcomeLabel>,
) -> Result<EncodedPrefix> {
    if length == 0 || length > trace.len() {
        return Err(Error::IndexOutOfRange {
            position: length,
            len: trace.len(),
        });
    }
    let events = &trace.events[..length];
    let snapshot = snapshot_at(trace, length)?;
    Ok(EncodedPrefix {
        case_id: trace.case_id.clone(),
        prefix_length: length,
        frequency: encode_frequency(events, alphabet),
        sequence: events.iter().map(|e| e.activity.clone()).collect(),
        features: FeatureVector {
            values: snapshot.complete(schema),
            label,
        },
    })
}

/// Renders encoded prefixes as a CSV training matrix for inspection:
/// `case_id,prefix_length,<attr...>,label`.
pub fn export_training_matrix(
    prefixes: &[EncodedPrefix],
    schema: &BTreeMap<String, AttributeType>,
) -> String {
    let mut out = String::from("case_id,prefix_length");
    for name in schema.keys() {
        out.push(',');
        out.push_str(&escape_csv(name));
    }
    out.push_str(",label\n");
    for prefix in prefixes {
        out.push_str(&escape_csv(&prefix.case_id));
        out.push_str(&format!(",{}", prefix.prefix_length));
        for name in schema.keys() {
            out.push(',');
            let value = prefix
                .features
                .values
                .get(name)
                .cloned()
                .unwrap_or(AttributeValue::Missing);
            out.push_str(&escape_csv(&value.to_string()));
        }
        out.push(',');
        if let Some(label) = prefix.features.label {
            out.push_str(&label.to_string());
        }
        out.push('\n');
    }
    out
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
