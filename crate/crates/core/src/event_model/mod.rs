//! Event log model: events, traces, logs, data snapshots, and the
//! temporal train/test split.
//!
//! Logs are immutable after construction and safe to share across threads.
//! Data attributes are globally visible: an assignment made by any event
//! stays in effect for the rest of the trace (attributes are never unset),
//! so the snapshot at a position is a last-write-wins fold of everything
//! assigned up to and including that position.

mod csv;
mod xes;

pub use csv::write_csv;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single attribute assignment carried by an event (or a trace header).
///
/// `Missing` is a first-class value distinct from empty text: it means the
/// attribute has not been assigned, not that it was assigned "".
#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Text(String),
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Timestamp(DateTime<Utc>),
    Missing,
}

impl AttributeValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, AttributeValue::Missing)
    }

    /// Numeric view used by threshold splits: integers and reals as-is,
    /// timestamps as epoch milliseconds.
    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            AttributeValue::Integer(v) => Some(*v as f64),
            AttributeValue::Real(v) => Some(*v),
            AttributeValue::Timestamp(t) => Some(t.timestamp_millis() as f64),
            _ => None,
        }
    }

    pub fn type_of(&self) -> Option<AttributeType> {
        match self {
            AttributeValue::Text(_) => Some(AttributeType::Text),
            AttributeValue::Integer(_) => Some(AttributeType::Integer),
            AttributeValue::Real(_) => Some(AttributeType::Real),
            AttributeValue::Boolean(_) => Some(AttributeType::Boolean),
            AttributeValue::Timestamp(_) => Some(AttributeType::Timestamp),
            AttributeValue::Missing => None,
        }
    }
}

impl fmt::Display for AttributeValue {
    /// Canonical text rendering: CSV cells, categorical branch keys and the
    /// training-matrix export all use this. `Missing` renders empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Text(s) => write!(f, "{s}"),
            AttributeValue::Integer(v) => write!(f, "{v}"),
            AttributeValue::Real(v) => write!(f, "{v}"),
            AttributeValue::Boolean(v) => write!(f, "{v}"),
            AttributeValue::Timestamp(t) => write!(f, "{}", t.to_rfc3339()),
            AttributeValue::Missing => Ok(()),
        }
    }
}

/// Declared type of a data attribute, ordered from narrowest to widest for
/// schema inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeType {
    Boolean,
    Integer,
    Real,
    Timestamp,
    Text,
}

impl AttributeType {
    /// Whether classifiers should treat values of this type as categories
    /// rather than points on a number line.
    pub fn is_categorical(self) -> bool {
        matches!(self, AttributeType::Boolean | AttributeType::Text)
    }
}

/// One executed process activity with its data payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Non-empty activity label.
    pub activity: String,
    pub timestamp: DateTime<Utc>,
    /// Attributes assigned by this event. Absent keys are not assignments.
    pub attributes: BTreeMap<String, AttributeValue>,
}

/// One end-to-end case: an ordered sequence of events plus any trace-level
/// attribute assignments (folded into snapshots before the first event).
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    pub attributes: BTreeMap<String, AttributeValue>,
    pub events: Vec<Event>,
}

impl Trace {
    /// Builds a trace, restoring the timestamp order invariant: events are
    /// stably sorted by timestamp so ties keep their original order.
    pub fn new(
        case_id: impl Into<String>,
        attributes: BTreeMap<String, AttributeValue>,
        mut events: Vec<Event>,
    ) -> Self {
        events.sort_by_key(|e| e.timestamp);
        Trace {
            case_id: case_id.into(),
            attributes,
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<DateTime<Utc>> {
        self.events.first().map(|e| e.timestamp)
    }

    /// Activity labels of the first `len` events.
    pub fn activity_prefix(&self, len: usize) -> Vec<String> {
        self.events[..len.min(self.events.len())]
            .iter()
            .map(|e| e.activity.clone())
            .collect()
    }
}

/// A parsed event log together with its attribute schema.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub attribute_schema: BTreeMap<String, AttributeType>,
}

impl EventLog {
    pub fn empty() -> Self {
        EventLog {
            traces: Vec::new(),
            attribute_schema: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }
}

/// Input format accepted by [`parse_log`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    XesSubset,
    Csv,
}

/// Parses an event log from `source` in the declared format.
///
/// The schema is inferred as the union of observed attribute names; each
/// column gets the narrowest of boolean, integer, real, timestamp, text
/// consistent with every observed value.
pub fn parse_log(source: impl Read, format: LogFormat) -> Result<EventLog> {
    match format {
        LogFormat::Csv => csv::parse_csv(source),
        LogFormat::XesSubset => xes::parse_xes(source),
    }
}

/// The last-known value of every assigned attribute after some event.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSnapshot {
    values: BTreeMap<String, AttributeValue>,
}

const MISSING: AttributeValue = AttributeValue::Missing;

impl DataSnapshot {
    /// Value of `name`, or `Missing` if it was never assigned.
    pub fn get(&self, name: &str) -> &AttributeValue {
        self.values.get(name).unwrap_or(&MISSING)
    }

    /// Assigned (non-missing) entries.
    pub fn assigned(&self) -> impl Iterator<Item = (&String, &AttributeValue)> {
        self.values.iter()
    }

    /// Materializes one value per schema attribute, `Missing` where unset.
    pub fn complete(&self, schema: &BTreeMap<String, AttributeType>) -> BTreeMap<String, AttributeValue> {
        schema
            .keys()
            .map(|name| (name.clone(), self.get(name).clone()))
            .collect()
    }

    pub fn from_values(values: BTreeMap<String, AttributeValue>) -> Self {
        let values = values.into_iter().filter(|(_, v)| !v.is_missing()).collect();
        DataSnapshot { values }
    }
}

/// Data snapshot after the event at 1-based `position`: a last-write-wins
/// fold of trace-level attributes and the assignments of events
/// `1..=position`.
pub fn snapshot_at(trace: &Trace, position: usize) -> Result<DataSnapshot> {
    if position == 0 || position > trace.events.len() {
        return Err(Error::IndexOutOfRange {
            position,
            len: trace.events.len(),
        });
    }
    let mut values: BTreeMap<String, AttributeValue> = BTreeMap::new();
    for (name, value) in &trace.attributes {
        if !value.is_missing() {
            values.insert(name.clone(), value.clone());
        }
    }
    fold_events(&mut values, &trace.events[..position]);
    Ok(DataSnapshot { values })
}

/// Snapshot over bare stream events (no trace-level attributes).
pub fn snapshot_of_events(events: &[Event]) -> DataSnapshot {
    let mut values = BTreeMap::new();
    fold_events(&mut values, events);
    DataSnapshot { values }
}

fn fold_events(values: &mut BTreeMap<String, AttributeValue>, events: &[Event]) {
    for event in events {
        for (name, value) in &event.attributes {
            if !value.is_missing() {
                values.insert(name.clone(), value.clone());
            }
        }
    }
}

/// Splits a log temporally: traces are ordered by first-event timestamp
/// (ties keep log order) and the first `ceil(fraction * n)` become the
/// training log, the rest the testing log.
pub fn temporal_split(log: &EventLog, training_fraction: f64) -> Result<(EventLog, EventLog)> {
    if log.traces.is_empty() {
        return Err(Error::Parameter("temporal_split requires a non-empty log".into()));
    }
    if !(training_fraction > 0.0 && training_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "training fraction must lie in (0,1), got {training_fraction}"
        )));
    }
    let mut ordered: Vec<&Trace> = log.traces.iter().collect();
    ordered.sort_by_key(|t| t.first_timestamp());
    let n_train = (training_fraction * ordered.len() as f64).ceil() as usize;
    let (train, test) = ordered.split_at(n_train.min(ordered.len()));
    let make = |traces: &[&Trace]| EventLog {
        traces: traces.iter().map(|t| (*t).clone()).collect(),
        attribute_schema: log.attribute_schema.clone(),
    };
    Ok((make(train), make(test)))
}

/// Schema inference shared by the parsers: the narrowest type every raw
/// value of a column satisfies, text as the fallback.
pub(crate) fn infer_column_type<'a>(values: impl Iterator<Item = &'a str>) -> AttributeType {
    let mut boolean = true;
    let mut integer = true;
    let mut real = true;
    let mut timestamp = true;
    let mut any = false;
    for raw in values {
        any = true;
        boolean = boolean && parse_boolean(raw).is_some();
        integer = integer && raw.parse::<i64>().is_ok();
        real = real && raw.parse::<f64>().map(|v| v.is_finite()).unwrap_or(false);
        timestamp = timestamp && parse_timestamp(raw).is_some();
        if !(boolean || integer || real || timestamp) {
            break;
        }
    }
    if !any {
        return AttributeType::Text;
    }
    if boolean {
        AttributeType::Boolean
    } else if integer {
        AttributeType::Integer
    } else if real {
        AttributeType::Real
    } else if timestamp {
        AttributeType::Timestamp
    } else {
        AttributeType::Text
    }
}

pub(crate) fn parse_boolean(raw: &str) -> Option<bool> {
    if raw.eq_ignore_ascii_case("true") {
        Some(true)
    } else if raw.eq_ignore_ascii_case("false") {
        Some(false)
    } else {
        None
    }
}

pub(crate) fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw)
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

/// Converts a raw textual value under an already-decided column type.
/// Callers guarantee the type is consistent with the value.
pub(crate) fn coerce(raw: &str, ty: AttributeType) -> AttributeValue {
    match ty {
        AttributeType::Boolean => parse_boolean(raw)
            .map(AttributeValue::Boolean)
            .unwrap_or_else(|| AttributeValue::Text(raw.to_string())),
        AttributeType::Integer => raw
            .parse::<i64>()
            .map(AttributeValue::Integer)
            .unwrap_or_else(|_| AttributeValue::Text(raw.to_string())),
        AttributeType::Real => raw
            .parse::<f64>()
            .map(AttributeValue::Real)
            .unwrap_or_else(|_| AttributeValue::Text(raw.to_string())),
        AttributeType::Timestamp => parse_timestamp(raw)
            .map(AttributeValue::Timestamp)
            .unwrap_or_else(|| AttributeValue::Text(raw.to_string())),
        AttributeType::Text => AttributeValue::Text(raw.to_string()),
    }
}

#[cfg(test)]
mod tests;
