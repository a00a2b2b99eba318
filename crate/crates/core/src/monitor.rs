//! Online prediction over running cases: maintain per-case state, evaluate
//! at every h-th event starting from the first, and emit a prediction once
//! class support and class probability clear the reliability gate.
//!
//! The first reliable prediction sticks: later events never revise it. The
//! model is read-only and shared; each case's state is owned by one handler
//! at a time, and distinct cases may be processed concurrently.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_model::{snapshot_of_events, AttributeType, AttributeValue, Event};
use crate::pipeline::PredictiveModel;
use crate::predicate::OutcomeLabel;

/// Reliability thresholds and evaluation cadence. Kept outside the model so
/// one trained model serves many threshold settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeConfig {
    /// Minimum class support s.
    pub min_support: u32,
    /// Minimum class probability (minConf).
    pub min_probability: f64,
    /// Evaluate at events 1, 1+h, 1+2h, ...
    pub evaluation_interval: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            min_support: 6,
            min_probability: 0.7,
            evaluation_interval: 5,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_probability) {
            return Err(Error::Parameter(format!(
                "min probability must lie in [0,1], got {}",
                self.min_probability
            )));
        }
        if self.evaluation_interval == 0 {
            return Err(Error::Parameter("evaluation interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// A prediction that passed the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliablePrediction {
    pub label: OutcomeLabel,
    pub probability: f64,
    pub support: u32,
    pub cluster_id: usize,
    /// 1-based index of the event at which the gate passed.
    pub events_seen: usize,
}

/// Lifecycle of a monitored case. Once predicted or finished, further
/// events cannot change the status.
#[derive(Debug, Clone, PartialEq)]
pub enum CaseStatus {
    Open,
    Predicted(ReliablePrediction),
    FinishedMaybe,
}

#[derive(Debug, Clone)]
pub struct CaseState {
    pub case_id: String,
    pub events: Vec<Event>,
    pub status: CaseStatus,
}

impl CaseState {
    pub fn new(case_id: impl Into<String>) -> Self {
        CaseState {
            case_id: case_id.into(),
            events: Vec::new(),
            status: CaseStatus::Open,
        }
    }
}

/// The monitor's answer at an evaluation point or at case end.
#[derive(Debug, Clone, PartialEq)]
pub enum MonitorVerdict {
    Predicted(ReliablePrediction),
    Deferred {
        probability: Option<f64>,
        reason: String,
    },
    /// The case ended without any reliable prediction.
    Maybe,
}

/// Feeds one event to a case. At evaluation points (events 1, 1+h, ...)
/// the current prefix is assigned to its nearest cluster and that cluster's
/// classifier is queried with the prefix's data snapshot; the verdict is
/// `Predicted` only when support >= s and probability >= minConf.
pub fn on_event(
    state: &mut CaseState,
    event: Event,
    model: &PredictiveModel,
    config: &RuntimeConfig,
) -> Option<MonitorVerdict> {
    if state.status != CaseStatus::Open {
        log::warn!("case {:?} is closed; ignoring event {:?}", state.case_id, event.activity);
        return None;
    }
    state.events.push(event);
    let seen = state.events.len();
    if (seen - 1) % config.evaluation_interval != 0 {
        return None;
    }
    Some(evaluate_case(state, model, config))
}

fn evaluate_case(
    state: &mut CaseState,
    model: &PredictiveModel,
    config: &RuntimeConfig,
) -> MonitorVerdict {
    let assignment = model.assign(&state.events);
    let Some(classifier) = model.classifier(assignment.cluster_id) else {
        return MonitorVerdict::Deferred {
            probability: None,
            reason: format!("cluster {} has no classifier", assignment.cluster_id),
        };
    };
    let snapshot = snapshot_of_events(&state.events);
    let prediction = classifier.predict(&snapshot);
    let support_ok = prediction.support >= config.min_support;
    let probability_ok = prediction.probability >= config.min_probability;
    if support_ok && probability_ok {
        let reliable = ReliablePrediction {
            label: prediction.predicted,
            probability: prediction.probability,
            support: prediction.support,
            cluster_id: assignment.cluster_id,
            events_seen: state.events.len(),
        };
        state.status = CaseStatus::Predicted(reliable.clone());
        MonitorVerdict::Predicted(reliable)
    } else {
        let mut failed = Vec::new();
        if !support_ok {
            failed.push(format!("support {} < {}", prediction.support, config.min_support));
        }
        if !probability_ok {
            failed.push(format!(
                "probability {:.3} < {}",
                prediction.probability, config.min_probability
            ));
        }
        MonitorVerdict::Deferred {
            probability: Some(prediction.probability),
            reason: failed.join(", "),
        }
    }
}

/// Closes a case: the already-emitted prediction if there is one, otherwise
/// the final answer is "maybe".
pub fn on_case_end(state: &mut CaseState) -> MonitorVerdict {
    match &state.status {
        CaseStatus::Predicted(reliable) => MonitorVerdict::Predicted(reliable.clone()),
        _ => {
            state.status = CaseStatus::FinishedMaybe;
            MonitorVerdict::Maybe
        }
    }
}

// --- newline-delimited streaming protocol -----------------------------------

/// One inbound message: an event of a running case, or its end marker.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InboundMessage {
    Event {
        case: String,
        activity: String,
        timestamp: String,
        #[serde(default)]
        attrs: serde_json::Map<String, serde_json::Value>,
    },
    End {
        case: String,
    },
}

/// One outbound line, written at every evaluation point and at case end.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct OutboundMessage {
    pub case: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<OutcomeLabel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub events_seen: usize,
    pub latency_ms: f64,
}

impl OutboundMessage {
    pub fn from_verdict(
        case: &str,
        verdict: &MonitorVerdict,
        events_seen: usize,
        latency_ms: f64,
    ) -> Self {
        let mut message = OutboundMessage {
            case: case.to_string(),
            verdict: String::new(),
            label: None,
            probability: None,
            support: None,
            cluster: None,
            reason: None,
            events_seen,
            latency_ms,
        };
        match verdict {
            MonitorVerdict::Predicted(p) => {
                message.verdict = "predicted".into();
                message.label = Some(p.label);
                message.probability = Some(p.probability);
                message.support = Some(p.support);
                message.cluster = Some(p.cluster_id);
                message.events_seen = p.events_seen;
            }
            MonitorVerdict::Deferred { probability, reason } => {
                message.verdict = "deferred".into();
                message.probability = *probability;
                message.reason = Some(reason.clone());
            }
            MonitorVerdict::Maybe => message.verdict = "maybe".into(),
        }
        message
    }
}

/// Converts a JSON attribute value under the model's declared type.
/// Unknown attributes and uncoercible values are dropped with a warning.
fn coerce_attr(value: &serde_json::Value, ty: AttributeType) -> Option<AttributeValue> {
    use serde_json::Value;
    match (ty, value) {
        (_, Value::Null) => None,
        (AttributeType::Boolean, Value::Bool(b)) => Some(AttributeValue::Boolean(*b)),
        (AttributeType::Boolean, Value::String(s)) => {
            crate::event_model::parse_boolean(s).map(AttributeValue::Boolean)
        }
        (AttributeType::Integer, Value::Number(n)) => n.as_i64().map(AttributeValue::Integer),
        (AttributeType::Integer, Value::String(s)) => {
            s.parse().ok().map(AttributeValue::Integer)
        }
        (AttributeType::Real, Value::Number(n)) => n.as_f64().map(AttributeValue::Real),
        (AttributeType::Real, Value::String(s)) => s.parse().ok().map(AttributeValue::Real),
        (AttributeType::Timestamp, Value::String(s)) => {
            crate::event_model::parse_timestamp(s).map(AttributeValue::Timestamp)
        }
        (AttributeType::Text, Value::String(s)) => Some(AttributeValue::Text(s.clone())),
        (AttributeType::Text, other) => Some(AttributeValue::Text(other.to_string())),
        _ => None,
    }
}

/// Serves predictions over newline-delimited JSON: reads inbound messages
/// from `input`, writes one outbound line per evaluation point and per case
/// end to `output`. Malformed lines are skipped with a warning.
pub fn serve(
    model: &PredictiveModel,
    config: &RuntimeConfig,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<()> {
    let mut cases: HashMap<String, CaseState> = HashMap::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let message: InboundMessage = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("skipping malformed message: {e}");
                continue;
            }
        };
        match message {
            InboundMessage::Event {
                case,
                activity,
                timestamp,
                attrs,
            } => {
                if activity.is_empty() {
                    log::warn!("case {case:?}: empty activity label, message skipped");
                    continue;
                }
                let Some(timestamp) = crate::event_model::parse_timestamp(&timestamp) else {
                    log::warn!("case {case:?}: invalid timestamp {timestamp:?}, message skipped");
                    continue;
                };
                let mut attributes = std::collections::BTreeMap::new();
                for (name, raw) in &attrs {
                    match model.attribute_schema.get(name) {
                        None => log::warn!("case {case:?}: attribute {name:?} not in schema, dropped"),
                        Some(ty) => match coerce_attr(raw, *ty) {
                            Some(value) => {
                                attributes.insert(name.clone(), value);
                            }
                            None => {
                                log::warn!("case {case:?}: attribute {name:?}={raw} not coercible to {ty:?}, dropped")
                            }
                        },
                    }
                }
                let event = Event {
                    activity,
                    timestamp,
                    attributes,
                };
                let state = cases
                    .entry(case.clone())
                    .or_insert_with(|| CaseState::new(case.clone()));
                let started = Instant::now();
                if let Some(verdict) = on_event(state, event, model, config) {
                    let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
                    let out =
                        OutboundMessage::from_verdict(&case, &verdict, state.events.len(), latency_ms);
                    writeln!(output, "{}", serde_json::to_string(&out).expect("serializable"))?;
                    output.flush()?;
                }
            }
            InboundMessage::End { case } => {
                let state = cases
                    .entry(case.clone())
                    .or_insert_with(|| CaseState::new(case.clone()));
                let started = Instant::now();
                let verdict = on_case_end(state);
                let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
                let out =
                    OutboundMessage::from_verdict(&case, &verdict, state.events.len(), latency_ms);
                writeln!(output, "{}", serde_json::to_string(&out).expect("serializable"))?;
                output.flush()?;
            }
        }
    }
    Ok(())
}
