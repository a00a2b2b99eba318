//! Replay harness and metrics: gold-standard labeling, replaying test
//! traces as an event stream, accuracy / earliness / failure-rate per the
//! reliability-gated verdicts, timing capture, parameter sweeps, and the
//! on-the-fly baseline that trains a throwaway tree per query.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::classification::{predict_tree, train_tree};
use crate::clustering::edit_distance_normalized;
use crate::encoding::FeatureVector;
use crate::error::{Error, Result};
use crate::event_model::{snapshot_at, snapshot_of_events, Event, EventLog, Trace};
use crate::monitor::{on_case_end, on_event, CaseState, MonitorVerdict, RuntimeConfig};
use crate::pipeline::{train, Instance, PredictiveModel, TrainingConfig};
use crate::predicate::{parse_formula, LtlFormula, OutcomeLabel, TraceLabeler};

/// Replay record for one test trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub case_id: String,
    pub gold: OutcomeLabel,
    pub verdict: MonitorVerdict,
    /// 1-based event index of the reliable prediction, when there is one.
    pub prediction_event_index: Option<usize>,
    pub trace_length: usize,
    /// Wall-clock time of each evaluation point, reliable or deferred.
    pub latencies_ms: Vec<f64>,
}

/// Counts and aggregates over one replayed test set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// (TP + TN) / (TP + FP + TN + FN); undefined without predictions.
    pub accuracy: Option<f64>,
    /// Fraction of test traces ending in "maybe".
    pub failure_rate: f64,
    /// Mean prediction_event_index / trace_length over predicted traces.
    pub earliness: Option<f64>,
    pub init_time_ms: f64,
    pub processing_time_ms: f64,
    pub avg_prediction_time_ms: f64,
}

/// Evaluates the predicate on every completed trace of the testing set.
pub fn gold_standard(
    test_log: &EventLog,
    labeler: &dyn TraceLabeler,
) -> BTreeMap<String, OutcomeLabel> {
    test_log
        .traces
        .iter()
        .map(|trace| (trace.case_id.clone(), labeler.label(trace)))
        .collect()
}

/// Replay of the whole testing set plus its total wall-clock time.
#[derive(Debug, Clone)]
pub struct Replay {
    pub results: Vec<ReplayResult>,
    pub processing_time_ms: f64,
}

/// Replays each test trace as an event stream against the trained model,
/// stopping at the first reliable prediction (or the end of the trace).
/// Gold labels come from the model's own formula.
pub fn replay(test_log: &EventLog, model: &PredictiveModel, config: &RuntimeConfig) -> Result<Replay> {
    let formula = parse_formula(&model.formula)?;
    Ok(replay_with_labeler(test_log, model, config, &formula, false))
}

/// Replay with an explicit labeler; `parallel` trades reproducible latency
/// measurement for throughput.
pub fn replay_with_labeler(
    test_log: &EventLog,
    model: &PredictiveModel,
    config: &RuntimeConfig,
    labeler: &dyn TraceLabeler,
    parallel: bool,
) -> Replay {
    let started = Instant::now();
    let results: Vec<ReplayResult> = if parallel {
        test_log
            .traces
            .par_iter()
            .map(|trace| replay_trace(trace, model, config, labeler.label(trace)))
            .collect()
    } else {
        test_log
            .traces
            .iter()
            .map(|trace| replay_trace(trace, model, config, labeler.label(trace)))
            .collect()
    };
    Replay {
        results,
        processing_time_ms: started.elapsed().as_secs_f64() * 1000.0,
    }
}

fn replay_trace(
    trace: &Trace,
    model: &PredictiveModel,
    config: &RuntimeConfig,
    gold: OutcomeLabel,
) -> ReplayResult {
    let mut state = CaseState::new(&trace.case_id);
    let mut latencies_ms = Vec::new();
    let mut reliable = None;
    for event in &trace.events {
        let point = Instant::now();
        let verdict = on_event(&mut state, event.clone(), model, config);
        if let Some(verdict) = verdict {
            latencies_ms.push(point.elapsed().as_secs_f64() * 1000.0);
            if let MonitorVerdict::Predicted(_) = &verdict {
                reliable = Some(verdict);
                break; // replay stops at the first reliable prediction
            }
        }
    }
    let verdict = reliable.unwrap_or_else(|| on_case_end(&mut state));
    let prediction_event_index = match &verdict {
        MonitorVerdict::Predicted(p) => Some(p.events_seen),
        _ => None,
    };
    ReplayResult {
        case_id: trace.case_id.clone(),
        gold,
        verdict,
        prediction_event_index,
        trace_length: trace.len(),
        latencies_ms,
    }
}

/// Classifies replayed predictions against the gold standard and aggregates
/// the §-style metrics; maybes count into the failure rate, never as errors.
pub fn compute_metrics(
    results: &[ReplayResult],
    init_time_ms: f64,
    processing_time_ms: f64,
) -> MetricsReport {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_count = 0usize;
    let mut maybes = 0usize;
    let mut earliness_sum = 0.0;
    let mut predicted = 0usize;
    for result in results {
        match &result.verdict {
            MonitorVerdict::Predicted(p) => {
                predicted += 1;
                earliness_sum += p.events_seen as f64 / result.trace_length as f64;
                match (result.gold, p.label) {
                    (OutcomeLabel::Compliant, OutcomeLabel::Compliant) => tp += 1,
                    (OutcomeLabel::NonCompliant, OutcomeLabel::Compliant) => fp += 1,
                    (OutcomeLabel::NonCompliant, OutcomeLabel::NonCompliant) => tn += 1,
                    (OutcomeLabel::Compliant, OutcomeLabel::NonCompliant) => fn_count += 1,
                }
            }
            _ => maybes += 1,
        }
    }
    let all_latencies: Vec<f64> = results.iter().flat_map(|r| r.latencies_ms.iter().copied()).collect();
    MetricsReport {
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_count,
        accuracy: (predicted > 0).then(|| (tp + tn) as f64 / predicted as f64),
        failure_rate: if results.is_empty() {
            0.0
        } else {
            maybes as f64 / results.len() as f64
        },
        earliness: (predicted > 0).then(|| earliness_sum / predicted as f64),
        init_time_ms,
        processing_time_ms,
        avg_prediction_time_ms: if all_latencies.is_empty() {
            0.0
        } else {
            all_latencies.iter().sum::<f64>() / all_latencies.len() as f64
        },
    }
}

/// Grid over the instance, prefix gap and minimum class probability axes.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub instances: Vec<Instance>,
    pub gaps: Vec<usize>,
    pub min_probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub instance: Instance,
    pub gap: usize,
    pub min_prob: f64,
    pub report: MetricsReport,
}

/// Trains one model per (instance, gap) cell and replays the testing set
/// once per minimum class probability; thresholds live outside the model,
/// so each model is reused across the probability axis.
pub fn sweep(
    training: &EventLog,
    testing: &EventLog,
    formula: &LtlFormula,
    grid: &SweepGrid,
    runtime: &RuntimeConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &instance in &grid.instances {
        for &gap in &grid.gaps {
            let mut config = TrainingConfig::instance(instance, formula.clone());
            config.prefixes.gap = gap;
            config.seed = seed;
            let model = train(training, &config)?;
            for &min_prob in &grid.min_probs {
                let cell_config = RuntimeConfig {
                    min_probability: min_prob,
                    ..*runtime
                };
                let outcome = replay(testing, &model, &cell_config)?;
                rows.push(SweepRow {
                    instance,
                    gap,
                    min_prob,
                    report: compute_metrics(
                        &outcome.results,
                        model.init_time_ms,
                        outcome.processing_time_ms,
                    ),
                });
            }
        }
    }
    Ok(rows)
}

/// CSV rendering of sweep rows (also used for single-cell reports):
/// `instance,gap,min_prob,tp,fp,tn,fn,accuracy,failure_rate,earliness,init_ms,processing_ms,avg_prediction_ms`.
pub fn report_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "instance,gap,min_prob,tp,fp,tn,fn,accuracy,failure_rate,earliness,init_ms,processing_ms,avg_prediction_ms\n",
    );
    for row in rows {
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "NaN".into());
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.instance,
            row.gap,
            row.min_prob,
            r.true_positives,
            r.false_positives,
            r.true_negatives,
            r.false_negatives,
            fmt_opt(r.accuracy),
            r.failure_rate,
            fmt_opt(r.earliness),
            r.init_time_ms,
            r.processing_time_ms,
            r.avg_prediction_time_ms,
        ));
    }
    out
}

/// Historical prefixes of the running prefix's length whose control flow is
/// within `1 - similarity_threshold` normalized edit distance, encoded as
/// labeled training rows.
pub fn similar_history_rows(
    history: &EventLog,
    prefix_events: &[Event],
    similarity_threshold: f64,
    labeler: &dyn TraceLabeler,
) -> Vec<FeatureVector> {
    let n = prefix_events.len();
    let cutoff = 1.0 - similarity_threshold;
    let query: Vec<&str> = prefix_events.iter().map(|e| e.activity.as_str()).collect();
    history
        .traces
        .iter()
        .filter(|t| t.len() >= n)
        .filter_map(|t| {
            let candidate: Vec<&str> = t.events[..n].iter().map(|e| e.activity.as_str()).collect();
            if edit_distance_normalized(&query, &candidate) <= cutoff {
                let snapshot = snapshot_at(t, n).expect("n <= trace length");
                Some(FeatureVector {
                    values: snapshot.complete(&history.attribute_schema),
                    label: Some(labeler.label(t)),
                })
            } else {
                None
            }
        })
        .collect()
}

/// The on-the-fly baseline: filter historical prefixes by edit-distance
/// similarity, train a decision tree right now, query it with the running
/// prefix's snapshot, and apply the same reliability gate.
pub fn on_the_fly_predict(
    history: &EventLog,
    prefix_events: &[Event],
    similarity_threshold: f64,
    labeler: &dyn TraceLabeler,
    config: &RuntimeConfig,
) -> Result<MonitorVerdict> {
    if history.traces.is_empty() {
        return Err(Error::Parameter("baseline needs a non-empty history".into()));
    }
    if prefix_events.is_empty() {
        return Ok(MonitorVerdict::Deferred {
            probability: None,
            reason: "empty running prefix".into(),
        });
    }
    let rows = similar_history_rows(history, prefix_events, similarity_threshold, labeler);
    if rows.is_empty() {
        return Ok(MonitorVerdict::Deferred {
            probability: None,
            reason: "no similar historical prefixes".into(),
        });
    }
    let tree = train_tree(&rows, 2)?;
    let prediction = predict_tree(&tree, &snapshot_of_events(prefix_events));
    if prediction.support >= config.min_support && prediction.probability >= config.min_probability
    {
        Ok(MonitorVerdict::Predicted(crate::monitor::ReliablePrediction {
            label: prediction.predicted,
            probability: prediction.probability,
            support: prediction.support,
            cluster_id: 0,
            events_seen: prefix_events.len(),
        }))
    } else {
        Ok(MonitorVerdict::Deferred {
            probability: Some(prediction.probability),
            reason: "reliability gate failed".into(),
        })
    }
}

/// Replays the testing set against the baseline: at every evaluation point
/// a fresh tree is trained from the similar history, until a reliable
/// prediction or the end of the trace.
pub fn replay_baseline(
    test_log: &EventLog,
    history: &EventLog,
    similarity_threshold: f64,
    labeler: &dyn TraceLabeler,
    config: &RuntimeConfig,
) -> Result<Replay> {
    let started = Instant::now();
    let mut results = Vec::with_capacity(test_log.traces.len());
    for trace in &test_log.traces {
        let gold = labeler.label(trace);
        let mut latencies_ms = Vec::new();
        let mut reliable = None;
        let mut position = 1usize;
        while position <= trace.len() {
            let point = Instant::now();
            let verdict = on_the_fly_predict(
                history,
                &trace.events[..position],
                similarity_threshold,
                labeler,
                config,
            )?;
            latencies_ms.push(point.elapsed().as_secs_f64() * 1000.0);
            if let MonitorVerdict::Predicted(_) = &verdict {
                reliable = Some(verdict);
                break;
            }
            position += config.evaluation_interval;
        }
        let verdict = reliable.unwrap_or(MonitorVerdict::Maybe);
        let prediction_event_index = match &verdict {
            MonitorVerdict::Predicted(p) => Some(p.events_seen),
            _ => None,
        };
        results.push(ReplayResult {
            case_id: trace.case_id.clone(),
            gold,
            verdict,
            prediction_event_index,
            trace_length: trace.len(),
            latencies_ms,
        });
    }
    Ok(Replay {
        results,
        processing_time_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

#[cfg(test)]
mod tests;
