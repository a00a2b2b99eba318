use super::*;
use crate::event_model::{AttributeType, AttributeValue};
use crate::monitor::ReliablePrediction;
use chrono::{TimeZone, Utc};
use std::collections::BTreeMap;

fn event(activity: &str, seconds: i64, attrs: &[(&str, &str)]) -> Event {
    Event {
        activity: activity.to_string(),
        timestamp: Utc.timestamp_opt(seconds, 0).unwrap(),
        attributes: attrs
            .iter()
            .map(|(k, v)| (k.to_string(), AttributeValue::Text(v.to_string())))
            .collect(),
    }
}

fn trace(case_id: &str, activities: &[&str]) -> Trace {
    let events = activities
        .iter()
        .enumerate()
        .map(|(i, a)| event(a, i as i64, &[]))
        .collect();
    Trace::new(case_id, BTreeMap::new(), events)
}

fn formula(text: &str) -> LtlFormula {
    parse_formula(text).unwrap()
}

#[test]
fn gold_standard_counts_satisfying_traces() {
    let log = EventLog {
        traces: vec![
            trace("t1", &["a", "b"]),
            trace("t2", &["b", "c"]),
            trace("t3", &["a"]),
            trace("t4", &["c"]),
            trace("t5", &["b", "a"]),
        ],
        attribute_schema: BTreeMap::new(),
    };
    let gold = gold_standard(&log, &formula(r#"F("a")"#));
    let compliant = gold.values().filter(|l| **l == OutcomeLabel::Compliant).count();
    assert_eq!(compliant, 3);
    assert_eq!(gold["t2"], OutcomeLabel::NonCompliant);
    assert!(gold_standard(&EventLog::empty(), &formula(r#"F("a")"#)).is_empty());
}

fn scripted_result(
    case_id: &str,
    gold: OutcomeLabel,
    predicted: Option<(OutcomeLabel, usize)>,
    trace_length: usize,
) -> ReplayResult {
    let verdict = match predicted {
        Some((label, at)) => MonitorVerdict::Predicted(ReliablePrediction {
            label,
            probability: 0.9,
            support: 10,
            cluster_id: 0,
            events_seen: at,
        }),
        None => MonitorVerdict::Maybe,
    };
    ReplayResult {
        case_id: case_id.to_string(),
        gold,
        verdict,
        prediction_event_index: predicted.map(|(_, at)| at),
        trace_length,
        latencies_ms: vec![1.0],
    }
}

#[test]
fn metrics_reproduce_hand_computed_scenario() {
    use OutcomeLabel::{Compliant, NonCompliant};
    // TP=3, TN=2, FP=1, FN=0, 4 maybes; predictions at event 6 of length-20 traces
    let mut results = vec![
        scripted_result("tp1", Compliant, Some((Compliant, 6)), 20),
        scripted_result("tp2", Compliant, Some((Compliant, 6)), 20),
        scripted_result("tp3", Compliant, Some((Compliant, 6)), 20),
        scripted_result("tn1", NonCompliant, Some((NonCompliant, 6)), 20),
        scripted_result("tn2", NonCompliant, Some((NonCompliant, 6)), 20),
        scripted_result("fp1", NonCompliant, Some((Compliant, 6)), 20),
    ];
    for i in 0..4 {
        results.push(scripted_result(&format!("m{i}"), Compliant, None, 20));
    }
    let report = compute_metrics(&results, 100.0, 500.0);
    assert_eq!(report.true_positives, 3);
    assert_eq!(report.true_negatives, 2);
    assert_eq!(report.false_positives, 1);
    assert_eq!(report.false_negatives, 0);
    assert!((report.accuracy.unwrap() - 5.0 / 6.0).abs() < 1e-9);
    assert_eq!(report.failure_rate, 0.4);
    assert!((report.earliness.unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(report.init_time_ms, 100.0);
    assert_eq!(report.avg_prediction_time_ms, 1.0);
}

#[test]
fn single_prediction_earliness() {
    let results = vec![
        scripted_result("p", OutcomeLabel::Compliant, Some((OutcomeLabel::Compliant, 6)), 20),
        scripted_result("m1", OutcomeLabel::Compliant, None, 10),
        scripted_result("m2", OutcomeLabel::Compliant, None, 10),
    ];
    let report = compute_metrics(&results, 0.0, 0.0);
    assert!((report.earliness.unwrap() - 0.3).abs() < 1e-12);
    assert!((report.failure_rate - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn zero_predictions_reports_nan_accuracy_and_full_failure() {
    let results = vec![
        scripted_result("m1", OutcomeLabel::Compliant, None, 5),
        scripted_result("m2", OutcomeLabel::NonCompliant, None, 5),
    ];
    let report = compute_metrics(&results, 0.0, 0.0);
    assert_eq!(report.accuracy, None);
    assert_eq!(report.earliness, None);
    assert_eq!(report.failure_rate, 1.0);
    // counting identity: predicted + maybe = total
    let predicted =
        report.true_positives + report.false_positives + report.true_negatives + report.false_negatives;
    assert_eq!(predicted, 0);
}

/// Log where `risk` at event 1 determines a later "incident"; traces are
/// long enough for two evaluation points at the default interval.
fn determined_log(cases: usize) -> EventLog {
    let mut traces = Vec::new();
    for i in 0..cases {
        let risky = i % 2 == 0;
        let mut events = vec![event("start", 0, &[("risk", if risky { "high" } else { "low" })])];
        for j in 1..7 {
            events.push(event("work", j, &[]));
        }
        if risky {
            events.push(event("incident", 7, &[]));
        }
        events.push(event("end", 8, &[]));
        traces.push(Trace::new(format!("c{i}"), BTreeMap::new(), events));
    }
    EventLog {
        traces,
        attribute_schema: [("risk".to_string(), AttributeType::Text)].into(),
    }
}

#[test]
fn replay_records_prediction_index_and_is_deterministic() {
    let log = determined_log(30);
    let config = TrainingConfig::instance(Instance::MbasedDt, formula(r#"F("incident")"#));
    let model = train(&log, &config).unwrap();
    let runtime = RuntimeConfig::default();
    let first = replay(&log, &model, &runtime).unwrap();
    let second = replay(&log, &model, &runtime).unwrap();
    assert_eq!(first.results.len(), 30);
    for (a, b) in first.results.iter().zip(&second.results) {
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.prediction_event_index, b.prediction_event_index);
    }
    // risk is visible at event 1 and every cluster is large: predict at 1
    for result in &first.results {
        assert_eq!(result.prediction_event_index, Some(1));
        assert_eq!(result.latencies_ms.len(), 1);
    }
    let report = compute_metrics(&first.results, model.init_time_ms, first.processing_time_ms);
    assert_eq!(report.accuracy, Some(1.0));
    assert_eq!(report.failure_rate, 0.0);
}

#[test]
fn parallel_replay_matches_serial_verdicts() {
    let log = determined_log(20);
    let config = TrainingConfig::instance(Instance::MbasedDt, formula(r#"F("incident")"#));
    let model = train(&log, &config).unwrap();
    let runtime = RuntimeConfig::default();
    let serial = replay(&log, &model, &runtime).unwrap();
    let f = formula(r#"F("incident")"#);
    let parallel = replay_with_labeler(&log, &model, &runtime, &f, true);
    for (a, b) in serial.results.iter().zip(&parallel.results) {
        assert_eq!(a.case_id, b.case_id);
        assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn sweep_emits_one_row_per_cell() {
    let log = determined_log(24);
    let (training, testing) = crate::event_model::temporal_split(&log, 0.8).unwrap();
    let grid = SweepGrid {
        instances: vec![Instance::MbasedDt],
        gaps: vec![3, 5, 10],
        min_probs: vec![0.6, 0.7, 0.8, 0.9],
    };
    let rows = sweep(
        &training,
        &testing,
        &formula(r#"F("incident")"#),
        &grid,
        &RuntimeConfig::default(),
        42,
    )
    .unwrap();
    assert_eq!(rows.len(), 12);

    let csv = report_csv(&rows);
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "instance,gap,min_prob,tp,fp,tn,fn,accuracy,failure_rate,earliness,init_ms,processing_ms,avg_prediction_ms"
    );
    assert_eq!(csv.lines().count(), 13);

    // a rerun reproduces every non-timing column
    let rows2 = sweep(
        &training,
        &testing,
        &formula(r#"F("incident")"#),
        &grid,
        &RuntimeConfig::default(),
        42,
    )
    .unwrap();
    for (a, b) in rows.iter().zip(&rows2) {
        assert_eq!(a.report.accuracy, b.report.accuracy);
        assert_eq!(a.report.failure_rate, b.report.failure_rate);
        assert_eq!(a.report.earliness, b.report.earliness);
        assert_eq!(a.report.true_positives, b.report.true_positives);
    }
}

fn diagnosis_history() -> EventLog {
    // prefixes <M,A,C,D> with (sym, dia, pre) snapshots mirroring the
    // diagnosis rows; compliant traces append the recovery event R
    let specs: Vec<(&str, &str, &str, bool)> = vec![
        ("painA", "d1", "p1", false),
        ("painA", "d1", "p1", false),
        ("painA", "d1", "p1", false),
        ("painA", "d1", "p1", false),
        ("painA", "d1", "p1", false),
        ("painA", "d1", "p1", false),
        ("painB", "d2", "p1", false),
        ("painB", "d2", "p1", false),
        ("painB", "d2", "p1", false),
        ("painB", "d1", "p2", false),
        ("painB", "d1", "p2", false),
        ("painB", "d1", "p1", true),
        ("painB", "d1", "p1", true),
        ("painB", "d1", "p1", false),
    ];
    let traces = specs
        .iter()
        .enumerate()
        .map(|(i, (sym, dia, pre, recovers))| {
            let mut events = vec![
                event("M", 0, &[("sym", sym)]),
                event("A", 1, &[]),
                event("C", 2, &[]),
                event("D", 3, &[("dia", dia), ("pre", pre)]),
            ];
            if *recovers {
                events.push(event("R", 4, &[]));
            }
            Trace::new(format!("h{i}"), BTreeMap::new(), events)
        })
        .collect();
    EventLog {
        traces,
        attribute_schema: [
            ("sym".to_string(), AttributeType::Text),
            ("dia".to_string(), AttributeType::Text),
            ("pre".to_string(), AttributeType::Text),
        ]
        .into(),
    }
}

#[test]
fn baseline_reproduces_diagnosis_leaf() {
    let history = diagnosis_history();
    let running = vec![
        event("M", 0, &[("sym", "painB")]),
        event("A", 1, &[]),
        event("C", 2, &[]),
        event("D", 3, &[("dia", "d1"), ("pre", "p1")]),
    ];
    let config = RuntimeConfig {
        min_support: 2,
        min_probability: 0.6,
        evaluation_interval: 5,
    };
    let verdict = on_the_fly_predict(&history, &running, 0.8, &formula(r#"F("R")"#), &config).unwrap();
    let MonitorVerdict::Predicted(p) = verdict else {
        panic!("expected prediction, got {verdict:?}");
    };
    assert_eq!(p.label, OutcomeLabel::Compliant);
    assert_eq!(p.support, 2);
    assert!((p.probability - 2.0 / 3.0).abs() < 0.01);
}

#[test]
fn baseline_uniform_history_is_certain() {
    let history = EventLog {
        traces: (0..8)
            .map(|i| trace(&format!("h{i}"), &["a", "b", "x"]))
            .collect(),
        attribute_schema: BTreeMap::new(),
    };
    let running = vec![event("a", 0, &[]), event("b", 1, &[])];
    let config = RuntimeConfig {
        min_support: 6,
        min_probability: 0.7,
        evaluation_interval: 5,
    };
    let verdict = on_the_fly_predict(&history, &running, 0.8, &formula(r#"F("x")"#), &config).unwrap();
    let MonitorVerdict::Predicted(p) = verdict else {
        panic!("expected prediction, got {verdict:?}");
    };
    assert_eq!(p.label, OutcomeLabel::Compliant);
    assert_eq!(p.probability, 1.0);
    assert_eq!(p.support, 8);
}

#[test]
fn baseline_with_no_similar_prefixes_defers() {
    let history = EventLog {
        traces: vec![trace("h", &["x", "y", "z"])],
        attribute_schema: BTreeMap::new(),
    };
    let running = vec![event("a", 0, &[]), event("b", 1, &[])];
    let verdict = on_the_fly_predict(
        &history,
        &running,
        1.0, // exact control-flow match required
        &formula(r#"F("z")"#),
        &RuntimeConfig::default(),
    )
    .unwrap();
    assert!(matches!(verdict, MonitorVerdict::Deferred { ref reason, .. } if reason.contains("no similar")));
    assert!(on_the_fly_predict(
        &EventLog::empty(),
        &running,
        0.8,
        &formula(r#"F("z")"#),
        &RuntimeConfig::default()
    )
    .is_err());
}

#[test]
fn loosening_similarity_never_shrinks_the_training_set() {
    let history = determined_log(20);
    let running: Vec<Event> = history.traces[0].events[..6].to_vec();
    let f = formula(r#"F("incident")"#);
    let mut last = usize::MAX;
    for threshold in [1.0, 0.8, 0.5, 0.2, 0.0] {
        let rows = similar_history_rows(&history, &running, threshold, &f);
        assert!(
            last == usize::MAX || rows.len() >= last,
            "threshold {threshold} shrank the training set"
        );
        last = rows.len();
    }
    // threshold 0.0 admits every length-6-or-longer historical prefix
    assert_eq!(last, 20);
}

#[test]
fn baseline_replay_stops_at_first_reliable_point() {
    let log = determined_log(12);
    let (history, testing) = crate::event_model::temporal_split(&log, 0.5).unwrap();
    let replayed = replay_baseline(
        &testing,
        &history,
        0.8,
        &formula(r#"F("incident")"#),
        &RuntimeConfig {
            min_support: 3,
            min_probability: 0.7,
            evaluation_interval: 5,
        },
    )
    .unwrap();
    for result in &replayed.results {
        assert_eq!(result.prediction_event_index, Some(1));
        assert_eq!(result.latencies_ms.len(), 1);
    }
}
