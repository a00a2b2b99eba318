use super::*;
use chrono::TimeZone;
use proptest::prelude::*;

fn ts(seconds: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(seconds, 0).unwrap()
}

pub(crate) fn event(activity: &str, seconds: i64, attrs: &[(&str, AttributeValue)]) -> Event {
    Event {
        activity: activity.to_string(),
        timestamp: ts(seconds),
        attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    }
}

fn text(v: &str) -> AttributeValue {
    AttributeValue::Text(v.to_string())
}

#[test]
fn csv_two_events_one_case() {
    let data = "case_id,activity,timestamp,sym\n\
                c1,M,2011-01-01T10:00:00Z,painA\n\
                c1,A,2011-01-01T11:00:00Z,\n";
    let log = parse_log(data.as_bytes(), LogFormat::Csv).unwrap();
    assert_eq!(log.traces.len(), 1);
    assert_eq!(log.traces[0].events.len(), 2);
    assert_eq!(log.traces[0].case_id, "c1");
    assert_eq!(log.traces[0].events[0].activity, "M");
    assert_eq!(log.traces[0].events[0].attributes["sym"], text("painA"));
    // empty cell is no assignment, not empty text
    assert!(!log.traces[0].events[1].attributes.contains_key("sym"));
    assert_eq!(log.attribute_schema["sym"], AttributeType::Text);
}

#[test]
fn csv_empty_input_is_empty_log() {
    let log = parse_log(&b""[..], LogFormat::Csv).unwrap();
    assert!(log.is_empty());
    let log = parse_log(&b"case_id,activity,timestamp\n"[..], LogFormat::Csv).unwrap();
    assert!(log.is_empty());
}

#[test]
fn csv_schema_inference_narrows() {
    let data = "case_id,activity,timestamp,n,x,flag,when,label\n\
                c1,A,2011-01-01T10:00:00Z,1,1.5,true,2011-05-01T00:00:00Z,abc\n\
                c1,B,2011-01-01T11:00:00Z,2,2,FALSE,2011-06-01T12:30:00+02:00,5\n";
    let log = parse_log(data.as_bytes(), LogFormat::Csv).unwrap();
    assert_eq!(log.attribute_schema["n"], AttributeType::Integer);
    assert_eq!(log.attribute_schema["x"], AttributeType::Real);
    assert_eq!(log.attribute_schema["flag"], AttributeType::Boolean);
    assert_eq!(log.attribute_schema["when"], AttributeType::Timestamp);
    assert_eq!(log.attribute_schema["label"], AttributeType::Text);
    assert_eq!(log.traces[0].events[1].attributes["x"], AttributeValue::Real(2.0));
}

#[test]
fn csv_malformed_timestamp_reports_line() {
    let data = "case_id,activity,timestamp\nc1,A,yesterday\n";
    let err = parse_log(data.as_bytes(), LogFormat::Csv).unwrap_err();
    assert!(matches!(err, Error::Parse { ref position, .. } if position == "line 2"), "{err}");
}

#[test]
fn csv_events_sorted_by_timestamp_stable() {
    let data = "case_id,activity,timestamp\n\
                c1,B,2011-01-01T12:00:00Z\n\
                c1,A,2011-01-01T10:00:00Z\n\
                c1,C,2011-01-01T12:00:00Z\n";
    let log = parse_log(data.as_bytes(), LogFormat::Csv).unwrap();
    let labels: Vec<&str> = log.traces[0].events.iter().map(|e| e.activity.as_str()).collect();
    // B and C tie, keep file order
    assert_eq!(labels, vec!["A", "B", "C"]);
}

#[test]
fn xes_trace_with_attribute_readable_at_event() {
    let data = r#"<?xml version="1.0"?>
        <log>
          <trace>
            <string key="concept:name" value="t1"/>
            <event>
              <string key="concept:name" value="M"/>
              <date key="time:timestamp" value="2011-01-01T10:00:00Z"/>
              <string key="sym" value="painA"/>
            </event>
            <event>
              <string key="concept:name" value="A"/>
              <date key="time:timestamp" value="2011-01-01T11:00:00Z"/>
            </event>
            <event>
              <string key="concept:name" value="C"/>
              <date key="time:timestamp" value="2011-01-01T12:00:00Z"/>
            </event>
            <event>
              <string key="concept:name" value="D"/>
              <date key="time:timestamp" value="2011-01-01T13:00:00Z"/>
              <string key="dia" value="d1"/>
            </event>
          </trace>
        </log>"#;
    let log = parse_log(data.as_bytes(), LogFormat::XesSubset).unwrap();
    assert_eq!(log.traces.len(), 1);
    let trace = &log.traces[0];
    assert_eq!(trace.case_id, "t1");
    let labels: Vec<&str> = trace.events.iter().map(|e| e.activity.as_str()).collect();
    assert_eq!(labels, vec!["M", "A", "C", "D"]);
    let snap = snapshot_at(trace, 4).unwrap();
    assert_eq!(snap.get("dia"), &text("d1"));
    assert_eq!(snap.get("sym"), &text("painA"));
}

#[test]
fn xes_trace_level_attributes_fold_at_position_zero() {
    let data = r#"<log><trace>
            <string key="concept:name" value="t1"/>
            <int key="Age" value="62"/>
            <event>
              <string key="concept:name" value="A"/>
              <date key="time:timestamp" value="2011-01-01T10:00:00Z"/>
            </event>
          </trace></log>"#;
    let log = parse_log(data.as_bytes(), LogFormat::XesSubset).unwrap();
    let snap = snapshot_at(&log.traces[0], 1).unwrap();
    assert_eq!(snap.get("Age"), &AttributeValue::Integer(62));
    assert_eq!(log.attribute_schema["Age"], AttributeType::Integer);
}

#[test]
fn xes_conflicting_declared_types_is_schema_error() {
    let data = r#"<log><trace>
            <string key="concept:name" value="t1"/>
            <event>
              <string key="concept:name" value="A"/>
              <date key="time:timestamp" value="2011-01-01T10:00:00Z"/>
              <int key="x" value="1"/>
            </event>
            <event>
              <string key="concept:name" value="B"/>
              <date key="time:timestamp" value="2011-01-01T11:00:00Z"/>
              <string key="x" value="one"/>
            </event>
          </trace></log>"#;
    let err = parse_log(data.as_bytes(), LogFormat::XesSubset).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
}

#[test]
fn xes_unparseable_value_demotes_column_to_text() {
    let data = r#"<log><trace>
            <string key="concept:name" value="t1"/>
            <event>
              <string key="concept:name" value="A"/>
              <date key="time:timestamp" value="2011-01-01T10:00:00Z"/>
              <int key="x" value="1"/>
            </event>
            <event>
              <string key="concept:name" value="B"/>
              <date key="time:timestamp" value="2011-01-01T11:00:00Z"/>
              <int key="x" value="not-a-number"/>
            </event>
          </trace></log>"#;
    let log = parse_log(data.as_bytes(), LogFormat::XesSubset).unwrap();
    assert_eq!(log.attribute_schema["x"], AttributeType::Text);
    assert_eq!(log.traces[0].events[0].attributes["x"], text("1"));
}

#[test]
fn xes_empty_input_is_empty_log() {
    let log = parse_log(&b""[..], LogFormat::XesSubset).unwrap();
    assert!(log.is_empty());
}

#[test]
fn snapshot_fig1_prefix() {
    // prefix <M,A,C,D>: sym written at M, dia and pre at D, treat never
    let trace = Trace::new(
        "t1",
        BTreeMap::new(),
        vec![
            event("M", 0, &[("sym", text("painA"))]),
            event("A", 1, &[]),
            event("C", 2, &[]),
            event("D", 3, &[("dia", text("d1")), ("pre", text("p1"))]),
        ],
    );
    let snap = snapshot_at(&trace, 4).unwrap();
    assert_eq!(snap.get("sym"), &text("painA"));
    assert_eq!(snap.get("dia"), &text("d1"));
    assert_eq!(snap.get("pre"), &text("p1"));
    assert_eq!(snap.get("treat"), &AttributeValue::Missing);
}

#[test]
fn snapshot_position_one_no_attributes() {
    let trace = Trace::new("t", BTreeMap::new(), vec![event("A", 0, &[])]);
    let snap = snapshot_at(&trace, 1).unwrap();
    assert_eq!(snap.assigned().count(), 0);
    assert_eq!(snap.get("anything"), &AttributeValue::Missing);
}

#[test]
fn snapshot_last_write_wins() {
    let trace = Trace::new(
        "t",
        BTreeMap::new(),
        vec![
            event("A", 0, &[]),
            event("B", 1, &[("x", text("old"))]),
            event("C", 2, &[("x", text("new"))]),
        ],
    );
    assert_eq!(snapshot_at(&trace, 2).unwrap().get("x"), &text("old"));
    assert_eq!(snapshot_at(&trace, 3).unwrap().get("x"), &text("new"));
}

#[test]
fn snapshot_out_of_range() {
    let trace = Trace::new("t", BTreeMap::new(), vec![event("A", 0, &[])]);
    assert!(matches!(snapshot_at(&trace, 0), Err(Error::IndexOutOfRange { .. })));
    assert!(matches!(snapshot_at(&trace, 2), Err(Error::IndexOutOfRange { .. })));
}

fn log_of(traces: Vec<Trace>) -> EventLog {
    EventLog {
        traces,
        attribute_schema: BTreeMap::new(),
    }
}

#[test]
fn split_80_20() {
    let traces: Vec<Trace> = (0..10)
        .map(|i| Trace::new(format!("c{i}"), BTreeMap::new(), vec![event("A", 100 - i, &[])]))
        .collect();
    let log = log_of(traces);
    let (train, test) = temporal_split(&log, 0.8).unwrap();
    assert_eq!(train.traces.len(), 8);
    assert_eq!(test.traces.len(), 2);
    let max_train = train.traces.iter().map(|t| t.first_timestamp().unwrap()).max().unwrap();
    let min_test = test.traces.iter().map(|t| t.first_timestamp().unwrap()).min().unwrap();
    assert!(max_train <= min_test);
}

#[test]
fn split_single_trace_rounds_up() {
    let log = log_of(vec![Trace::new("c", BTreeMap::new(), vec![event("A", 0, &[])])]);
    let (train, test) = temporal_split(&log, 0.8).unwrap();
    assert_eq!(train.traces.len(), 1);
    assert_eq!(test.traces.len(), 0);
}

#[test]
fn split_ties_stay_in_log_order() {
    let traces: Vec<Trace> = (0..5)
        .map(|i| Trace::new(format!("c{i}"), BTreeMap::new(), vec![event("A", 7, &[])]))
        .collect();
    let log = log_of(traces);
    let (train, test) = temporal_split(&log, 0.6).unwrap();
    let ids: Vec<&str> = train
        .traces
        .iter()
        .chain(test.traces.iter())
        .map(|t| t.case_id.as_str())
        .collect();
    assert_eq!(ids, vec!["c0", "c1", "c2", "c3", "c4"]);
}

#[test]
fn split_partitions_log() {
    let traces: Vec<Trace> = (0..7)
        .map(|i| Trace::new(format!("c{i}"), BTreeMap::new(), vec![event("A", i, &[])]))
        .collect();
    let log = log_of(traces);
    let (train, test) = temporal_split(&log, 0.5).unwrap();
    let mut ids: Vec<String> = train
        .traces
        .iter()
        .chain(test.traces.iter())
        .map(|t| t.case_id.clone())
        .collect();
    ids.sort();
    let mut expected: Vec<String> = (0..7).map(|i| format!("c{i}")).collect();
    expected.sort();
    assert_eq!(ids, expected);
}

// Snapshot monotonicity: once assigned, an attribute never reverts to missing.
proptest! {
    #[test]
    fn snapshot_monotone(assignments in proptest::collection::vec(
        (0u8..4, proptest::option::of(0u8..3)), 1..12
    )) {
        let events: Vec<Event> = assignments
            .iter()
            .enumerate()
            .map(|(i, (act, attr))| {
                let attrs: Vec<(&str, AttributeValue)> = match attr {
                    Some(a) => vec![(["x", "y", "z"][*a as usize], text(&format!("v{i}")))],
                    None => vec![],
                };
                event(["A", "B", "C", "D"][*act as usize], i as i64, &attrs)
            })
            .collect();
        let trace = Trace::new("t", BTreeMap::new(), events);
        for p in 1..trace.len() {
            let before = snapshot_at(&trace, p).unwrap();
            let after = snapshot_at(&trace, p + 1).unwrap();
            for (name, _) in before.assigned() {
                prop_assert!(!after.get(name).is_missing());
            }
        }
    }
}

// parse . serialize is identity on the CSV format.
proptest! {
    #[test]
    fn csv_round_trip(rows in proptest::collection::vec(
        (0u8..3, 0u8..4, 0i64..1000, proptest::option::of(-50i64..50), proptest::option::of(any::<bool>())),
        0..20
    )) {
        let mut csv = String::from("case_id,activity,timestamp,num,flag\n");
        for (case, act, t, num, flag) in &rows {
            let num = num.map(|n| n.to_string()).unwrap_or_default();
            let flag = flag.map(|b| b.to_string()).unwrap_or_default();
            csv.push_str(&format!(
                "c{case},{},{},{num},{flag}\n",
                ["A", "B", "C", "D"][*act as usize],
                ts(*t).to_rfc3339(),
            ));
        }
        let l1 = parse_log(csv.as_bytes(), LogFormat::Csv).unwrap();
        let s1 = write_csv(&l1).unwrap();
        let l2 = parse_log(s1.as_bytes(), LogFormat::Csv).unwrap();
        prop_assert_eq!(l1, l2);
    }
}
