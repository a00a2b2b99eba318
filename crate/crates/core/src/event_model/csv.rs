//! CSV log format: header `case_id,activity,timestamp,<attr1>,...`, one row
//! per event, RFC-3339 timestamps, empty cell = no assignment.

use std::collections::BTreeMap;
use std::io::Read;

use super::{coerce, infer_column_type, parse_timestamp, AttributeType, Event, EventLog, Trace};
use crate::error::{Error, Result};

struct RawEvent {
    case_id: String,
    activity: String,
    timestamp: chrono::DateTime<chrono::Utc>,
    // raw attribute cells, aligned with the header's attribute columns
    cells: Vec<Option<String>>,
}

pub(super) fn parse_csv(source: impl Read) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| Error::parse("header", e.to_string()))?
        .clone();
    // An entirely empty input has no header row and is a valid empty log.
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(EventLog::empty());
    }

    let fixed = ["case_id", "activity", "timestamp"];
    if headers.len() < fixed.len() || &headers[0] != fixed[0] || &headers[1] != fixed[1] || &headers[2] != fixed[2]
    {
        return Err(Error::parse(
            "header",
            format!("expected columns case_id,activity,timestamp,... got {headers:?}"),
        ));
    }
    let attr_names: Vec<String> = headers.iter().skip(3).map(|s| s.to_string()).collect();

    let mut raw_events: Vec<RawEvent> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        let activity = record[1].to_string();
        if activity.is_empty() {
            return Err(Error::parse(format!("line {line}"), "empty activity label"));
        }
        let timestamp = parse_timestamp(&record[2]).ok_or_else(|| {
            Error::parse(
                format!("line {line}"),
                format!("invalid RFC-3339 timestamp {:?}", &record[2]),
            )
        })?;
        let cells = (3..record.len())
            .map(|i| {
                let cell = &record[i];
                (!cell.is_empty()).then(|| cell.to_string())
            })
            .collect();
        raw_events.push(RawEvent {
            case_id: record[0].to_string(),
            activity,
            timestamp,
            cells,
        });
    }

    // Narrowest type consistent with every observed value of each column.
    let schema: BTreeMap<String, AttributeType> = attr_names
        .iter()
        .enumerate()
        .map(|(col, name)| {
            let ty = infer_column_type(
                raw_events
                    .iter()
                    .filter_map(|e| e.cells.get(col).and_then(|c| c.as_deref())),
            );
            (name.clone(), ty)
        })
        .collect();

    // Group into traces by case id, in order of first appearance.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    for raw in raw_events {
        let mut attributes = BTreeMap::new();
        for (col, cell) in raw.cells.iter().enumerate() {
            if let Some(cell) = cell {
                let name = &attr_names[col];
                attributes.insert(name.clone(), coerce(cell, schema[name]));
            }
        }
        let event = Event {
            activity: raw.activity,
            timestamp: raw.timestamp,
            attributes,
        };
        if !grouped.contains_key(&raw.case_id) {
            order.push(raw.case_id.clone());
        }
        grouped.entry(raw.case_id).or_default().push(event);
    }

    let traces = order
        .into_iter()
        .map(|case_id| {
            let events = grouped.remove(&case_id).unwrap();
            Trace::new(case_id, BTreeMap::new(), events)
        })
        .collect();

    Ok(EventLog {
        traces,
        attribute_schema: schema,
    })
}

/// Serializes a log to the CSV format. Trace-level attributes (possible in
/// XES-origin logs) are written onto the first event's row where that event
/// leaves the cell unassigned; logs parsed from CSV round-trip exactly.
pub fn write_csv(log: &EventLog) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let attr_names: Vec<&String> = log.attribute_schema.keys().collect();
    let mut header = vec!["case_id", "activity", "timestamp"];
    header.extend(attr_names.iter().map(|s| s.as_str()));
    writer
        .write_record(&header)
        .map_err(|e| Error::parse("header", e.to_string()))?;

    for trace in &log.traces {
        for (idx, event) in trace.events.iter().enumerate() {
            let mut row = vec![
                trace.case_id.clone(),
                event.activity.clone(),
                event.timestamp.to_rfc3339(),
            ];
            for name in &attr_names {
                let mut value = event.attributes.get(*name);
                if idx == 0 && value.is_none() {
                    value = trace.attributes.get(*name);
                }
                row.push(value.filter(|v| !v.is_missing()).map(|v| v.to_string()).unwrap_or_default());
            }
            writer
                .write_record(&row)
                .map_err(|e| Error::parse(trace.case_id.clone(), e.to_string()))?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::parse("csv", e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::parse("csv", e.to_string()))
}
