//! XES-subset reader: `<trace>` and `<event>` elements with typed
//! `<string|int|float|boolean|date key=... value=.../>` children.
//!
//! `concept:name` supplies the case id (trace level) and the activity label
//! (event level); `time:timestamp` supplies the event instant. Everything
//! else becomes a data attribute. Log-level metadata, extensions, globals
//! and nested attributes are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufReader, Read};

use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{parse_timestamp, AttributeType, AttributeValue, Event, EventLog, Trace};
use crate::error::{Error, Result};

const CONCEPT_NAME: &str = "concept:name";
const TIME_TIMESTAMP: &str = "time:timestamp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XesTag {
    String,
    Int,
    Float,
    Boolean,
    Date,
}

impl XesTag {
    fn from_name(name: &[u8]) -> Option<Self> {
        match name {
            b"string" => Some(XesTag::String),
            b"int" => Some(XesTag::Int),
            b"float" => Some(XesTag::Float),
            b"boolean" => Some(XesTag::Boolean),
            b"date" => Some(XesTag::Date),
            _ => None,
        }
    }

    fn declared_type(self) -> AttributeType {
        match self {
            XesTag::String => AttributeType::Text,
            XesTag::Int => AttributeType::Integer,
            XesTag::Float => AttributeType::Real,
            XesTag::Boolean => AttributeType::Boolean,
            XesTag::Date => AttributeType::Timestamp,
        }
    }

    fn parse(self, raw: &str) -> Option<AttributeValue> {
        match self {
            XesTag::String => Some(AttributeValue::Text(raw.to_string())),
            XesTag::Int => raw.parse::<i64>().ok().map(AttributeValue::Integer),
            XesTag::Float => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(AttributeValue::Real),
            XesTag::Boolean => super::parse_boolean(raw).map(AttributeValue::Boolean),
            XesTag::Date => parse_timestamp(raw).map(AttributeValue::Timestamp),
        }
    }
}

#[derive(Debug)]
struct RawAttr {
    key: String,
    tag: XesTag,
    raw: String,
}

#[derive(Debug, Default)]
struct RawEvent {
    attrs: Vec<RawAttr>,
}

#[derive(Debug, Default)]
struct RawTrace {
    attrs: Vec<RawAttr>,
    events: Vec<RawEvent>,
}

pub(super) fn parse_xes(source: impl Read) -> Result<EventLog> {
    let mut reader = Reader::from_reader(BufReader::new(source));
    reader.config_mut().trim_text(true);

    let mut traces: Vec<RawTrace> = Vec::new();
    let mut current_trace: Option<RawTrace> = None;
    let mut in_event = false;
    // Nesting depth of attribute elements; children of attributes are ignored.
    let mut attr_depth = 0usize;
    let mut buf = Vec::new();

    loop {
        let parsed = reader.read_event_into(&mut buf);
        let at = reader.buffer_position();
        match parsed {
            Ok(XmlEvent::Start(ref element)) => {
                if handle_element(element, &mut current_trace, &mut in_event, attr_depth, at)? {
                    attr_depth += 1;
                }
            }
            Ok(XmlEvent::Empty(ref element)) => {
                handle_element(element, &mut current_trace, &mut in_event, attr_depth, at)?;
            }
            Ok(XmlEvent::End(ref element)) => match element.local_name().as_ref() {
                _ if attr_depth > 0 => attr_depth -= 1,
                b"event" => in_event = false,
                b"trace" => {
                    if let Some(trace) = current_trace.take() {
                        traces.push(trace);
                    }
                }
                _ => {}
            },
            Ok(XmlEvent::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(Error::parse(format!("byte {at}"), e.to_string())),
        }
        buf.clear();
    }

    build_log(traces)
}

/// Routes one start/empty element. Returns true when the element is a typed
/// attribute (so nested children can be skipped by depth counting).
fn handle_element(
    element: &BytesStart<'_>,
    current_trace: &mut Option<RawTrace>,
    in_event: &mut bool,
    attr_depth: usize,
    at: u64,
) -> Result<bool> {
    if attr_depth > 0 {
        // Nested attribute content is out of scope; count and skip.
        return Ok(true);
    }
    let name = element.local_name();
    match name.as_ref() {
        b"trace" => {
            *current_trace = Some(RawTrace::default());
            Ok(false)
        }
        b"event" => match current_trace {
            Some(trace) => {
                trace.events.push(RawEvent::default());
                *in_event = true;
                Ok(false)
            }
            None => Err(Error::parse(format!("byte {at}"), "<event> outside <trace>")),
        },
        other => {
            let Some(tag) = XesTag::from_name(other) else {
                return Ok(false); // unknown element, e.g. log metadata
            };
            let mut key = None;
            let mut value = None;
            for attr in element.attributes() {
                let attr = attr.map_err(|e| Error::parse(format!("byte {at}"), e.to_string()))?;
                let unescaped = || -> Result<String> {
                    attr.unescape_value()
                        .map(|v| v.into_owned())
                        .map_err(|e| Error::parse(format!("byte {at}"), e.to_string()))
                };
                match attr.key.local_name().as_ref() {
                    b"key" => key = Some(unescaped()?),
                    b"value" => value = Some(unescaped()?),
                    _ => {}
                }
            }
            let (Some(key), Some(raw)) = (key, value) else {
                return Err(Error::parse(
                    format!("byte {at}"),
                    "attribute element without key/value",
                ));
            };
            let raw_attr = RawAttr { key, tag, raw };
            match current_trace {
                Some(trace) if *in_event => trace
                    .events
                    .last_mut()
                    .expect("in_event implies an event")
                    .attrs
                    .push(raw_attr),
                Some(trace) => trace.attrs.push(raw_attr),
                None => {} // log-level attribute, ignored
            }
            Ok(true)
        }
    }
}

fn build_log(raw_traces: Vec<RawTrace>) -> Result<EventLog> {
    // Collect declared types and spot values that fail their declared type;
    // such columns are demoted to text, conflicting declarations are errors.
    let mut declared: BTreeMap<String, XesTag> = BTreeMap::new();
    let mut demoted: BTreeSet<String> = BTreeSet::new();
    {
        let mut note = |attr: &RawAttr| -> Result<()> {
            if attr.key == CONCEPT_NAME || attr.key == TIME_TIMESTAMP {
                return Ok(());
            }
            match declared.get(&attr.key) {
                Some(tag) if *tag != attr.tag => {
                    return Err(Error::Schema(format!(
                        "attribute {:?} declared as both {:?} and {:?}",
                        attr.key,
                        tag.declared_type(),
                        attr.tag.declared_type()
                    )))
                }
                Some(_) => {}
                None => {
                    declared.insert(attr.key.clone(), attr.tag);
                }
            }
            if attr.tag.parse(&attr.raw).is_none() {
                demoted.insert(attr.key.clone());
            }
            Ok(())
        };
        for trace in &raw_traces {
            for attr in &trace.attrs {
                note(attr)?;
            }
            for event in &trace.events {
                for attr in &event.attrs {
                    note(attr)?;
                }
            }
        }
    }

    let schema: BTreeMap<String, AttributeType> = declared
        .iter()
        .map(|(key, tag)| {
            let ty = if demoted.contains(key) {
                AttributeType::Text
            } else {
                tag.declared_type()
            };
            (key.clone(), ty)
        })
        .collect();

    let convert = |attr: &RawAttr| -> AttributeValue {
        if demoted.contains(&attr.key) {
            AttributeValue::Text(attr.raw.clone())
        } else {
            attr.tag.parse(&attr.raw).expect("non-demoted value parses")
        }
    };

    let mut traces = Vec::with_capacity(raw_traces.len());
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for (trace_idx, raw) in raw_traces.iter().enumerate() {
        let mut case_id = None;
        let mut trace_attrs = BTreeMap::new();
        for attr in &raw.attrs {
            if attr.key == CONCEPT_NAME {
                case_id = Some(attr.raw.clone());
            } else if attr.key != TIME_TIMESTAMP {
                trace_attrs.insert(attr.key.clone(), convert(attr));
            }
        }
        let case_id = case_id.unwrap_or_else(|| format!("trace-{}", trace_idx + 1));
        if !seen_ids.insert(case_id.clone()) {
            return Err(Error::Schema(format!("duplicate case id {case_id:?}")));
        }

        let mut events = Vec::with_capacity(raw.events.len());
        for (event_idx, raw_event) in raw.events.iter().enumerate() {
            let at = || format!("trace {case_id:?} event {}", event_idx + 1);
            let mut activity = None;
            let mut timestamp = None;
            let mut attributes = BTreeMap::new();
            for attr in &raw_event.attrs {
                if attr.key == CONCEPT_NAME {
                    activity = Some(attr.raw.clone());
                } else if attr.key == TIME_TIMESTAMP {
                    timestamp = parse_timestamp(&attr.raw);
                    if timestamp.is_none() {
                        return Err(Error::parse(at(), format!("invalid timestamp {:?}", attr.raw)));
                    }
                } else {
                    attributes.insert(attr.key.clone(), convert(attr));
                }
            }
            let activity = activity
                .filter(|a| !a.is_empty())
                .ok_or_else(|| Error::parse(at(), "event without concept:name"))?;
            let timestamp =
                timestamp.ok_or_else(|| Error::parse(at(), "event without time:timestamp"))?;
            events.push(Event {
                activity,
                timestamp,
                attributes,
            });
        }
        traces.push(Trace::new(case_id, trace_attrs, events));
    }

    Ok(EventLog {
        traces,
        attribute_schema: schema,
    })
}
