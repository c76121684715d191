//! JSON-lines event traces.
//!
//! One event per line:
//!
//! ```text
//! {"t":0,"op":"insert","id":"a","kind":"rect2d","w":"3/5","h":"3/10"}
//! {"t":5,"op":"depart","id":"a"}
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::model::{Event, EventOp, ItemId, ItemKind, ItemSpec};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<Event>,
}

#[derive(Serialize)]
struct InsertLine<'a> {
    t: u64,
    op: &'static str,
    id: &'a ItemId,
    #[serde(flatten)]
    kind: &'a ItemKind,
}

#[derive(Serialize, Deserialize)]
struct Header {
    t: u64,
    op: String,
    id: ItemId,
}

impl Trace {
    pub fn new(events: Vec<Event>) -> Self {
        Trace { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Parses and validates a JSON-lines trace. Blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Trace> {
        let mut events = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            events.push(parse_event(line).map_err(|e| match e {
                PackError::Parse(msg) => PackError::Parse(format!("line {}: {msg}", lineno + 1)),
                other => other,
            })?);
        }
        let trace = Trace { events };
        trace.validate()?;
        Ok(trace)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event_to_json(event));
            out.push('\n');
        }
        out
    }

    /// Checks the online-instance rules: strictly increasing times, valid
    /// items, inserts only of ids that are not live, departs only of live ids.
    pub fn validate(&self) -> Result<()> {
        let mut live: BTreeSet<&ItemId> = BTreeSet::new();
        let mut last_t: Option<u64> = None;
        for event in &self.events {
            let t = event.t;
            if let Some(prev) = last_t {
                if t <= prev {
                    return Err(PackError::Trace {
                        t,
                        reason: format!("time does not increase (previous {prev})"),
                    });
                }
            }
            last_t = Some(t);
            match &event.op {
                EventOp::Insert(item) => {
                    item.validate()?;
                    if !live.insert(&item.id) {
                        return Err(PackError::Trace {
                            t,
                            reason: format!("{} inserted while live", item.id),
                        });
                    }
                }
                EventOp::Depart(id) => {
                    if !live.remove(id) {
                        return Err(PackError::Trace {
                            t,
                            reason: format!("{id} departs but is not live"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Events with `t <= at`.
    pub fn prefix(&self, at: u64) -> Trace {
        Trace {
            events: self.events.iter().take_while(|e| e.t <= at).cloned().collect(),
        }
    }

    /// Items live after the whole trace, in insertion order.
    pub fn live_items(&self) -> Vec<ItemSpec> {
        let mut live: Vec<ItemSpec> = Vec::new();
        for event in &self.events {
            match &event.op {
                EventOp::Insert(item) => live.push(item.clone()),
                EventOp::Depart(id) => live.retain(|i| &i.id != id),
            }
        }
        live
    }
}

pub fn event_to_json(event: &Event) -> String {
    let json = match &event.op {
        EventOp::Insert(item) => serde_json::to_string(&InsertLine {
            t: event.t,
            op: "insert",
            id: &item.id,
            kind: &item.kind,
        }),
        EventOp::Depart(id) => serde_json::to_string(&Header {
            t: event.t,
            op: "depart".into(),
            id: id.clone(),
        }),
    };
    json.expect("event serialization is infallible")
}

pub fn parse_event(line: &str) -> Result<Event> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| PackError::Parse(e.to_string()))?;
    let header: Header =
        serde_json::from_value(value.clone()).map_err(|e| PackError::Parse(e.to_string()))?;
    let op = match header.op.as_str() {
        "insert" => {
            let item: ItemSpec =
                serde_json::from_value(value).map_err(|e| PackError::Parse(e.to_string()))?;
            EventOp::Insert(item)
        }
        "depart" => EventOp::Depart(header.id),
        other => return Err(PackError::Parse(format!("unknown op {other:?}"))),
    };
    Ok(Event { t: header.t, op })
}
