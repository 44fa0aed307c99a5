//! Trace-event (Chrome/Perfetto) and CSV renderings of a timeline.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Timeline;
use crate::model::CommandKind;

/// A complete ("X" phase) trace event. Timestamps are integer microseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub name: String,
    pub cat: String,
    pub ph: String,
    pub ts: u64,
    pub dur: u64,
    pub pid: u32,
    pub tid: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    #[serde(rename = "traceEvents")]
    pub trace_events: Vec<TraceEvent>,
    #[serde(rename = "displayTimeUnit")]
    pub display_time_unit: String,
}

fn lane_id(kind: CommandKind) -> u32 {
    match kind {
        CommandKind::HtD => 1,
        CommandKind::K => 2,
        CommandKind::DtH => 3,
    }
}

fn to_micros(ms: f64) -> u64 {
    (ms * 1000.0).round().max(0.0) as u64
}

/// One event per command, lane (`tid`) = command kind.
pub fn export_trace(timeline: &Timeline) -> TraceDocument {
    let mut commands: Vec<_> = timeline.commands().iter().collect();
    commands.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms).then(a.kind.cmp(&b.kind)));
    let trace_events = commands
        .into_iter()
        .map(|c| {
            let ts = to_micros(c.start_ms);
            TraceEvent {
                name: format!("{} {}", c.kind, c.task_id),
                cat: c.kind.as_str().to_string(),
                ph: "X".to_string(),
                ts,
                dur: to_micros(c.end_ms).saturating_sub(ts),
                pid: 1,
                tid: lane_id(c.kind),
            }
        })
        .collect();
    TraceDocument {
        trace_events,
        display_time_unit: "ms".to_string(),
    }
}

/// `task_id,kind,start_ms,end_ms` rows sorted by start time.
pub fn export_csv(timeline: &Timeline) -> String {
    let mut commands: Vec<_> = timeline.commands().iter().collect();
    commands.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms).then(a.kind.cmp(&b.kind)));
    let mut out = String::from("task_id,kind,start_ms,end_ms\n");
    for c in commands {
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.3}",
            c.task_id, c.kind, c.start_ms, c.end_ms
        );
    }
    out
}
