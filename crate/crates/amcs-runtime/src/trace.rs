//! Structured execution trace.
//!
//! Every record carries the virtual time `t` it happened at and a strictly
//! increasing sequence number `seq`, so the serialized trace is totally
//! ordered by (t, seq). Records serialize to one JSON object per line with
//! a fixed field order (t, seq, kind, then the kind's payload), which makes
//! traces byte-comparable across runs.

use serde::{Deserialize, Serialize};

/// One trace record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub t: u64,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: TraceKind,
}

/// The record kinds and their payloads. Terms and belief/info sets are
/// rendered in canonical text form; sets are sorted by term order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    /// First line of every trace.
    Header { scenario: String },
    /// A data set became a record in a context's buffer.
    Append {
        ctx: String,
        id: String,
        from: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        computation: Option<String>,
        info: Vec<String>,
    },
    /// A packing evaluation ran. `answer` is false when the program was
    /// inconsistent for this buffer (nothing happened).
    Eval {
        ctx: String,
        answer: bool,
        packages: u64,
    },
    /// One package assembled by an evaluation.
    Package {
        ctx: String,
        schema: String,
        members: Vec<String>,
    },
    /// A computation started over a batch of packages.
    ComputeStart {
        ctx: String,
        computation: String,
        packages: u64,
    },
    /// One belief set produced during a computation.
    Belief {
        ctx: String,
        computation: String,
        beliefs: Vec<String>,
    },
    /// A data set left a context towards a stakeholder.
    Output {
        ctx: String,
        to: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        computation: Option<String>,
        info: Vec<String>,
    },
    /// A computation finished; the context is idle again.
    Eoc { ctx: String, computation: String },
    /// A decode or apply finding (conflicting or dangling directives,
    /// targets already gone). The evaluation continues.
    DirectiveWarning { ctx: String, message: String },
}

/// Renders records as JSON Lines (one object per line, trailing newline).
pub fn render_jsonl(lines: &[TraceLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l).expect("trace records always serialize"));
        out.push('\n');
    }
    out
}
