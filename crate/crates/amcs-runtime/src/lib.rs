//! Runtime engine for asynchronous multi-context systems.
//!
//! A system is a set of named contexts, each with a behavior (what it
//! computes), a packing program managing its input buffer, output rules
//! (what it shares, with whom, under which beliefs), plus scripted sensors
//! and output streams. The engine advances a virtual clock over a
//! discrete-event queue; everything is deterministic, and every run yields
//! a structured trace that serializes to byte-stable JSON Lines.
//!
//! Lifecycle of one context: data sets arrive in its buffer; its trigger
//! schedules a packing evaluation; the chosen answer set's directives are
//! applied and any assembled packages start a computation; the behavior's
//! belief sets are emitted one latency step apart, each one relativised
//! through the output rules per stakeholder; an end-of-computation
//! notification closes the computation and the context goes idle.

pub mod behavior;
pub mod engine;
pub mod relout;
pub mod trace;
pub mod types;

pub use behavior::{Behavior, ScriptRow};
pub use engine::{Engine, EngineBuilder, EngineError};
pub use relout::relout;
pub use trace::{render_jsonl, TraceKind, TraceLine};
pub use types::{
    BeliefSet, ContextSpec, DataSet, OutputRule, ReceiverTag, SensorSpec, SpecPatch, Trigger,
};
