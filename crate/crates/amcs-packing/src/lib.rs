//! Declarative input-buffer management.
//!
//! A context's input buffer is a sequence of source-tagged data sets plus a
//! table of the computations that produced them. This crate encodes such a
//! buffer as input facts ([`encode_facts`]), evaluates the buffer's packing
//! program against them ([`evaluate`]), decodes the directive atoms of the
//! chosen answer set ([`decode`]), and applies them ([`apply`]): packages
//! are assembled and handed onward, data sets removed, tags edited, and
//! computations ignored. Each step is a pure function; buffers are
//! immutable snapshots.

pub mod apply;
pub mod buffer;
pub mod directive;
pub mod encode;
pub mod error;
pub mod evaluate;

pub use apply::{apply, ApplyOutcome, AssembledPackage};
pub use buffer::{BufferState, ComputationRecord, DataSetRecord, IdGen, Ingest, IngestOutcome};
pub use directive::{decode, DirectiveSet, Package};
pub use encode::{encode_facts, render_facts};
pub use error::{ApplyWarning, DecodeError, DecodeWarning, PackError};
pub use evaluate::{evaluate, EvalMode};
