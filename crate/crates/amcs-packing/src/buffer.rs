//! Input-buffer state: data-set records, computation records, ingestion.
//!
//! A `BufferState` is an immutable snapshot; [`BufferState::ingest`] and
//! the directive application in [`crate::apply`] return new states. Records
//! keep a globally increasing arrival index, and iteration order is always
//! ascending in it.

use std::collections::{BTreeMap, BTreeSet};

use asp_engine::Term;

use crate::error::PackError;

/// One data set sitting on a context's input buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSetRecord {
    /// Ground identifier term, unique for the engine's lifetime.
    pub id: Term,
    /// Name of the producing context or sensor.
    pub source: String,
    /// The computation this data set belongs to; sensor data sets have none.
    pub computation: Option<Term>,
    /// The pieces of information carried by the data set.
    pub info: BTreeSet<Term>,
    pub tags: BTreeSet<Term>,
    pub arrival_index: u64,
}

/// What the buffer knows about one computation of a neighbouring context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationRecord {
    pub id: Term,
    pub source: String,
    pub ended: bool,
    pub tags: BTreeSet<Term>,
    /// Once set, data sets of this computation are dropped on arrival.
    pub ignored: bool,
}

/// Immutable snapshot of a context's input buffer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BufferState {
    /// Records in ascending arrival order.
    pub records: Vec<DataSetRecord>,
    /// Computation table keyed by identifier.
    pub computations: BTreeMap<Term, ComputationRecord>,
    /// Virtual clock in milliseconds, stamped by the caller.
    pub clock: u64,
    /// Next arrival index to hand out in this buffer.
    pub next_arrival: u64,
    /// When set, encoding also emits arrived(id, index) facts.
    pub emit_arrival: bool,
}

/// Generator for fresh data-set and computation identifiers.
///
/// Both kinds draw from one monotone counter, so every generated id
/// (`ds(k)`, `comp(k)`) is unique engine-wide and, within each kind, term
/// order coincides with creation order — the property packing programs
/// rely on when they select "the latest" data set with #max.
#[derive(Debug, Clone, Default)]
pub struct IdGen {
    next: i64,
}

impl IdGen {
    pub fn fresh_ds(&mut self) -> Term {
        let k = self.next;
        self.next += 1;
        Term::func("ds", vec![Term::Int(k)])
    }

    pub fn fresh_comp(&mut self) -> Term {
        let k = self.next;
        self.next += 1;
        Term::func("comp", vec![Term::Int(k)])
    }
}

/// One arriving data set, before it becomes a record.
///
/// `info` may carry reserved sender-tag terms: every `ds_tag(t)` is
/// stripped and attached to the new record as tag `t`, every `comp_tag(t)`
/// to the owning computation. `engine_tags` carries everything the
/// receiving side adds (receiver hooks and engine-provided tags such as
/// creation time), already merged by the caller.
#[derive(Debug, Clone, Default)]
pub struct Ingest {
    pub source: String,
    pub computation: Option<Term>,
    pub info: BTreeSet<Term>,
    pub engine_tags: BTreeSet<Term>,
    /// Scenario-declared identifier; `None` draws a fresh `ds(k)`.
    pub explicit_id: Option<Term>,
}

/// Result of an ingestion: the new buffer plus the appended record id
/// (`None` when the input was an end-of-computation marker or was dropped
/// because its computation is ignored).
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub buffer: BufferState,
    pub appended: Option<Term>,
}

fn is_eoc(t: &Term) -> bool {
    matches!(t, Term::Const(c) if c == "eoc")
}

/// Splits reserved tag carriers out of an info set.
fn split_sender_tags(info: &BTreeSet<Term>) -> (BTreeSet<Term>, BTreeSet<Term>, BTreeSet<Term>) {
    let mut plain = BTreeSet::new();
    let mut ds_tags = BTreeSet::new();
    let mut comp_tags = BTreeSet::new();
    for t in info {
        match t {
            Term::Func(name, args) if name == "ds_tag" && args.len() == 1 => {
                ds_tags.insert(args[0].clone());
            }
            Term::Func(name, args) if name == "comp_tag" && args.len() == 1 => {
                comp_tags.insert(args[0].clone());
            }
            other => {
                plain.insert(other.clone());
            }
        }
    }
    (plain, ds_tags, comp_tags)
}

impl BufferState {
    /// Appends one arriving data set (or processes an `eoc` marker).
    ///
    /// An info set of exactly `{eoc}` marks the computation as ended
    /// without appending a record; mixing `eoc` with other information is
    /// rejected. Arrivals for an ignored computation are dropped silently.
    pub fn ingest(&self, input: Ingest, ids: &mut IdGen) -> Result<IngestOutcome, PackError> {
        let has_eoc = input.info.iter().any(is_eoc);
        if has_eoc && input.info.len() > 1 {
            return Err(PackError::MixedEoc {
                computation: input
                    .computation
                    .as_ref()
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| input.source.clone()),
            });
        }
        let mut next = self.clone();
        if has_eoc {
            // End-of-computation marker: no record, just bookkeeping.
            if let Some(c) = &input.computation {
                next.touch_computation(c, &input.source).ended = true;
            }
            return Ok(IngestOutcome {
                buffer: next,
                appended: None,
            });
        }
        if let Some(c) = &input.computation {
            if self
                .computations
                .get(c)
                .is_some_and(|record| record.ignored)
            {
                return Ok(IngestOutcome {
                    buffer: next,
                    appended: None,
                });
            }
        }
        let (info, ds_tags, comp_tags) = split_sender_tags(&input.info);
        let id = input.explicit_id.unwrap_or_else(|| ids.fresh_ds());
        let mut tags = input.engine_tags;
        tags.extend(ds_tags);
        if let Some(c) = &input.computation {
            let comp = next.touch_computation(c, &input.source);
            comp.tags.extend(comp_tags);
        }
        let arrival_index = next.next_arrival;
        next.next_arrival += 1;
        next.records.push(DataSetRecord {
            id: id.clone(),
            source: input.source,
            computation: input.computation,
            info,
            tags,
            arrival_index,
        });
        Ok(IngestOutcome {
            buffer: next,
            appended: Some(id),
        })
    }

    fn touch_computation(&mut self, id: &Term, source: &str) -> &mut ComputationRecord {
        self.computations
            .entry(id.clone())
            .or_insert_with(|| ComputationRecord {
                id: id.clone(),
                source: source.to_string(),
                ended: false,
                tags: BTreeSet::new(),
                ignored: false,
            })
    }

    pub fn record(&self, id: &Term) -> Option<&DataSetRecord> {
        self.records.iter().find(|r| &r.id == id)
    }

    pub fn has_data_set(&self, id: &Term) -> bool {
        self.record(id).is_some()
    }

    pub fn has_computation(&self, id: &Term) -> bool {
        self.computations.contains_key(id)
    }
}
