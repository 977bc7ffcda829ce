//! Encoding a buffer snapshot as input facts for the packing program.

use std::collections::BTreeSet;

use asp_engine::{Atom, Term};

use crate::buffer::BufferState;

/// Emits the input-atom view of a buffer: availability, computation
/// membership, sources of data sets and computations, ended computations,
/// all tags, and the current clock (plus optional arrival indices).
pub fn encode_facts(buffer: &BufferState) -> BTreeSet<Atom> {
    let mut facts = BTreeSet::new();
    for r in &buffer.records {
        facts.insert(Atom::new("ds_avail", vec![r.id.clone()]));
        facts.insert(Atom::new(
            "source",
            vec![r.id.clone(), Term::Const(r.source.clone())],
        ));
        if let Some(c) = &r.computation {
            facts.insert(Atom::new("ds_comp", vec![r.id.clone(), c.clone()]));
        }
        for t in &r.tags {
            facts.insert(Atom::new("tag", vec![r.id.clone(), t.clone()]));
        }
        if buffer.emit_arrival {
            facts.insert(Atom::new(
                "arrived",
                vec![r.id.clone(), Term::Int(r.arrival_index as i64)],
            ));
        }
    }
    for (id, c) in &buffer.computations {
        facts.insert(Atom::new(
            "source",
            vec![id.clone(), Term::Const(c.source.clone())],
        ));
        if c.ended {
            facts.insert(Atom::new("eoc", vec![id.clone()]));
        }
        for t in &c.tags {
            facts.insert(Atom::new("tag", vec![id.clone(), t.clone()]));
        }
    }
    facts.insert(Atom::new("time", vec![Term::Int(buffer.clock as i64)]));
    facts
}

/// Renders encoded facts as parser-compatible program text, one fact per
/// line in atom order.
pub fn render_facts(facts: &BTreeSet<Atom>) -> String {
    let mut out = String::new();
    for a in facts {
        out.push_str(&a.to_string());
        out.push_str(".\n");
    }
    out
}
