//! Applying a decoded directive set to a buffer.

use asp_engine::Term;

use crate::buffer::{BufferState, DataSetRecord};
use crate::directive::DirectiveSet;
use crate::error::ApplyWarning;

/// A package with its member records snapshotted at assembly time, ready
/// to hand to the receiving context even after the buffer mutates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPackage {
    pub schema: Term,
    pub members: Vec<DataSetRecord>,
}

/// Result of applying directives: the successor buffer, the assembled
/// packages, and soft warnings (e.g. removal of something already gone).
#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub buffer: BufferState,
    pub packages: Vec<AssembledPackage>,
    pub warnings: Vec<ApplyWarning>,
}

/// Applies `d` to `buffer` in the fixed order: package assembly, rm_pack,
/// removals, tag removes then adds, ignores. Arrival order of surviving
/// records is preserved.
pub fn apply(buffer: &BufferState, d: &DirectiveSet) -> ApplyOutcome {
    let mut warnings = Vec::new();

    // (1) Snapshot package members while everything is still buffered.
    let mut packages = Vec::new();
    for p in &d.packages {
        let mut members = Vec::new();
        for id in &p.members {
            match buffer.record(id) {
                Some(r) => members.push(r.clone()),
                None => warnings.push(ApplyWarning::AlreadyRemoved { id: id.to_string() }),
            }
        }
        if !members.is_empty() {
            packages.push(AssembledPackage {
                schema: p.schema.clone(),
                members,
            });
        }
    }

    let mut next = buffer.clone();

    // (2) rm_pack drops every packaged data set.
    if d.rm_pack {
        let packaged: Vec<&Term> = packages
            .iter()
            .flat_map(|p| p.members.iter().map(|m| &m.id))
            .collect();
        next.records.retain(|r| !packaged.contains(&&r.id));
    }

    // (3) Explicit removals: a data-set id removes that record, a
    // computation id removes all of its records.
    for id in &d.removals {
        if next.has_data_set(id) {
            next.records.retain(|r| &r.id != id);
        } else if next.computations.contains_key(id) {
            next.records.retain(|r| r.computation.as_ref() != Some(id));
        } else {
            warnings.push(ApplyWarning::AlreadyRemoved { id: id.to_string() });
        }
    }

    // (4) Tag edits on whatever survived; removes before adds.
    for (target, tag) in &d.tag_removes {
        if !edit_tags(&mut next, target, |tags| {
            tags.remove(tag);
        }) {
            warnings.push(ApplyWarning::AlreadyRemoved {
                id: target.to_string(),
            });
        }
    }
    for (target, tag) in &d.tag_adds {
        if !edit_tags(&mut next, target, |tags| {
            tags.insert(tag.clone());
        }) {
            warnings.push(ApplyWarning::AlreadyRemoved {
                id: target.to_string(),
            });
        }
    }

    // (5) Ignores are permanent computation flags. They also scrub the
    // computation's currently buffered records: an ignored computation
    // must never contribute a record to any successor buffer, so ignore
    // subsumes rm on whatever it already delivered.
    for c in &d.ignores {
        match next.computations.get_mut(c) {
            Some(comp) => {
                comp.ignored = true;
                next.records.retain(|r| r.computation.as_ref() != Some(c));
            }
            None => warnings.push(ApplyWarning::AlreadyRemoved { id: c.to_string() }),
        }
    }

    ApplyOutcome {
        buffer: next,
        packages,
        warnings,
    }
}

fn edit_tags(
    buffer: &mut BufferState,
    target: &Term,
    f: impl FnOnce(&mut std::collections::BTreeSet<Term>),
) -> bool {
    if let Some(r) = buffer.records.iter_mut().find(|r| &r.id == target) {
        f(&mut r.tags);
        return true;
    }
    if let Some(c) = buffer.computations.get_mut(target) {
        f(&mut c.tags);
        return true;
    }
    false
}
