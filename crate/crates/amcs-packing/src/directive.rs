//! Decoding directive atoms out of a chosen answer set.
//!
//! Reserved predicates (with their exact arities) are interpreted; every
//! other atom is an auxiliary and ignored. Two package variants exist —
//! in_pack/1 plus a single process_as_schema/1, or any number of
//! process/2 atoms carrying member lists — and an answer set may use only
//! one of them.

use std::collections::BTreeSet;

use asp_engine::term::flatten_list;
use asp_engine::{AnswerSet, Term};

use crate::buffer::BufferState;
use crate::error::{DecodeError, DecodeWarning};

/// A schema-labelled ordered group of data-set ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Package {
    pub schema: Term,
    pub members: Vec<Term>,
}

/// Everything a chosen answer set instructs the engine to do.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectiveSet {
    pub packages: Vec<Package>,
    pub rm_pack: bool,
    /// Ids to remove — data sets or computations, resolved at apply time
    /// (data sets take precedence; ids are unique so this cannot matter in
    /// practice).
    pub removals: BTreeSet<Term>,
    pub tag_adds: BTreeSet<(Term, Term)>,
    pub tag_removes: BTreeSet<(Term, Term)>,
    pub ignores: BTreeSet<Term>,
}

impl DirectiveSet {
    pub fn is_empty(&self) -> bool {
        self.packages.is_empty()
            && !self.rm_pack
            && self.removals.is_empty()
            && self.tag_adds.is_empty()
            && self.tag_removes.is_empty()
            && self.ignores.is_empty()
    }
}

fn known(buffer: &BufferState, id: &Term) -> bool {
    buffer.has_data_set(id) || buffer.has_computation(id)
}

/// Interprets the directive atoms of `answer` against `buffer`.
///
/// Returns the decoded directives plus soft warnings (unknown ids are
/// skipped, in_pack without a schema forms no package). Structural
/// contradictions — mixed package variants, several schemas, a tag both
/// added and removed — are hard errors.
pub fn decode(
    answer: &AnswerSet,
    buffer: &BufferState,
) -> Result<(DirectiveSet, Vec<DecodeWarning>), DecodeError> {
    let mut warnings = Vec::new();
    let mut d = DirectiveSet::default();

    let mut in_pack: Vec<Term> = Vec::new();
    let mut schemas: Vec<Term> = Vec::new();
    let mut lists: Vec<(Term, Term)> = Vec::new();

    for a in &answer.atoms {
        match (a.pred.as_str(), a.args.len()) {
            ("in_pack", 1) => in_pack.push(a.args[0].clone()),
            ("process_as_schema", 1) => schemas.push(a.args[0].clone()),
            ("process", 2) => lists.push((a.args[0].clone(), a.args[1].clone())),
            ("rm_pack", 0) => d.rm_pack = true,
            ("rm", 1) => {
                if known(buffer, &a.args[0]) {
                    d.removals.insert(a.args[0].clone());
                } else {
                    warnings.push(DecodeWarning::UnknownId {
                        atom: a.to_string(),
                    });
                }
            }
            ("add_tag", 2) | ("rm_tag", 2) => {
                if known(buffer, &a.args[0]) {
                    let pair = (a.args[0].clone(), a.args[1].clone());
                    if a.pred == "add_tag" {
                        d.tag_adds.insert(pair);
                    } else {
                        d.tag_removes.insert(pair);
                    }
                } else {
                    warnings.push(DecodeWarning::UnknownId {
                        atom: a.to_string(),
                    });
                }
            }
            ("ignore", 1) => {
                if buffer.has_computation(&a.args[0]) {
                    d.ignores.insert(a.args[0].clone());
                } else {
                    warnings.push(DecodeWarning::UnknownId {
                        atom: a.to_string(),
                    });
                }
            }
            _ => {} // auxiliary
        }
    }

    if !schemas.is_empty() && !lists.is_empty() {
        return Err(DecodeError::MixedVariants);
    }
    if schemas.len() > 1 {
        return Err(DecodeError::MultipleSchemas {
            count: schemas.len(),
        });
    }
    if let Some((target, tag)) = d.tag_adds.intersection(&d.tag_removes).next() {
        return Err(DecodeError::TagConflict {
            target: target.to_string(),
            tag: tag.to_string(),
        });
    }

    match schemas.into_iter().next() {
        Some(schema) => {
            // Single-package variant: members in buffer order.
            let mut members = Vec::new();
            for r in &buffer.records {
                if in_pack.contains(&r.id) {
                    members.push(r.id.clone());
                }
            }
            for id in &in_pack {
                if !buffer.has_data_set(id) {
                    warnings.push(DecodeWarning::UnknownId {
                        atom: format!("in_pack({id})"),
                    });
                }
            }
            if members.is_empty() {
                warnings.push(DecodeWarning::EmptyPackage {
                    schema: schema.to_string(),
                });
            } else {
                d.packages.push(Package { schema, members });
            }
        }
        None if !in_pack.is_empty() => {
            warnings.push(DecodeWarning::DanglingInPack {
                ids: in_pack.iter().map(|t| t.to_string()).collect(),
            });
        }
        None => {}
    }

    for (schema, list) in lists {
        // Multi-package variant: member order is list order.
        let mut members = Vec::new();
        for m in flatten_list(&list) {
            if !buffer.has_data_set(&m) {
                warnings.push(DecodeWarning::UnknownId {
                    atom: format!("process({schema},{m})"),
                });
            } else if !members.contains(&m) {
                members.push(m);
            }
        }
        if members.is_empty() {
            warnings.push(DecodeWarning::EmptyPackage {
                schema: schema.to_string(),
            });
        } else {
            d.packages.push(Package { schema, members });
        }
    }

    Ok((d, warnings))
}
