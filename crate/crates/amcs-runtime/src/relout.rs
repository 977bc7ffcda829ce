//! Output relativisation: which information a belief set releases to one
//! stakeholder under the context's output rules.

use crate::types::{BeliefSet, DataSet, OutputRule};

/// Collects the info terms of every rule for `stakeholder` whose body the
/// belief set supports: all positive body terms believed, no negative body
/// term believed. The result's source is the emitting context; an empty
/// info set means nothing is shared (callers suppress the data set).
pub fn relout(
    context_name: &str,
    bs: &BeliefSet,
    rules: &[OutputRule],
    stakeholder: &str,
) -> DataSet {
    let info = rules
        .iter()
        .filter(|r| r.stakeholder == stakeholder)
        .filter(|r| {
            r.positive_body.iter().all(|t| bs.holds(t))
                && r.negative_body.iter().all(|t| !bs.holds(t))
        })
        .map(|r| r.info.clone())
        .collect();
    DataSet {
        source: context_name.to_string(),
        info,
    }
}
