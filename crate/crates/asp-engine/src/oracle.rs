//! Brute-force stable-model enumeration, used as a test oracle.
//!
//! The oracle fixes what no search is needed for — fact-rule heads are true
//! in every stable model, atoms that never occur as a rule head (or choice
//! element) are false in every stable model — and then tries every subset
//! of the remaining *free* atoms, checking each candidate for stability.
//! Subsets are visited in the same lexicographic order the solver uses
//! (earlier atom ids more significant, false before true), so the result
//! sequence is directly comparable against [`crate::solve::solve`].

use std::collections::BTreeSet;

use crate::error::AspError;
use crate::ground::{AtomId, GroundHead, GroundProgram};
use crate::solve::AnswerSet;

/// Free atoms allowed before the oracle refuses to enumerate.
pub const ORACLE_BUDGET_DEFAULT: usize = 22;

fn classify(gp: &GroundProgram) -> (Vec<bool>, Vec<bool>) {
    let n = gp.atom_count();
    let mut fixed_true = vec![false; n];
    let mut headed = vec![false; n];
    for rule in &gp.rules {
        match &rule.head {
            GroundHead::Normal(h) => {
                headed[*h] = true;
                if rule.is_fact() {
                    fixed_true[*h] = true;
                }
            }
            GroundHead::Choice { elems, .. } => {
                for e in elems {
                    headed[e.atom] = true;
                }
            }
            GroundHead::None => {}
        }
    }
    (fixed_true, headed)
}

/// Enumerates all stable models by exhaustive search over the free atoms.
///
/// Fails with [`AspError::OracleBudgetExceeded`] when more than `budget`
/// atoms are free.
pub fn oracle_answer_sets(gp: &GroundProgram, budget: usize) -> Result<Vec<AnswerSet>, AspError> {
    let (fixed_true, headed) = classify(gp);
    let free: Vec<AtomId> = (0..gp.atom_count())
        .filter(|&a| headed[a] && !fixed_true[a])
        .collect();
    if free.len() > budget || free.len() >= 127 {
        return Err(AspError::OracleBudgetExceeded {
            free: free.len(),
            budget,
        });
    }
    let mut out = Vec::new();
    let f = free.len();
    for counter in 0u128..(1u128 << f) {
        let mut bits = fixed_true.clone();
        for (j, &a) in free.iter().enumerate() {
            if counter >> (f - 1 - j) & 1 == 1 {
                bits[a] = true;
            }
        }
        let candidate: BTreeSet<_> = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| gp.atom(i).clone())
            .collect();
        if crate::solve::check_stable(gp, &candidate) {
            out.push(crate::solve::model_from_bits(gp, &bits));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{ground, Limits};
    use crate::parse::parse_program;
    use crate::solve::solve;

    fn both(src: &str) -> (Vec<AnswerSet>, Vec<AnswerSet>) {
        let p = parse_program(src).unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        (
            solve(&gp, None),
            oracle_answer_sets(&gp, ORACLE_BUDGET_DEFAULT).unwrap(),
        )
    }

    #[test]
    fn oracle_matches_solver_on_small_programs() {
        for src in [
            "a :- not b. b :- not a.",
            "1 {a; b; c} 2. :- a, c.",
            "p(1). p(2). {q(X) : p(X)}. n(N) :- N = #count{X : q(X)}.",
            "a :- b. b :- a.",
            ":- . a.",
            "{q(1); q(3)}. m(M) :- M = #max{X : q(X)}. :- m(1).",
        ] {
            let (s, o) = both(src);
            assert_eq!(s, o, "divergence on {src}");
        }
    }

    #[test]
    fn facts_and_derived_certainties_do_not_count_as_free() {
        // Everything here is definite: zero free atoms, one candidate.
        let src = "p(1). p(2). q(X) :- p(X).";
        let p = parse_program(src).unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        let models = oracle_answer_sets(&gp, 0).unwrap();
        assert_eq!(models.len(), 1);
        assert_eq!(models[0].atoms.len(), 4);
    }

    #[test]
    fn budget_overrun_is_reported_not_attempted() {
        let src = "{a; b; c}.";
        let p = parse_program(src).unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        let err = oracle_answer_sets(&gp, 2).unwrap_err();
        assert!(matches!(
            err,
            AspError::OracleBudgetExceeded { free: 3, budget: 2 }
        ));
    }
}
