//! A small answer-set programming engine.
//!
//! The dialect covers what declarative buffer-packing programs need and no
//! more: normal rules and constraints, cardinality-bounded choice heads,
//! assignment aggregates (`X = #max{...}`, `#min`, `#count`), one global
//! `#maximize`/`#minimize` objective, integer arithmetic, comparisons,
//! integer ranges, function terms, and `[a,b|T]` list sugar over
//! `__cell`/`__nil`.
//!
//! Pipeline: [`parse_program`] → [`ground`] → [`solve`] /
//! [`solve_optimal`]. Everything is deterministic — the grounder freezes a
//! sorted atom table and the solver enumerates models false-first over it —
//! so identical input bytes always produce identical output bytes.
//! [`oracle_answer_sets`] re-derives models by exhaustive subset checking
//! and exists to keep the solver honest in tests.

pub mod ast;
pub mod error;
pub mod ground;
pub mod oracle;
pub mod parse;
pub mod solve;
pub mod term;

pub use ast::{
    AggElem, AggKind, ChoiceElem, CmpOp, Head, Literal, OptSense, OptStatement, Program, Rule,
};
pub use error::AspError;
pub use ground::{ground, AtomId, GroundProgram, Limits};
pub use oracle::{oracle_answer_sets, ORACLE_BUDGET_DEFAULT};
pub use parse::{parse_atom_str, parse_program, parse_term_str};
pub use solve::{check_stable, solve, solve_optimal, AnswerSet};
pub use term::{compare_terms, ArithOp, Atom, Bindings, Term};

use std::collections::BTreeSet;

/// Canonical answer-set rendering: one atom per line in term order, lists
/// re-sugared. The empty set renders as the empty string.
pub fn render_atoms(atoms: &BTreeSet<Atom>) -> String {
    let mut out = String::new();
    for a in atoms {
        out.push_str(&a.to_string());
        out.push('\n');
    }
    out
}
