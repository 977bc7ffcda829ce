//! Context behaviors: what a context computes from a package.
//!
//! A behavior consumes one package (its schema plus the info sets of its
//! member data sets) and produces a sequence of belief sets. It may also
//! hand back a spec patch that reconfigures the context once the current
//! computation has finished.

use std::collections::BTreeSet;

use asp_engine::{ground, solve, Atom, Limits, Program, Term};

use crate::engine::EngineError;
use crate::types::{BeliefSet, SpecPatch};

/// One row of a scripted behavior table.
#[derive(Debug, Clone)]
pub struct ScriptRow {
    /// `None` matches any schema.
    pub schema: Option<Term>,
    /// Info terms that must all occur in the package (across its members).
    pub requires: BTreeSet<Term>,
    /// Belief sets produced, in emission order.
    pub beliefs: Vec<BeliefSet>,
    /// Reconfiguration applied after the computation ends.
    pub respec: Option<SpecPatch>,
}

impl ScriptRow {
    pub fn new(
        schema: Option<Term>,
        requires: impl IntoIterator<Item = Term>,
        beliefs: Vec<BeliefSet>,
    ) -> Self {
        ScriptRow {
            schema,
            requires: requires.into_iter().collect(),
            beliefs,
            respec: None,
        }
    }

    pub fn with_respec(mut self, patch: SpecPatch) -> Self {
        self.respec = Some(patch);
        self
    }

    fn matches(&self, schema: &Term, info: &BTreeSet<Term>) -> bool {
        self.schema.as_ref().is_none_or(|s| s == schema)
            && self.requires.iter().all(|t| info.contains(t))
    }
}

/// How a context turns packages into belief sets.
#[derive(Debug, Clone)]
pub enum Behavior {
    /// Table lookup: the first row whose schema and required info match the
    /// package supplies the belief sets (and optional respec). No matching
    /// row means the package produces no beliefs.
    Scripted(Vec<ScriptRow>),
    /// A knowledge base in the engine's rule fragment. The package's info
    /// terms are asserted as facts (constants and function terms directly,
    /// anything else wrapped as `info(t)`) and every answer set of the
    /// extended program becomes one belief set, in enumeration order.
    LogicProgram(Program),
}

impl Behavior {
    /// Runs the behavior on one package.
    ///
    /// `members` carries the info set of each member data set in package
    /// order; matching and fact assertion work on their union.
    pub fn run(
        &self,
        schema: &Term,
        members: &[BTreeSet<Term>],
        limits: &Limits,
    ) -> Result<(Vec<BeliefSet>, Option<SpecPatch>), EngineError> {
        let mut info: BTreeSet<Term> = BTreeSet::new();
        for m in members {
            info.extend(m.iter().cloned());
        }
        match self {
            Behavior::Scripted(rows) => {
                for row in rows {
                    if row.matches(schema, &info) {
                        return Ok((row.beliefs.clone(), row.respec.clone()));
                    }
                }
                Ok((Vec::new(), None))
            }
            Behavior::LogicProgram(kb) => {
                let facts: BTreeSet<Atom> = info.iter().map(term_to_fact).collect();
                let gp = ground(kb, &facts, limits)?;
                let sets = solve(&gp, None)
                    .into_iter()
                    .map(|ans| BeliefSet::new(ans.atoms.iter().map(atom_to_term)))
                    .collect();
                Ok((sets, None))
            }
        }
    }
}

/// Info terms become facts for knowledge-base behaviors.
fn term_to_fact(t: &Term) -> Atom {
    match t {
        Term::Const(c) => Atom {
            pred: c.clone(),
            args: Vec::new(),
        },
        Term::Func(name, args) => Atom {
            pred: name.clone(),
            args: args.clone(),
        },
        other => Atom {
            pred: "info".into(),
            args: vec![other.clone()],
        },
    }
}

fn atom_to_term(a: &Atom) -> Term {
    if a.args.is_empty() {
        Term::constant(a.pred.clone())
    } else {
        Term::func(a.pred.clone(), a.args.clone())
    }
}
