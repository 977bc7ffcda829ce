//! Abstract syntax of packing programs.
//!
//! A program is a sequence of rules plus optional optimization statements.
//! `Display` renders a canonical concrete syntax that re-parses to an equal
//! AST, which is what scenario round-tripping and the goldens rely on.

use std::collections::BTreeSet;
use std::fmt;

use crate::term::{Atom, Term};

/// Comparison operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        matches!(
            (self, ord),
            (CmpOp::Lt, Less)
                | (CmpOp::Le, Less)
                | (CmpOp::Le, Equal)
                | (CmpOp::Gt, Greater)
                | (CmpOp::Ge, Greater)
                | (CmpOp::Ge, Equal)
                | (CmpOp::Eq, Equal)
                | (CmpOp::Ne, Less)
                | (CmpOp::Ne, Greater)
        )
    }
}

/// Aggregate functions usable in assignment position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggKind {
    Max,
    Min,
    Count,
}

impl AggKind {
    pub fn keyword(self) -> &'static str {
        match self {
            AggKind::Max => "#max",
            AggKind::Min => "#min",
            AggKind::Count => "#count",
        }
    }
}

/// One element of an aggregate or optimization statement:
/// `tuple : literal, ..., literal`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AggElem {
    pub tuple: Vec<Term>,
    pub cond: Vec<Literal>,
}

/// Body literals. Conditions inside aggregate and choice elements are
/// restricted to the first four variants (no nesting).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Pos(Atom),
    Naf(Atom),
    Cmp(CmpOp, Term, Term),
    /// `V = lo..hi` — binds or tests an integer within the range.
    Range {
        var: String,
        lo: Term,
        hi: Term,
    },
    /// `T = #agg{ ... }` — assignment aggregate.
    Agg {
        target: Term,
        kind: AggKind,
        elems: Vec<AggElem>,
    },
}

impl Literal {
    pub fn vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Literal::Pos(a) | Literal::Naf(a) => a.vars_into(out),
            Literal::Cmp(_, l, r) => {
                l.vars_into(out);
                r.vars_into(out);
            }
            Literal::Range { var, lo, hi } => {
                out.insert(var.clone());
                lo.vars_into(out);
                hi.vars_into(out);
            }
            Literal::Agg { target, elems, .. } => {
                target.vars_into(out);
                for e in elems {
                    for t in &e.tuple {
                        t.vars_into(out);
                    }
                    for c in &e.cond {
                        c.vars_into(out);
                    }
                }
            }
        }
    }
}

/// One element of a choice head: `atom : literal, ..., literal`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChoiceElem {
    pub atom: Atom,
    pub cond: Vec<Literal>,
}

/// Rule heads.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Head {
    /// Plain atom.
    Normal(Atom),
    /// `lower { elem; ...; elem } upper` — bounds count distinct chosen atoms.
    Choice {
        lower: Option<i64>,
        upper: Option<i64>,
        elems: Vec<ChoiceElem>,
    },
    /// Constraint (headless rule).
    None,
}

/// A rule: head, optionally a body; constraints have head `None`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Head,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn fact(atom: Atom) -> Rule {
        Rule {
            head: Head::Normal(atom),
            body: Vec::new(),
        }
    }
}

/// Optimization sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OptSense {
    Maximize,
    Minimize,
}

/// `#maximize{...}.` / `#minimize{...}.`
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptStatement {
    pub sense: OptSense,
    pub elems: Vec<AggElem>,
}

/// A parsed program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub optimize: Vec<OptStatement>,
}

impl Program {
    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.optimize.is_empty()
    }

    /// Appends another program's statements (used to merge fact files).
    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
        self.optimize.extend(other.optimize);
    }
}

fn write_literals(f: &mut fmt::Formatter<'_>, lits: &[Literal]) -> fmt::Result {
    for (i, l) in lits.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Naf(a) => write!(f, "not {a}"),
            Literal::Cmp(op, l, r) => write!(f, "{l} {} {r}", op.symbol()),
            Literal::Range { var, lo, hi } => write!(f, "{var} = {lo}..{hi}"),
            Literal::Agg {
                target,
                kind,
                elems,
            } => {
                write!(f, "{target} = {}{{", kind.keyword())?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl fmt::Display for AggElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tuple.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        if !self.cond.is_empty() {
            write!(f, " : ")?;
            write_literals(f, &self.cond)?;
        }
        Ok(())
    }
}

impl fmt::Display for ChoiceElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)?;
        if !self.cond.is_empty() {
            write!(f, " : ")?;
            write_literals(f, &self.cond)?;
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.head {
            Head::Normal(a) => write!(f, "{a}")?,
            Head::Choice {
                lower,
                upper,
                elems,
            } => {
                if let Some(l) = lower {
                    write!(f, "{l} ")?;
                }
                write!(f, "{{")?;
                for (i, e) in elems.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "}}")?;
                if let Some(u) = upper {
                    write!(f, " {u}")?;
                }
            }
            Head::None => {}
        }
        if !self.body.is_empty() || matches!(self.head, Head::None) {
            if !matches!(self.head, Head::None) {
                write!(f, " ")?;
            }
            write!(f, ":- ")?;
            write_literals(f, &self.body)?;
        }
        write!(f, ".")
    }
}

impl fmt::Display for OptStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.sense {
            OptSense::Maximize => "#maximize",
            OptSense::Minimize => "#minimize",
        };
        write!(f, "{kw}{{")?;
        for (i, e) in self.elems.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}.")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for o in &self.optimize {
            writeln!(f, "{o}")?;
        }
        Ok(())
    }
}
