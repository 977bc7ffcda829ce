//! Terms and atoms.
//!
//! A [`Term`] is either ground data (integer, constant, quoted string,
//! function term) or one of the two forms the grounder eliminates:
//! variables and arithmetic expressions. Ground terms carry a total order —
//! integers before constants before strings before function terms, function
//! terms by arity, then name, then arguments left to right — which fixes
//! answer-set rendering and the solver's enumeration order.
//!
//! List syntax is sugar: `[a, b | t]` is `__cell(a, __cell(b, t))` and
//! `[a, b]` ends in `__nil`. The pretty-printer re-sugars any `__cell`
//! chain, printing proper lists as `[a, b]` and improper ones as
//! `[a, b | t]`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::AspError;

/// Function name a cons cell desugars to.
pub const LIST_CELL: &str = "__cell";
/// Constant terminating a proper list.
pub const LIST_NIL: &str = "__nil";

/// Binary arithmetic operators usable inside terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl ArithOp {
    fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Mod => "\\",
        }
    }

    /// Integer evaluation; `None` on division/modulo by zero or overflow.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        match self {
            ArithOp::Add => a.checked_add(b),
            ArithOp::Sub => a.checked_sub(b),
            ArithOp::Mul => a.checked_mul(b),
            ArithOp::Div => a.checked_div(b),
            ArithOp::Mod => a.checked_rem(b),
        }
    }
}

/// A term of the rule language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Int(i64),
    Const(String),
    Str(String),
    Func(String, Vec<Term>),
    Var(String),
    /// Arithmetic expression; never survives grounding.
    Arith(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    /// Convenience constructor for function terms.
    pub fn func(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term::Func(name.into(), args)
    }

    /// Convenience constructor for constants.
    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    /// Builds the cons-cell encoding of a proper list.
    pub fn list(items: Vec<Term>) -> Term {
        let mut out = Term::Const(LIST_NIL.to_string());
        for item in items.into_iter().rev() {
            out = Term::Func(LIST_CELL.to_string(), vec![item, out]);
        }
        out
    }

    /// True when the term contains no variable and no arithmetic node.
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Int(_) | Term::Const(_) | Term::Str(_) => true,
            Term::Func(_, args) => args.iter().all(Term::is_ground),
            Term::Var(_) | Term::Arith(..) => false,
        }
    }

    /// Nesting depth: non-function terms have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Term::Func(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            Term::Arith(_, a, b) => 1 + a.depth().max(b.depth()),
            _ => 1,
        }
    }

    /// Collects every variable name in the term.
    pub fn vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Func(_, args) => {
                for a in args {
                    a.vars_into(out);
                }
            }
            Term::Arith(_, a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            _ => {}
        }
    }

    /// Variables occurring outside arithmetic expressions — the positions a
    /// positive body atom can bind by matching.
    pub fn binding_vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Func(_, args) => {
                for a in args {
                    a.binding_vars_into(out);
                }
            }
            Term::Arith(..) => {}
            _ => {}
        }
    }

    /// Applies a substitution, leaving unbound variables in place.
    pub fn subst(&self, bind: &Bindings) -> Term {
        match self {
            Term::Var(v) => bind.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Func(name, args) => {
                Term::Func(name.clone(), args.iter().map(|a| a.subst(bind)).collect())
            }
            Term::Arith(op, a, b) => {
                Term::Arith(*op, Box::new(a.subst(bind)), Box::new(b.subst(bind)))
            }
            _ => self.clone(),
        }
    }

    /// Folds arithmetic away. Fails (`None`) on unbound variables,
    /// non-integer operands, overflow, or division/modulo by zero — the
    /// containing ground instantiation is then dropped.
    pub fn eval(&self) -> Option<Term> {
        match self {
            Term::Int(_) | Term::Const(_) | Term::Str(_) => Some(self.clone()),
            Term::Func(name, args) => {
                let mut out = Vec::with_capacity(args.len());
                for a in args {
                    out.push(a.eval()?);
                }
                Some(Term::Func(name.clone(), out))
            }
            Term::Var(_) => None,
            Term::Arith(op, a, b) => match (a.eval()?, b.eval()?) {
                (Term::Int(x), Term::Int(y)) => op.apply(x, y).map(Term::Int),
                _ => None,
            },
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Int(_) => 0,
            Term::Const(_) => 1,
            Term::Str(_) => 2,
            Term::Func(..) => 3,
            Term::Var(_) => 4,
            Term::Arith(..) => 5,
        }
    }
}

/// Total order over terms. Only the ground portion (Int < Const < Str <
/// Func) is a public contract — see [`compare_terms`]; variables and
/// arithmetic order after ground terms so that non-ground terms can still
/// live in ordered containers internally.
impl Ord for Term {
    fn cmp(&self, other: &Term) -> Ordering {
        match (self, other) {
            (Term::Int(a), Term::Int(b)) => a.cmp(b),
            (Term::Const(a), Term::Const(b)) | (Term::Str(a), Term::Str(b)) => {
                a.as_bytes().cmp(b.as_bytes())
            }
            (Term::Func(na, aa), Term::Func(nb, ab)) => aa
                .len()
                .cmp(&ab.len())
                .then_with(|| na.as_bytes().cmp(nb.as_bytes()))
                .then_with(|| aa.cmp(ab)),
            (Term::Var(a), Term::Var(b)) => a.cmp(b),
            (Term::Arith(oa, la, ra), Term::Arith(ob, lb, rb)) => {
                oa.cmp(ob).then_with(|| la.cmp(lb)).then_with(|| ra.cmp(rb))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Term) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The documented total order over ground terms; errors on non-ground input.
pub fn compare_terms(a: &Term, b: &Term) -> Result<Ordering, AspError> {
    for t in [a, b] {
        if !t.is_ground() {
            return Err(AspError::NonGround {
                term: t.to_string(),
            });
        }
    }
    Ok(a.cmp(b))
}

/// Substitution from variable names to (usually ground) terms.
pub type Bindings = std::collections::BTreeMap<String, Term>;

fn quote_str(s: &str, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "\"")?;
    for c in s.chars() {
        match c {
            '"' => write!(f, "\\\"")?,
            '\\' => write!(f, "\\\\")?,
            '\n' => write!(f, "\\n")?,
            c => write!(f, "{c}")?,
        }
    }
    write!(f, "\"")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(n) => write!(f, "{n}"),
            Term::Const(name) => {
                if name == LIST_NIL {
                    write!(f, "[]")
                } else {
                    write!(f, "{name}")
                }
            }
            Term::Str(s) => quote_str(s, f),
            Term::Func(name, args) if name == LIST_CELL && args.len() == 2 => {
                // Re-sugar the cell chain.
                write!(f, "[{}", args[0])?;
                let mut tail = &args[1];
                loop {
                    match tail {
                        Term::Const(c) if c == LIST_NIL => break,
                        Term::Func(n, a) if n == LIST_CELL && a.len() == 2 => {
                            write!(f, ",{}", a[0])?;
                            tail = &a[1];
                        }
                        other => {
                            write!(f, "|{other}")?;
                            break;
                        }
                    }
                }
                write!(f, "]")
            }
            Term::Func(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Term::Var(v) => {
                // Parser-generated anonymous variables print back as `_`.
                if let Some(stripped) = v.strip_prefix("_#") {
                    let _ = stripped;
                    write!(f, "_")
                } else {
                    write!(f, "{v}")
                }
            }
            Term::Arith(op, a, b) => write!(f, "({}{}{})", a, op.symbol(), b),
        }
    }
}

/// A predicate applied to terms. With ground arguments this is a ground
/// atom; atoms order like the term they denote (`p` ~ constant,
/// `p(a)` ~ function term), so atom order and term order never disagree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            pred: pred.into(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn subst(&self, bind: &Bindings) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| a.subst(bind)).collect(),
        }
    }

    /// The term this atom denotes (`p` → constant, `p(..)` → function term).
    pub fn as_term(&self) -> Term {
        if self.args.is_empty() {
            Term::Const(self.pred.clone())
        } else {
            Term::Func(self.pred.clone(), self.args.clone())
        }
    }

    pub fn vars_into(&self, out: &mut BTreeSet<String>) {
        for a in &self.args {
            a.vars_into(out);
        }
    }

    /// Maximum argument nesting depth (0 for propositional atoms).
    pub fn term_depth(&self) -> usize {
        self.args.iter().map(Term::depth).max().unwrap_or(0)
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Atom) -> Ordering {
        match (self.args.is_empty(), other.args.is_empty()) {
            (true, true) => self.pred.as_bytes().cmp(other.pred.as_bytes()),
            // Propositional atoms denote constants, which order before
            // function terms.
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => self
                .args
                .len()
                .cmp(&other.args.len())
                .then_with(|| self.pred.as_bytes().cmp(other.pred.as_bytes()))
                .then_with(|| self.args.cmp(&other.args)),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Atom) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_term())
    }
}

/// Walks a cell chain into its elements. Proper lists yield their items; an
/// improper tail becomes the last element; a non-list term is a singleton.
pub fn flatten_list(term: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    let mut cur = term;
    loop {
        match cur {
            Term::Const(c) if c == LIST_NIL => break,
            Term::Func(name, args) if name == LIST_CELL && args.len() == 2 => {
                out.push(args[0].clone());
                cur = &args[1];
            }
            other => {
                out.push(other.clone());
                break;
            }
        }
    }
    out
}
