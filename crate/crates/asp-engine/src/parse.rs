//! Lexer and recursive-descent parser for the rule language.
//!
//! One statement per `.` terminator; `%` starts a line comment. The grammar
//! covers normal rules, constraints, cardinality choice heads, assignment
//! aggregates (`X = #max{...}`), ranges (`I = 0..9`), comparisons,
//! integer arithmetic, function terms, quoted strings and list sugar.
//!
//! Every parse error carries a 1-based (line, col). A successfully parsed
//! program has also passed the safety check: every variable of a rule must
//! be bound by a positive body atom (outside arithmetic), a range, or an
//! assignment aggregate's target position.

use std::collections::BTreeSet;

use crate::ast::{
    AggElem, AggKind, ChoiceElem, CmpOp, Head, Literal, OptSense, OptStatement, Program, Rule,
};
use crate::error::AspError;
use crate::term::{Atom, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Anon,
    Int(i64),
    Str(String),
    Dot,
    DotDot,
    Comma,
    Semi,
    Colon,
    ColonDash,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Pipe,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    Plus,
    Minus,
    Star,
    Slash,
    Backslash,
    Not,
    Hash(String),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Anon => "`_`".into(),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "string".into(),
            Tok::Dot => "`.`".into(),
            Tok::DotDot => "`..`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::ColonDash => "`:-`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Backslash => "`\\`".into(),
            Tok::Not => "`not`".into(),
            Tok::Hash(k) => format!("`#{k}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, AspError> {
        let mut out = Vec::new();
        loop {
            while let Some(&c) = self.chars.peek() {
                if c == '%' {
                    while let Some(&c2) = self.chars.peek() {
                        if c2 == '\n' {
                            break;
                        }
                        self.bump();
                    }
                } else if c.is_whitespace() {
                    self.bump();
                } else {
                    break;
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push((Tok::Eof, line, col));
                return Ok(out);
            };
            let tok = match c {
                '0'..='9' => {
                    let mut s = String::new();
                    while let Some(&d) = self.chars.peek() {
                        if d.is_ascii_digit() {
                            s.push(d);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let n = s.parse::<i64>().map_err(|_| {
                        AspError::syntax(line, col, format!("integer literal `{s}` out of range"))
                    })?;
                    Tok::Int(n)
                }
                'a'..='z' => Tok::Ident(self.take_word()),
                'A'..='Z' => Tok::Var(self.take_word()),
                '_' => {
                    let w = self.take_word();
                    if w == "_" {
                        Tok::Anon
                    } else {
                        Tok::Var(w)
                    }
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => {
                                return Err(AspError::syntax(line, col, "unterminated string"));
                            }
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                Some('n') => s.push('\n'),
                                other => {
                                    return Err(AspError::syntax(
                                        self.line,
                                        self.col,
                                        format!("bad escape {other:?} in string"),
                                    ));
                                }
                            },
                            Some(ch) => s.push(ch),
                        }
                    }
                    Tok::Str(s)
                }
                '#' => {
                    self.bump();
                    let kw = self.take_word();
                    if kw.is_empty() {
                        return Err(AspError::syntax(line, col, "expected keyword after `#`"));
                    }
                    Tok::Hash(kw)
                }
                _ => {
                    self.bump();
                    match c {
                        '.' => {
                            if self.chars.peek() == Some(&'.') {
                                self.bump();
                                Tok::DotDot
                            } else {
                                Tok::Dot
                            }
                        }
                        ',' => Tok::Comma,
                        ';' => Tok::Semi,
                        ':' => {
                            if self.chars.peek() == Some(&'-') {
                                self.bump();
                                Tok::ColonDash
                            } else {
                                Tok::Colon
                            }
                        }
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        '[' => Tok::LBracket,
                        ']' => Tok::RBracket,
                        '|' => Tok::Pipe,
                        '<' => {
                            if self.chars.peek() == Some(&'=') {
                                self.bump();
                                Tok::Le
                            } else {
                                Tok::Lt
                            }
                        }
                        '>' => {
                            if self.chars.peek() == Some(&'=') {
                                self.bump();
                                Tok::Ge
                            } else {
                                Tok::Gt
                            }
                        }
                        '=' => Tok::Eq,
                        '!' => {
                            if self.chars.peek() == Some(&'=') {
                                self.bump();
                                Tok::Ne
                            } else {
                                return Err(AspError::syntax(line, col, "expected `!=`"));
                            }
                        }
                        '+' => Tok::Plus,
                        '-' => Tok::Minus,
                        '*' => Tok::Star,
                        '/' => Tok::Slash,
                        '\\' => Tok::Backslash,
                        other => {
                            return Err(AspError::syntax(
                                line,
                                col,
                                format!("unexpected character {other:?}"),
                            ));
                        }
                    }
                }
            };
            let tok = match tok {
                Tok::Ident(w) if w == "not" => Tok::Not,
                t => t,
            };
            out.push((tok, line, col));
            if out.last().map(|t| &t.0) == Some(&Tok::Eof) {
                return Ok(out);
            }
        }
    }

    fn take_word(&mut self) -> String {
        let mut s = String::new();
        while let Some(&d) = self.chars.peek() {
            if d.is_ascii_alphanumeric() || d == '_' {
                s.push(d);
                self.bump();
            } else {
                break;
            }
        }
        s
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    anon: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> AspError {
        let (l, c) = self.here();
        AspError::syntax(l, c, msg)
    }

    fn expect(&mut self, want: Tok) -> Result<(), AspError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            )))
        }
    }

    fn fresh_anon(&mut self) -> Term {
        self.anon += 1;
        Term::Var(format!("_#{}", self.anon))
    }

    // --- terms ---------------------------------------------------------

    fn term(&mut self) -> Result<Term, AspError> {
        let mut lhs = self.term_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => crate::term::ArithOp::Add,
                Tok::Minus => crate::term::ArithOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term_mul()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term_mul(&mut self) -> Result<Term, AspError> {
        let mut lhs = self.term_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => crate::term::ArithOp::Mul,
                Tok::Slash => crate::term::ArithOp::Div,
                Tok::Backslash => crate::term::ArithOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.term_unary()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term_unary(&mut self) -> Result<Term, AspError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let t = self.term_unary()?;
            return Ok(match t {
                Term::Int(n) => Term::Int(-n),
                other => Term::Arith(
                    crate::term::ArithOp::Sub,
                    Box::new(Term::Int(0)),
                    Box::new(other),
                ),
            });
        }
        self.term_primary()
    }

    fn term_primary(&mut self) -> Result<Term, AspError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::Int(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Str(s))
            }
            Tok::Var(v) => {
                self.bump();
                Ok(Term::Var(v))
            }
            Tok::Anon => {
                self.bump();
                Ok(self.fresh_anon())
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = vec![self.term()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.term()?);
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Term::Func(name, args))
                } else {
                    Ok(Term::Const(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::LBracket => {
                self.bump();
                if *self.peek() == Tok::RBracket {
                    self.bump();
                    return Ok(Term::list(vec![]));
                }
                let mut items = vec![self.term()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    items.push(self.term()?);
                }
                let tail = if *self.peek() == Tok::Pipe {
                    self.bump();
                    Some(self.term()?)
                } else {
                    None
                };
                self.expect(Tok::RBracket)?;
                let mut out = tail.unwrap_or_else(|| Term::constant(crate::term::LIST_NIL));
                for item in items.into_iter().rev() {
                    out = Term::func(crate::term::LIST_CELL, vec![item, out]);
                }
                Ok(out)
            }
            other => Err(self.err(format!("expected term, found {}", other.describe()))),
        }
    }

    fn atom_from_term(&self, t: Term, line: usize, col: usize) -> Result<Atom, AspError> {
        match t {
            Term::Const(name) => Ok(Atom::new(name, vec![])),
            Term::Func(name, args) => Ok(Atom::new(name, args)),
            other => Err(AspError::syntax(
                line,
                col,
                format!("expected an atom, found term `{other}`"),
            )),
        }
    }

    fn atom(&mut self) -> Result<Atom, AspError> {
        let (l, c) = self.here();
        let t = self.term()?;
        self.atom_from_term(t, l, c)
    }

    // --- literals ------------------------------------------------------

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek() {
            Tok::Lt => Some(CmpOp::Lt),
            Tok::Le => Some(CmpOp::Le),
            Tok::Gt => Some(CmpOp::Gt),
            Tok::Ge => Some(CmpOp::Ge),
            Tok::Eq => Some(CmpOp::Eq),
            Tok::Ne => Some(CmpOp::Ne),
            _ => None,
        }
    }

    /// Parses one body literal. `in_element` forbids nested aggregates.
    fn literal(&mut self, in_element: bool) -> Result<Literal, AspError> {
        if *self.peek() == Tok::Not {
            self.bump();
            let a = self.atom()?;
            return Ok(Literal::Naf(a));
        }
        let (l, c) = self.here();
        let lhs = self.term()?;
        let Some(op) = self.cmp_op() else {
            return Ok(Literal::Pos(self.atom_from_term(lhs, l, c)?));
        };
        self.bump();
        if op == CmpOp::Eq {
            if let Tok::Hash(kw) = self.peek().clone() {
                if in_element {
                    return Err(self.err("aggregates cannot be nested inside elements"));
                }
                let kind = match kw.as_str() {
                    "max" => AggKind::Max,
                    "min" => AggKind::Min,
                    "count" => AggKind::Count,
                    other => {
                        return Err(self.err(format!("unknown aggregate `#{other}`")));
                    }
                };
                self.bump();
                if !matches!(lhs, Term::Var(_)) {
                    return Err(AspError::syntax(
                        l,
                        c,
                        "aggregate assignment target must be a variable",
                    ));
                }
                let elems = self.agg_elems()?;
                return Ok(Literal::Agg {
                    target: lhs,
                    kind,
                    elems,
                });
            }
            // `V = lo..hi` is a range; any other `=` is a plain comparison.
            let lo = self.term()?;
            if *self.peek() == Tok::DotDot {
                self.bump();
                let hi = self.term()?;
                let Term::Var(v) = lhs else {
                    return Err(AspError::syntax(
                        l,
                        c,
                        "range assignment target must be a variable",
                    ));
                };
                return Ok(Literal::Range { var: v, lo, hi });
            }
            return Ok(Literal::Cmp(CmpOp::Eq, lhs, lo));
        }
        let rhs = self.term()?;
        Ok(Literal::Cmp(op, lhs, rhs))
    }

    fn condition(&mut self) -> Result<Vec<Literal>, AspError> {
        let mut out = vec![self.literal(true)?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.literal(true)?);
        }
        Ok(out)
    }

    fn agg_elems(&mut self) -> Result<Vec<AggElem>, AspError> {
        self.expect(Tok::LBrace)?;
        let mut elems = Vec::new();
        loop {
            let mut tuple = vec![self.term()?];
            while *self.peek() == Tok::Comma {
                self.bump();
                tuple.push(self.term()?);
            }
            let cond = if *self.peek() == Tok::Colon {
                self.bump();
                self.condition()?
            } else {
                Vec::new()
            };
            elems.push(AggElem { tuple, cond });
            if *self.peek() == Tok::Semi {
                self.bump();
                continue;
            }
            break;
        }
        self.expect(Tok::RBrace)?;
        Ok(elems)
    }

    // --- statements ----------------------------------------------------

    fn body(&mut self) -> Result<Vec<Literal>, AspError> {
        // An empty body (`:- .`) is accepted; it denotes an always-true
        // body, so a headless rule with it is an unconditional conflict.
        if *self.peek() == Tok::Dot {
            return Ok(Vec::new());
        }
        let mut out = vec![self.literal(false)?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.literal(false)?);
        }
        Ok(out)
    }

    fn bound(&mut self) -> Result<i64, AspError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Int(n) => Ok(if neg { -n } else { n }),
            other => Err(self.err(format!(
                "expected integer bound, found {}",
                other.describe()
            ))),
        }
    }

    fn choice_head(&mut self) -> Result<Head, AspError> {
        let lower = if matches!(self.peek(), Tok::Int(_) | Tok::Minus) {
            Some(self.bound()?)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut elems = Vec::new();
        if *self.peek() != Tok::RBrace {
            loop {
                let atom = self.atom()?;
                let cond = if *self.peek() == Tok::Colon {
                    self.bump();
                    self.condition()?
                } else {
                    Vec::new()
                };
                elems.push(ChoiceElem { atom, cond });
                if *self.peek() == Tok::Semi {
                    self.bump();
                    continue;
                }
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        let upper = if matches!(self.peek(), Tok::Int(_) | Tok::Minus) {
            Some(self.bound()?)
        } else {
            None
        };
        Ok(Head::Choice {
            lower,
            upper,
            elems,
        })
    }

    fn statement(&mut self, program: &mut Program) -> Result<(), AspError> {
        match self.peek().clone() {
            Tok::Hash(kw) if kw == "maximize" || kw == "minimize" => {
                self.bump();
                let sense = if kw == "maximize" {
                    OptSense::Maximize
                } else {
                    OptSense::Minimize
                };
                let elems = self.agg_elems()?;
                self.expect(Tok::Dot)?;
                program.optimize.push(OptStatement { sense, elems });
                Ok(())
            }
            Tok::ColonDash => {
                self.bump();
                let body = self.body()?;
                self.expect(Tok::Dot)?;
                program.rules.push(Rule {
                    head: Head::None,
                    body,
                });
                Ok(())
            }
            Tok::Int(_) | Tok::LBrace | Tok::Minus => {
                let head = self.choice_head()?;
                let body = if *self.peek() == Tok::ColonDash {
                    self.bump();
                    self.body()?
                } else {
                    Vec::new()
                };
                self.expect(Tok::Dot)?;
                program.rules.push(Rule { head, body });
                Ok(())
            }
            _ => {
                let atom = self.atom()?;
                let body = if *self.peek() == Tok::ColonDash {
                    self.bump();
                    self.body()?
                } else {
                    Vec::new()
                };
                self.expect(Tok::Dot)?;
                program.rules.push(Rule {
                    head: Head::Normal(atom),
                    body,
                });
                Ok(())
            }
        }
    }
}

/// Parses and safety-checks a program.
pub fn parse_program(text: &str) -> Result<Program, AspError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        anon: 0,
    };
    let mut program = Program::default();
    while *p.peek() != Tok::Eof {
        p.statement(&mut program)?;
    }
    check_safety(&program)?;
    let senses: BTreeSet<OptSense> = program.optimize.iter().map(|o| o.sense).collect();
    if senses.len() > 1 {
        return Err(AspError::MixedOptimization);
    }
    Ok(program)
}

/// Parses a single term followed by end of input.
pub fn parse_term_str(text: &str) -> Result<Term, AspError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        anon: 0,
    };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err(format!(
            "trailing input after term: {}",
            p.peek().describe()
        )));
    }
    Ok(t)
}

/// Parses a single atom followed by end of input.
pub fn parse_atom_str(text: &str) -> Result<Atom, AspError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        anon: 0,
    };
    let a = p.atom()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err(format!(
            "trailing input after atom: {}",
            p.peek().describe()
        )));
    }
    Ok(a)
}

// --- safety --------------------------------------------------------------

fn term_vars(t: &Term) -> BTreeSet<String> {
    let mut s = BTreeSet::new();
    t.vars_into(&mut s);
    s
}

/// Variables a positive match against `atom` binds: every variable outside
/// arithmetic subterms.
fn atom_binding_vars(atom: &Atom) -> BTreeSet<String> {
    let mut s = BTreeSet::new();
    for a in &atom.args {
        a.binding_vars_into(&mut s);
    }
    s
}

fn atom_vars(atom: &Atom) -> BTreeSet<String> {
    let mut s = BTreeSet::new();
    atom.vars_into(&mut s);
    s
}

/// Extends `bound` with everything the literal sequence can bind, given
/// variables already bound outside.
fn saturate(
    bound: &mut BTreeSet<String>,
    lits: &[Literal],
    rule_vars_elsewhere: &BTreeSet<String>,
) {
    loop {
        let mut changed = false;
        for lit in lits {
            match lit {
                Literal::Pos(a) => {
                    for v in atom_binding_vars(a) {
                        changed |= bound.insert(v);
                    }
                }
                Literal::Range { var, lo, hi } => {
                    let need: BTreeSet<String> =
                        term_vars(lo).union(&term_vars(hi)).cloned().collect();
                    if need.is_subset(bound) {
                        changed |= bound.insert(var.clone());
                    }
                }
                Literal::Agg { target, elems, .. } => {
                    // The target becomes bound once every global element
                    // variable (shared with the rest of the rule) is bound.
                    let mut globals = BTreeSet::new();
                    for e in elems {
                        for t in &e.tuple {
                            t.vars_into(&mut globals);
                        }
                        for c in &e.cond {
                            c.vars_into(&mut globals);
                        }
                    }
                    let globals: BTreeSet<_> =
                        globals.intersection(rule_vars_elsewhere).cloned().collect();
                    if globals.is_subset(bound) {
                        if let Term::Var(v) = target {
                            changed |= bound.insert(v.clone());
                        }
                    }
                }
                _ => {}
            }
        }
        if !changed {
            return;
        }
    }
}

/// Checks that a literal sequence (an element condition) can bind its own
/// local variables, and returns the locally-bound set.
fn element_bound(cond: &[Literal], outer: &BTreeSet<String>) -> BTreeSet<String> {
    let mut bound = outer.clone();
    loop {
        let mut changed = false;
        for lit in cond {
            match lit {
                Literal::Pos(a) => {
                    for v in atom_binding_vars(a) {
                        changed |= bound.insert(v);
                    }
                }
                Literal::Range { var, lo, hi } => {
                    let need: BTreeSet<String> =
                        term_vars(lo).union(&term_vars(hi)).cloned().collect();
                    if need.is_subset(&bound) {
                        changed |= bound.insert(var.clone());
                    }
                }
                _ => {}
            }
        }
        if !changed {
            return bound;
        }
    }
}

fn check_element(
    rule_idx: usize,
    tuple_vars: &BTreeSet<String>,
    cond: &[Literal],
    outer: &BTreeSet<String>,
) -> Result<(), AspError> {
    let bound = element_bound(cond, outer);
    for v in tuple_vars {
        if !bound.contains(v) {
            return Err(AspError::UnsafeRule {
                rule: rule_idx,
                variable: v.clone(),
            });
        }
    }
    for lit in cond {
        let mut vars = BTreeSet::new();
        lit.vars_into(&mut vars);
        for v in vars {
            if !bound.contains(&v) {
                return Err(AspError::UnsafeRule {
                    rule: rule_idx,
                    variable: v,
                });
            }
        }
    }
    Ok(())
}

fn check_rule(rule: &Rule, idx: usize) -> Result<(), AspError> {
    // Variables occurring outside a given aggregate decide which of its
    // element variables are global; precompute per-literal "elsewhere" sets.
    let mut all_positions: Vec<BTreeSet<String>> = Vec::new();
    let mut head_vars = BTreeSet::new();
    match &rule.head {
        Head::Normal(a) => a.vars_into(&mut head_vars),
        Head::Choice { elems, .. } => {
            // Element-local variables are not rule-global; handled below.
            let _ = elems;
        }
        Head::None => {}
    }
    for lit in &rule.body {
        let mut s = BTreeSet::new();
        lit.vars_into(&mut s);
        all_positions.push(s);
    }

    // Fixpoint over the whole body. For aggregates we need the
    // "elsewhere" set per aggregate, so saturate literal-by-literal.
    let mut bound = BTreeSet::new();
    loop {
        let before = bound.len();
        for (i, lit) in rule.body.iter().enumerate() {
            let mut elsewhere = head_vars.clone();
            for (j, s) in all_positions.iter().enumerate() {
                if j != i {
                    elsewhere.extend(s.iter().cloned());
                }
            }
            saturate(&mut bound, std::slice::from_ref(lit), &elsewhere);
        }
        if bound.len() == before {
            break;
        }
    }

    // Every variable anywhere in the rule must now be accounted for.
    for v in &head_vars {
        if !bound.contains(v) {
            return Err(AspError::UnsafeRule {
                rule: idx,
                variable: v.clone(),
            });
        }
    }
    for (i, lit) in rule.body.iter().enumerate() {
        match lit {
            Literal::Pos(_) => {}
            Literal::Naf(a) => {
                for v in atom_vars(a) {
                    if !bound.contains(&v) {
                        return Err(AspError::UnsafeRule {
                            rule: idx,
                            variable: v,
                        });
                    }
                }
            }
            Literal::Cmp(_, l, r) => {
                for v in term_vars(l).union(&term_vars(r)) {
                    if !bound.contains(v) {
                        return Err(AspError::UnsafeRule {
                            rule: idx,
                            variable: v.clone(),
                        });
                    }
                }
            }
            Literal::Range { lo, hi, .. } => {
                for v in term_vars(lo).union(&term_vars(hi)) {
                    if !bound.contains(v) {
                        return Err(AspError::UnsafeRule {
                            rule: idx,
                            variable: v.clone(),
                        });
                    }
                }
            }
            Literal::Agg { target, elems, .. } => {
                if let Term::Var(v) = target {
                    if !bound.contains(v) {
                        return Err(AspError::UnsafeRule {
                            rule: idx,
                            variable: v.clone(),
                        });
                    }
                }
                let mut elsewhere = head_vars.clone();
                for (j, s) in all_positions.iter().enumerate() {
                    if j != i {
                        elsewhere.extend(s.iter().cloned());
                    }
                }
                let outer: BTreeSet<String> = bound.intersection(&elsewhere).cloned().collect();
                for e in elems {
                    let mut tv = BTreeSet::new();
                    for t in &e.tuple {
                        t.vars_into(&mut tv);
                    }
                    check_element(idx, &tv, &e.cond, &outer)?;
                }
            }
        }
    }
    // Positive body atoms may still carry arithmetic whose variables came
    // from nowhere (`p(X+1)` alone): arithmetic positions do not bind.
    for lit in &rule.body {
        if let Literal::Pos(a) = lit {
            for v in atom_vars(a) {
                if !bound.contains(&v) {
                    return Err(AspError::UnsafeRule {
                        rule: idx,
                        variable: v,
                    });
                }
            }
        }
    }
    // Choice elements: atom + condition variables must be bound globally or
    // within the element's own condition.
    if let Head::Choice { elems, .. } = &rule.head {
        for e in elems {
            let mut av = BTreeSet::new();
            e.atom.vars_into(&mut av);
            check_element(idx, &av, &e.cond, &bound)?;
        }
    }
    Ok(())
}

fn check_safety(program: &Program) -> Result<(), AspError> {
    for (idx, rule) in program.rules.iter().enumerate() {
        check_rule(rule, idx)?;
    }
    // Optimization statements have no body: every element must bind its own
    // variables. Their index continues after the rules.
    let empty = BTreeSet::new();
    for (k, opt) in program.optimize.iter().enumerate() {
        for e in &opt.elems {
            let mut tv = BTreeSet::new();
            for t in &e.tuple {
                t.vars_into(&mut tv);
            }
            check_element(program.rules.len() + k, &tv, &e.cond, &empty)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Head;

    #[test]
    fn smallest_program_is_one_fact() {
        // a.
        let p = parse_program("a.").unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(p.rules[0], Rule::fact(Atom::new("a", vec![])));
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let p = parse_program("% nothing here\n a. % trailing\n").unwrap();
        assert_eq!(p.rules.len(), 1);
    }

    #[test]
    fn unsafe_head_variable_is_reported() {
        // p(X).
        let err = parse_program("p(X).").unwrap_err();
        assert_eq!(
            err,
            AspError::UnsafeRule {
                rule: 0,
                variable: "X".into()
            }
        );
    }

    #[test]
    fn unsafe_naf_only_variable_is_reported() {
        let err = parse_program("p :- not q(X).").unwrap_err();
        assert!(matches!(err, AspError::UnsafeRule { rule: 0, .. }));
    }

    #[test]
    fn plain_equality_does_not_bind() {
        // `=` is a comparison, not an assignment.
        let err = parse_program("p(X) :- X = 5.").unwrap_err();
        assert!(matches!(err, AspError::UnsafeRule { .. }));
    }

    #[test]
    fn range_binds_its_variable() {
        let p = parse_program("p(X) :- X = 1..3.").unwrap();
        assert!(matches!(p.rules[0].body[0], Literal::Range { .. }));
    }

    #[test]
    fn aggregate_assignment_binds_target() {
        let p = parse_program("m(M) :- M = #max{X : q(X)}, r.").unwrap();
        assert!(p.rules[0]
            .body
            .iter()
            .any(|l| matches!(l, Literal::Agg { .. })));
    }

    #[test]
    fn aggregate_with_unbound_global_is_unsafe() {
        // C occurs in the element and in the head, but nothing binds it.
        let err = parse_program("m(M, C) :- M = #max{I : tag(DS, c(C, I))}.").unwrap_err();
        assert!(matches!(err, AspError::UnsafeRule { .. }));
    }

    #[test]
    fn choice_head_with_bounds_parses() {
        let p = parse_program("1 {sel(DS) : avail(DS)} 1 :- go.").unwrap();
        match &p.rules[0].head {
            Head::Choice {
                lower: Some(1),
                upper: Some(1),
                elems,
            } => assert_eq!(elems.len(), 1),
            h => panic!("unexpected head {h:?}"),
        }
    }

    #[test]
    fn bare_choice_defaults_to_unbounded() {
        let p = parse_program("{a; b}.").unwrap();
        match &p.rules[0].head {
            Head::Choice {
                lower: None,
                upper: None,
                elems,
            } => assert_eq!(elems.len(), 2),
            h => panic!("unexpected head {h:?}"),
        }
    }

    #[test]
    fn empty_constraint_body_is_accepted() {
        // :- .
        let p = parse_program(":- .").unwrap();
        assert_eq!(p.rules[0].head, Head::None);
        assert!(p.rules[0].body.is_empty());
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_program("a :- b,, c.").unwrap_err();
        match err {
            AspError::Syntax { line, col, .. } => {
                assert_eq!(line, 1);
                assert_eq!(col, 8);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn list_sugar_desugars_to_cells() {
        let p = parse_program("p([a, b | T]) :- q(T).").unwrap();
        let Head::Normal(head) = &p.rules[0].head else {
            panic!()
        };
        assert_eq!(head.args[0].to_string(), "[a,b|T]");
        let t = parse_term_str("[1, 2, 3]").unwrap();
        assert_eq!(
            crate::term::flatten_list(&t),
            vec![Term::Int(1), Term::Int(2), Term::Int(3)]
        );
    }

    #[test]
    fn mixed_optimization_senses_are_rejected() {
        let err = parse_program("#maximize{1 : a}. #minimize{1 : b}. {a; b}.").unwrap_err();
        assert_eq!(err, AspError::MixedOptimization);
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program("p :- q(_, _).").unwrap();
        let Literal::Pos(a) = &p.rules[0].body[0] else {
            panic!()
        };
        assert_ne!(a.args[0], a.args[1]);
        assert_eq!(a.args[0].to_string(), "_");
    }

    #[test]
    fn canonical_rendering_reparses_to_same_ast() {
        let src = r#"
            aux_case_avail :- ds_avail(DS), source(DS, ctxt_case_anl).
            1 {aux_case_in_pack(DS) : ds_avail(DS), source(DS, ctxt_case_anl)} 1 :- aux_case_avail, aux_ambulance_avail.
            in_pack(DS) :- aux_case_in_pack(DS).
            rm_pack :- in_pack(X), X = 1..3, not skip(X).
            m(M) :- M = #max{I, DS : tag(DS, c(I))}, go.
            #maximize{P : sel(C), tag(C, P)}.
            :- bad.
            :- .
        "#;
        let p1 = parse_program(src).unwrap();
        let rendered = p1.to_string();
        let p2 = parse_program(&rendered).unwrap();
        assert_eq!(p1, p2, "rendered program:\n{rendered}");
    }
}
