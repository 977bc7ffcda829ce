//! Grounder: from a safe program plus ground facts to a finite ground
//! program over an indexed atom table.
//!
//! Grounding runs in two phases. Phase A computes the *possible-atom
//! universe* by a semi-naive fixpoint: a rule head is possible if its
//! positive body can be matched against possible atoms (negation is ignored
//! — it can only remove models, never atoms — and choice elements count as
//! possibly true). Aggregate and choice-element condition predicates
//! re-trigger their rules, so element sets that grow late still produce all
//! derivable heads. Phase B then materializes ground rules in one naive
//! pass over the finished universe, which guarantees every ground aggregate
//! literal carries its complete instantiated element set.
//!
//! After materialization a standard simplification runs: atoms certain in
//! every model (the least model of the negation- and aggregate-free rules)
//! become facts, certainly-true positive literals are removed, and rules or
//! elements refuted by a certain atom under negation are dropped. The atom
//! table is sorted by the ground term order, so atom ids double as the
//! solver's enumeration order.
//!
//! Budgets: `max_ground_atoms` bounds the universe (and any single range
//! expansion), `max_term_depth` bounds stored term nesting; exceeding
//! either aborts with `GroundingBudgetExceeded` — the signature of a
//! non-terminating construction like `p(f(X)) :- p(X).`

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use crate::ast::{AggKind, Head, Literal, OptSense, Program, Rule};
use crate::error::AspError;
use crate::term::{Atom, Bindings, Term};

/// Index into the ground atom table.
pub type AtomId = usize;

/// Grounding budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_ground_atoms: usize,
    pub max_term_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_ground_atoms: 1_000_000,
            max_term_depth: 64,
        }
    }
}

/// One instantiated aggregate or objective element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundAggElem {
    pub tuple: Vec<Term>,
    pub pos: Vec<AtomId>,
    pub naf: Vec<AtomId>,
}

/// An instantiated assignment aggregate with a ground target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundAgg {
    pub kind: AggKind,
    pub target: Term,
    pub elems: Vec<GroundAggElem>,
}

/// An instantiated choice element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundChoiceElem {
    pub atom: AtomId,
    pub pos: Vec<AtomId>,
    pub naf: Vec<AtomId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroundHead {
    Normal(AtomId),
    Choice {
        lower: Option<i64>,
        upper: Option<i64>,
        elems: Vec<GroundChoiceElem>,
    },
    None,
}

/// A fully instantiated rule; comparisons and ranges are already resolved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GroundRule {
    pub head: GroundHead,
    pub pos: Vec<AtomId>,
    pub naf: Vec<AtomId>,
    pub aggs: Vec<GroundAgg>,
}

impl GroundRule {
    pub fn is_fact(&self) -> bool {
        matches!(self.head, GroundHead::Normal(_))
            && self.pos.is_empty()
            && self.naf.is_empty()
            && self.aggs.is_empty()
    }
}

/// The merged optimization objective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub sense: OptSense,
    pub elems: Vec<GroundAggElem>,
}

/// Ground program over a sorted atom table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundProgram {
    atoms: Vec<Atom>,
    index: BTreeMap<Atom, AtomId>,
    pub rules: Vec<GroundRule>,
    pub objective: Option<Objective>,
}

impl GroundProgram {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn id_of(&self, atom: &Atom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    /// Reconstructs an AST program (used for idempotence tests and debug
    /// dumps). Comparisons and ranges are gone; what remains is ground.
    pub fn to_program(&self) -> Program {
        let lit_pos = |id: &AtomId| Literal::Pos(self.atoms[*id].clone());
        let lit_naf = |id: &AtomId| Literal::Naf(self.atoms[*id].clone());
        let elem = |e: &GroundAggElem| crate::ast::AggElem {
            tuple: e.tuple.clone(),
            cond: e
                .pos
                .iter()
                .map(lit_pos)
                .chain(e.naf.iter().map(lit_naf))
                .collect(),
        };
        let mut program = Program::default();
        for r in &self.rules {
            let mut body: Vec<Literal> = r.pos.iter().map(lit_pos).collect();
            body.extend(r.naf.iter().map(lit_naf));
            for agg in &r.aggs {
                body.push(Literal::Agg {
                    target: agg.target.clone(),
                    kind: agg.kind,
                    elems: agg.elems.iter().map(elem).collect(),
                });
            }
            let head = match &r.head {
                GroundHead::Normal(id) => Head::Normal(self.atoms[*id].clone()),
                GroundHead::None => Head::None,
                GroundHead::Choice {
                    lower,
                    upper,
                    elems,
                } => Head::Choice {
                    lower: *lower,
                    upper: *upper,
                    elems: elems
                        .iter()
                        .map(|e| crate::ast::ChoiceElem {
                            atom: self.atoms[e.atom].clone(),
                            cond: e
                                .pos
                                .iter()
                                .map(lit_pos)
                                .chain(e.naf.iter().map(lit_naf))
                                .collect(),
                        })
                        .collect(),
                },
            };
            program.rules.push(Rule { head, body });
        }
        if let Some(obj) = &self.objective {
            program.optimize.push(crate::ast::OptStatement {
                sense: obj.sense,
                elems: obj.elems.iter().map(elem).collect(),
            });
        }
        program
    }
}

// --- possible-atom universe ------------------------------------------------

#[derive(Default)]
struct Universe {
    by_pred: BTreeMap<(String, usize), BTreeSet<Vec<Term>>>,
    count: usize,
}

impl Universe {
    fn insert(&mut self, atom: Atom, limits: &Limits) -> Result<bool, AspError> {
        if atom.term_depth() >= limits.max_term_depth {
            return Err(AspError::GroundingBudgetExceeded {
                reason: format!(
                    "term depth limit {} reached at atom {atom}",
                    limits.max_term_depth
                ),
            });
        }
        let rows = self
            .by_pred
            .entry((atom.pred.clone(), atom.args.len()))
            .or_default();
        if rows.insert(atom.args) {
            self.count += 1;
            if self.count > limits.max_ground_atoms {
                return Err(AspError::GroundingBudgetExceeded {
                    reason: format!("more than {} ground atoms derived", limits.max_ground_atoms),
                });
            }
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn rows(&self, pred: &str, arity: usize) -> Option<&BTreeSet<Vec<Term>>> {
        self.by_pred.get(&(pred.to_string(), arity))
    }
}

// --- body scheduling -------------------------------------------------------

/// Variables a literal needs before it can run, and the ones it then binds.
fn literal_requirements(
    lit: &Literal,
    globals_of_agg: &BTreeSet<String>,
) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut needs = BTreeSet::new();
    let mut binds = BTreeSet::new();
    match lit {
        Literal::Pos(a) => {
            let mut all = BTreeSet::new();
            a.vars_into(&mut all);
            let mut bindable = BTreeSet::new();
            for arg in &a.args {
                arg.binding_vars_into(&mut bindable);
            }
            // Variables only reachable under arithmetic must already be
            // bound; matching cannot invert arithmetic.
            for v in all {
                if !bindable.contains(&v) {
                    needs.insert(v);
                }
            }
            binds = bindable;
        }
        Literal::Naf(a) => {
            a.vars_into(&mut needs);
        }
        Literal::Cmp(_, l, r) => {
            l.vars_into(&mut needs);
            r.vars_into(&mut needs);
        }
        Literal::Range { var, lo, hi } => {
            lo.vars_into(&mut needs);
            hi.vars_into(&mut needs);
            binds.insert(var.clone());
        }
        Literal::Agg { target, .. } => {
            needs.extend(globals_of_agg.iter().cloned());
            if let Term::Var(v) = target {
                binds.insert(v.clone());
            } else {
                target.vars_into(&mut needs);
            }
        }
    }
    (needs, binds)
}

/// Orders body literals so that every literal's required variables are
/// bound by the time it runs, starting from `initial_bound` (outer bindings
/// for element conditions). Safety guarantees such an order exists.
fn schedule(
    body: &[Literal],
    rule_vars_elsewhere: &[BTreeSet<String>],
    initial_bound: &BTreeSet<String>,
) -> Vec<usize> {
    let mut order = Vec::with_capacity(body.len());
    let mut done = vec![false; body.len()];
    let mut bound: BTreeSet<String> = initial_bound.clone();
    while order.len() < body.len() {
        let mut picked = None;
        for (i, lit) in body.iter().enumerate() {
            if done[i] {
                continue;
            }
            let globals = agg_globals(lit, &rule_vars_elsewhere[i]);
            let (needs, _) = literal_requirements(lit, &globals);
            if needs.is_subset(&bound) {
                picked = Some(i);
                break;
            }
        }
        let i = picked.expect("safety check guarantees a valid literal order");
        let globals = agg_globals(&body[i], &rule_vars_elsewhere[i]);
        let (_, binds) = literal_requirements(&body[i], &globals);
        bound.extend(binds);
        done[i] = true;
        order.push(i);
    }
    order
}

/// For an aggregate literal: its element variables shared with the rest of
/// the rule (the "global" ones the outer join must bind first).
fn agg_globals(lit: &Literal, elsewhere: &BTreeSet<String>) -> BTreeSet<String> {
    let Literal::Agg { elems, .. } = lit else {
        return BTreeSet::new();
    };
    let mut own = BTreeSet::new();
    for e in elems {
        for t in &e.tuple {
            t.vars_into(&mut own);
        }
        for c in &e.cond {
            c.vars_into(&mut own);
        }
    }
    own.intersection(elsewhere).cloned().collect()
}

fn vars_elsewhere(rule: &Rule) -> Vec<BTreeSet<String>> {
    let mut head_vars = BTreeSet::new();
    match &rule.head {
        Head::Normal(a) => a.vars_into(&mut head_vars),
        Head::Choice { elems, .. } => {
            for e in elems {
                e.atom.vars_into(&mut head_vars);
                for c in &e.cond {
                    c.vars_into(&mut head_vars);
                }
            }
        }
        Head::None => {}
    }
    let per_lit: Vec<BTreeSet<String>> = rule
        .body
        .iter()
        .map(|l| {
            let mut s = BTreeSet::new();
            l.vars_into(&mut s);
            s
        })
        .collect();
    (0..rule.body.len())
        .map(|i| {
            let mut s = head_vars.clone();
            for (j, vs) in per_lit.iter().enumerate() {
                if j != i {
                    s.extend(vs.iter().cloned());
                }
            }
            s
        })
        .collect()
}

// --- matching ---------------------------------------------------------------

fn unify_term(pat: &Term, val: &Term, bind: &mut Bindings, undo: &mut Vec<String>) -> bool {
    match pat {
        Term::Var(v) => {
            if let Some(b) = bind.get(v) {
                b == val
            } else {
                bind.insert(v.clone(), val.clone());
                undo.push(v.clone());
                true
            }
        }
        Term::Int(_) | Term::Const(_) | Term::Str(_) => pat == val,
        Term::Func(name, args) => match val {
            Term::Func(vn, va) => {
                name == vn
                    && args.len() == va.len()
                    && args
                        .iter()
                        .zip(va.iter())
                        .all(|(p, v)| unify_term(p, v, bind, undo))
            }
            _ => false,
        },
        Term::Arith(..) => match pat.subst(bind).eval() {
            Some(ground) => &ground == val,
            None => false,
        },
    }
}

fn undo_bindings(bind: &mut Bindings, undo: Vec<String>) {
    for v in undo {
        bind.remove(&v);
    }
}

/// Memo key for element instantiation: the element list's identity (address
/// and length — the AST outlives every matcher) plus the outer bindings of
/// exactly the variables the elements mention. Bindings of other variables
/// cannot influence the instantiation.
type ElemKey = (usize, usize, Vec<(String, Term)>);

/// Semi-naive mode: (delta rows, schedule position that must match them).
type Delta<'a> = Option<(&'a BTreeMap<(String, usize), BTreeSet<Vec<Term>>>, usize)>;

struct Matcher<'a> {
    uni: &'a Universe,
    limits: &'a Limits,
    /// When set: (delta rows, schedule position that must match the delta).
    delta: Delta<'a>,
    /// Instantiating an aggregate's elements scans the universe, and a rule
    /// whose remaining variables don't occur in the aggregate repeats that
    /// scan once per outer match. The universe is frozen for this matcher's
    /// lifetime, so identical instantiations are shared.
    elem_memo: RefCell<BTreeMap<ElemKey, Rc<Vec<GroundElemDraft>>>>,
}

impl<'a> Matcher<'a> {
    fn new(uni: &'a Universe, limits: &'a Limits, delta: Delta<'a>) -> Self {
        Matcher {
            uni,
            limits,
            delta,
            elem_memo: RefCell::new(BTreeMap::new()),
        }
    }
    /// Enumerates all substitutions satisfying the scheduled literals.
    fn match_body(
        &self,
        lits: &[&Literal],
        sched_pos: usize,
        bind: &mut Bindings,
        emit: &mut dyn FnMut(&mut Bindings) -> Result<(), AspError>,
    ) -> Result<(), AspError> {
        let Some(lit) = lits.get(sched_pos) else {
            return emit(bind);
        };
        match lit {
            Literal::Pos(a) => {
                let from_delta = self.delta.as_ref().is_some_and(|(_, at)| *at == sched_pos);
                let rows = if from_delta {
                    self.delta
                        .as_ref()
                        .and_then(|(d, _)| d.get(&(a.pred.clone(), a.arity())))
                } else {
                    self.uni.rows(&a.pred, a.arity())
                };
                let Some(rows) = rows else {
                    return Ok(());
                };
                for row in rows {
                    let mut undo = Vec::new();
                    let ok = a
                        .args
                        .iter()
                        .zip(row.iter())
                        .all(|(p, v)| unify_term(p, v, bind, &mut undo));
                    if ok {
                        self.match_body(lits, sched_pos + 1, bind, emit)?;
                    }
                    undo_bindings(bind, undo);
                }
                Ok(())
            }
            // Negation never prunes the possible-atom computation and is
            // resolved against the finished universe when rules are built.
            Literal::Naf(_) => self.match_body(lits, sched_pos + 1, bind, emit),
            Literal::Cmp(op, l, r) => {
                let (Some(lv), Some(rv)) = (l.subst(bind).eval(), r.subst(bind).eval()) else {
                    return Ok(());
                };
                if op.holds(lv.cmp(&rv)) {
                    self.match_body(lits, sched_pos + 1, bind, emit)?;
                }
                Ok(())
            }
            Literal::Range { var, lo, hi } => {
                let (Some(Term::Int(lo)), Some(Term::Int(hi))) =
                    (lo.subst(bind).eval(), hi.subst(bind).eval())
                else {
                    return Ok(());
                };
                if let Some(Term::Int(v)) = bind.get(var).cloned() {
                    if lo <= v && v <= hi {
                        self.match_body(lits, sched_pos + 1, bind, emit)?;
                    }
                    return Ok(());
                }
                if bind.contains_key(var) {
                    return Ok(()); // bound to a non-integer: no match
                }
                if hi >= lo && (hi - lo) as u128 >= self.limits.max_ground_atoms as u128 {
                    return Err(AspError::GroundingBudgetExceeded {
                        reason: format!("range {lo}..{hi} exceeds the atom budget"),
                    });
                }
                for v in lo..=hi {
                    bind.insert(var.clone(), Term::Int(v));
                    self.match_body(lits, sched_pos + 1, bind, emit)?;
                }
                bind.remove(var);
                Ok(())
            }
            Literal::Agg {
                target,
                kind,
                elems,
            } => {
                let inst = self.instantiate_elements(elems, bind)?;
                if inst.is_empty() {
                    return Ok(()); // empty element set: body unsatisfiable
                }
                let values = possible_values(*kind, &inst);
                match target {
                    Term::Var(v) if !bind.contains_key(v) => {
                        for val in values {
                            bind.insert(v.clone(), val);
                            self.match_body(lits, sched_pos + 1, bind, emit)?;
                            bind.remove(v);
                        }
                        Ok(())
                    }
                    t => {
                        let Some(ground) = t.subst(bind).eval() else {
                            return Ok(());
                        };
                        if values.contains(&ground) {
                            self.match_body(lits, sched_pos + 1, bind, emit)?;
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    /// Instantiates aggregate/objective elements under the outer bindings.
    fn instantiate_elements(
        &self,
        elems: &[crate::ast::AggElem],
        outer: &Bindings,
    ) -> Result<Rc<Vec<GroundElemDraft>>, AspError> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for e in elems {
            for t in &e.tuple {
                t.vars_into(&mut seen);
            }
            for c in &e.cond {
                c.vars_into(&mut seen);
            }
        }
        let key: ElemKey = (
            elems.as_ptr() as usize,
            elems.len(),
            seen.into_iter()
                .filter_map(|v| outer.get(&v).map(|t| (v, t.clone())))
                .collect(),
        );
        if let Some(hit) = self.elem_memo.borrow().get(&key) {
            return Ok(hit.clone());
        }
        let mut out = Vec::new();
        for e in elems {
            let elsewhere: Vec<BTreeSet<String>> = e.cond.iter().map(|_| BTreeSet::new()).collect();
            let outer_bound: BTreeSet<String> = outer.keys().cloned().collect();
            let order = schedule(&e.cond, &elsewhere, &outer_bound);
            let lits: Vec<&Literal> = order.iter().map(|&i| &e.cond[i]).collect();
            let inner = Matcher::new(self.uni, self.limits, None);
            let mut bind = outer.clone();
            inner.match_body(&lits, 0, &mut bind, &mut |b| {
                let mut tuple = Vec::with_capacity(e.tuple.len());
                for t in &e.tuple {
                    match t.subst(b).eval() {
                        Some(g) => tuple.push(g),
                        None => return Ok(()), // arithmetic failure: skip element
                    }
                }
                let mut pos = Vec::new();
                let mut naf = Vec::new();
                for c in &e.cond {
                    match c {
                        Literal::Pos(a) => {
                            if let Some(g) = ground_atom(a, b) {
                                pos.push(g);
                            } else {
                                return Ok(());
                            }
                        }
                        Literal::Naf(a) => {
                            if let Some(g) = ground_atom(a, b) {
                                naf.push(g);
                            }
                            // eval failure means the atom is false, so the
                            // negative literal is simply true: drop it.
                        }
                        _ => {} // comparisons/ranges already satisfied
                    }
                }
                out.push(GroundElemDraft { tuple, pos, naf });
                Ok(())
            })?;
        }
        let out = Rc::new(out);
        self.elem_memo.borrow_mut().insert(key, out.clone());
        Ok(out)
    }
}

/// Element instance before atom-id resolution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct GroundElemDraft {
    tuple: Vec<Term>,
    pos: Vec<Atom>,
    naf: Vec<Atom>,
}

fn ground_atom(a: &Atom, bind: &Bindings) -> Option<Atom> {
    let s = a.subst(bind);
    let mut args = Vec::with_capacity(s.args.len());
    for arg in s.args {
        args.push(arg.eval()?);
    }
    Some(Atom::new(s.pred, args))
}

/// Values an aggregate over the given (possibly true) elements can take.
fn possible_values(kind: AggKind, inst: &[GroundElemDraft]) -> BTreeSet<Term> {
    let tuples: BTreeSet<&Vec<Term>> = inst.iter().map(|e| &e.tuple).collect();
    match kind {
        AggKind::Max | AggKind::Min => tuples.iter().filter_map(|t| t.first().cloned()).collect(),
        AggKind::Count => (0..=tuples.len() as i64).map(Term::Int).collect(),
    }
}

// --- the grounder -----------------------------------------------------------

struct RulePlan<'a> {
    rule: &'a Rule,
    order: Vec<usize>,
    /// Predicates whose growth can enable new instantiations of this rule.
    triggers: BTreeSet<(String, usize)>,
    pos_positions: Vec<usize>, // schedule positions holding positive atoms
}

fn plan(rule: &Rule) -> RulePlan<'_> {
    let elsewhere = vars_elsewhere(rule);
    let order = schedule(&rule.body, &elsewhere, &BTreeSet::new());
    let mut triggers = BTreeSet::new();
    fn add_cond(triggers: &mut BTreeSet<(String, usize)>, cond: &[Literal]) {
        for l in cond {
            if let Literal::Pos(a) = l {
                triggers.insert((a.pred.clone(), a.arity()));
            }
        }
    }
    for l in &rule.body {
        match l {
            Literal::Pos(a) => {
                triggers.insert((a.pred.clone(), a.arity()));
            }
            Literal::Agg { elems, .. } => {
                for e in elems {
                    add_cond(&mut triggers, &e.cond);
                }
            }
            _ => {}
        }
    }
    if let Head::Choice { elems, .. } = &rule.head {
        for e in elems {
            add_cond(&mut triggers, &e.cond);
        }
    }
    let pos_positions = order
        .iter()
        .enumerate()
        .filter(|(_, &i)| matches!(rule.body[i], Literal::Pos(_)))
        .map(|(sp, _)| sp)
        .collect();
    RulePlan {
        rule,
        order,
        triggers,
        pos_positions,
    }
}

/// Grounds `program` against `facts`.
pub fn ground(
    program: &Program,
    facts: &BTreeSet<Atom>,
    limits: &Limits,
) -> Result<GroundProgram, AspError> {
    let mut uni = Universe::default();
    let mut delta: BTreeMap<(String, usize), BTreeSet<Vec<Term>>> = BTreeMap::new();
    for f in facts {
        if !f.is_ground() {
            return Err(AspError::NonGround {
                term: f.to_string(),
            });
        }
        if uni.insert(f.clone(), limits)? {
            delta
                .entry((f.pred.clone(), f.arity()))
                .or_default()
                .insert(f.args.clone());
        }
    }

    let plans: Vec<RulePlan> = program.rules.iter().map(plan).collect();

    // Phase A: possible-atom fixpoint.
    let mut first_round = true;
    loop {
        let mut added: Vec<Atom> = Vec::new();
        for p in &plans {
            if matches!(p.rule.head, Head::None) {
                continue; // constraints derive nothing
            }
            if !first_round {
                let touched = p
                    .triggers
                    .iter()
                    .any(|k| delta.get(k).is_some_and(|rows| !rows.is_empty()));
                if !touched {
                    continue;
                }
            }
            let lits: Vec<&Literal> = p.order.iter().map(|&i| &p.rule.body[i]).collect();
            // Run once per delta position (or unconstrained on the first
            // round / for rules whose only triggers are element conditions).
            let mut runs: Vec<Option<usize>> = Vec::new();
            if first_round || p.pos_positions.is_empty() {
                runs.push(None);
            } else {
                for &sp in &p.pos_positions {
                    runs.push(Some(sp));
                }
                // Element conditions may have grown without any positive
                // body delta; re-run unconstrained in that case.
                let body_preds: BTreeSet<(String, usize)> = p
                    .rule
                    .body
                    .iter()
                    .filter_map(|l| match l {
                        Literal::Pos(a) => Some((a.pred.clone(), a.arity())),
                        _ => None,
                    })
                    .collect();
                let elem_touched = p
                    .triggers
                    .iter()
                    .any(|k| !body_preds.contains(k) && delta.contains_key(k));
                if elem_touched {
                    runs.push(None);
                }
            }
            for run in runs {
                let matcher = Matcher::new(&uni, limits, run.map(|sp| (&delta, sp)));
                let mut bind = Bindings::new();
                let mut new_heads: Vec<Atom> = Vec::new();
                matcher.match_body(&lits, 0, &mut bind, &mut |b| {
                    match &p.rule.head {
                        Head::Normal(a) => {
                            if let Some(g) = ground_atom(a, b) {
                                new_heads.push(g);
                            }
                        }
                        Head::Choice { elems, .. } => {
                            for e in elems {
                                let elsewhere: Vec<BTreeSet<String>> =
                                    e.cond.iter().map(|_| BTreeSet::new()).collect();
                                let outer_bound: BTreeSet<String> = b.keys().cloned().collect();
                                let order = schedule(&e.cond, &elsewhere, &outer_bound);
                                let clits: Vec<&Literal> =
                                    order.iter().map(|&i| &e.cond[i]).collect();
                                let inner = Matcher::new(matcher.uni, limits, None);
                                let mut eb = b.clone();
                                inner.match_body(&clits, 0, &mut eb, &mut |cb| {
                                    if let Some(g) = ground_atom(&e.atom, cb) {
                                        new_heads.push(g);
                                    }
                                    Ok(())
                                })?;
                            }
                        }
                        Head::None => unreachable!(),
                    }
                    Ok(())
                })?;
                for h in new_heads {
                    if uni.insert(h.clone(), limits)? {
                        added.push(h);
                    }
                }
            }
        }
        first_round = false;
        delta.clear();
        if added.is_empty() {
            break;
        }
        for a in added {
            delta
                .entry((a.pred.clone(), a.arity()))
                .or_default()
                .insert(a.args);
        }
    }

    // Freeze the atom table in term order; ids are ranks.
    let mut table: BTreeSet<Atom> = BTreeSet::new();
    for ((pred, _), rows) in &uni.by_pred {
        for row in rows {
            table.insert(Atom::new(pred.clone(), row.clone()));
        }
    }
    let atoms: Vec<Atom> = table.into_iter().collect();
    let index: BTreeMap<Atom, AtomId> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();

    // Phase B: materialize ground rules against the finished universe.
    let id_of = |a: &Atom| -> AtomId {
        *index
            .get(a)
            .unwrap_or_else(|| panic!("phase A missed possible atom {a}"))
    };
    let resolve_elems = |drafts: &[GroundElemDraft]| -> Vec<GroundAggElem> {
        let mut out: BTreeSet<GroundAggElem> = BTreeSet::new();
        for d in drafts {
            let mut naf = Vec::new();
            for a in &d.naf {
                if let Some(&id) = index.get(a) {
                    naf.push(id);
                } // impossible atoms make the negative literal trivially true
            }
            out.insert(GroundAggElem {
                tuple: d.tuple.clone(),
                pos: d.pos.iter().map(&id_of).collect(),
                naf,
            });
        }
        out.into_iter().collect()
    };

    let mut rules: BTreeSet<GroundRule> = BTreeSet::new();
    for f in facts {
        rules.insert(GroundRule {
            head: GroundHead::Normal(id_of(f)),
            pos: vec![],
            naf: vec![],
            aggs: vec![],
        });
    }
    for p in &plans {
        let lits: Vec<&Literal> = p.order.iter().map(|&i| &p.rule.body[i]).collect();
        let matcher = Matcher::new(&uni, limits, None);
        let mut bind = Bindings::new();
        let mut drafts: Vec<GroundRule> = Vec::new();
        // Resolved aggregate elements per shared draft list (keyed by the
        // Rc's address, which the matcher's memo keeps alive).
        let mut agg_memo: BTreeMap<usize, Vec<GroundAggElem>> = BTreeMap::new();
        matcher.match_body(&lits, 0, &mut bind, &mut |b| {
            let mut pos = Vec::new();
            let mut naf = Vec::new();
            let mut aggs = Vec::new();
            for l in &p.rule.body {
                match l {
                    Literal::Pos(a) => {
                        let g = ground_atom(a, b).expect("positive body atom must be ground");
                        pos.push(id_of(&g));
                    }
                    Literal::Naf(a) => {
                        if let Some(g) = ground_atom(a, b) {
                            if let Some(&id) = index.get(&g) {
                                naf.push(id);
                            }
                        }
                    }
                    Literal::Cmp(..) | Literal::Range { .. } => {}
                    Literal::Agg {
                        target,
                        kind,
                        elems,
                    } => {
                        let inst = matcher.instantiate_elements(elems, b)?;
                        if inst.is_empty() {
                            return Ok(()); // drop this ground instance
                        }
                        let ground_target = target
                            .subst(b)
                            .eval()
                            .expect("aggregate target bound by schedule");
                        // Identical instantiations come back as the same
                        // shared draft list; resolve each one only once.
                        let resolved = agg_memo
                            .entry(Rc::as_ptr(&inst) as usize)
                            .or_insert_with(|| resolve_elems(&inst))
                            .clone();
                        aggs.push(GroundAgg {
                            kind: *kind,
                            target: ground_target,
                            elems: resolved,
                        });
                    }
                }
            }
            let head = match &p.rule.head {
                Head::Normal(a) => match ground_atom(a, b) {
                    Some(g) => GroundHead::Normal(id_of(&g)),
                    None => return Ok(()), // head arithmetic failed
                },
                Head::None => GroundHead::None,
                Head::Choice {
                    lower,
                    upper,
                    elems,
                } => {
                    let mut ground_elems: BTreeSet<GroundChoiceElem> = BTreeSet::new();
                    for e in elems {
                        let elsewhere: Vec<BTreeSet<String>> =
                            e.cond.iter().map(|_| BTreeSet::new()).collect();
                        let outer_bound: BTreeSet<String> = b.keys().cloned().collect();
                        let order = schedule(&e.cond, &elsewhere, &outer_bound);
                        let clits: Vec<&Literal> = order.iter().map(|&i| &e.cond[i]).collect();
                        let inner = Matcher::new(&uni, limits, None);
                        let mut eb = b.clone();
                        inner.match_body(&clits, 0, &mut eb, &mut |cb| {
                            let Some(atom) = ground_atom(&e.atom, cb) else {
                                return Ok(());
                            };
                            let mut epos = Vec::new();
                            let mut enaf = Vec::new();
                            for c in &e.cond {
                                match c {
                                    Literal::Pos(a) => {
                                        let g = ground_atom(a, cb)
                                            .expect("element condition atom must be ground");
                                        epos.push(id_of(&g));
                                    }
                                    Literal::Naf(a) => {
                                        if let Some(g) = ground_atom(a, cb) {
                                            if let Some(&id) = index.get(&g) {
                                                enaf.push(id);
                                            }
                                        }
                                    }
                                    _ => {}
                                }
                            }
                            ground_elems.insert(GroundChoiceElem {
                                atom: id_of(&atom),
                                pos: epos,
                                naf: enaf,
                            });
                            Ok(())
                        })?;
                    }
                    GroundHead::Choice {
                        lower: *lower,
                        upper: *upper,
                        elems: ground_elems.into_iter().collect(),
                    }
                }
            };
            drafts.push(GroundRule {
                head,
                pos,
                naf,
                aggs,
            });
            Ok(())
        })?;
        rules.extend(drafts);
    }

    // Objective: instantiate all optimization statements into one merged
    // element set (the parser already rejected mixed senses).
    let objective = if program.optimize.is_empty() {
        None
    } else {
        let matcher = Matcher::new(&uni, limits, None);
        let mut elems: BTreeSet<GroundAggElem> = BTreeSet::new();
        for opt in &program.optimize {
            let drafts = matcher.instantiate_elements(&opt.elems, &Bindings::new())?;
            elems.extend(resolve_elems(&drafts));
        }
        Some(Objective {
            sense: program.optimize[0].sense,
            elems: elems.into_iter().collect(),
        })
    };

    let mut gp = GroundProgram {
        atoms,
        index,
        rules: rules.into_iter().collect(),
        objective,
    };
    simplify(&mut gp);
    Ok(gp)
}

// --- simplification ---------------------------------------------------------

/// Computes the certain set (least model of the naf- and aggregate-free
/// normal rules) and simplifies the program against it. Certain atoms become
/// fact rules; rules refuted by a certain atom under negation are dropped.
fn simplify(gp: &mut GroundProgram) {
    let n = gp.atoms.len();
    let mut certain = vec![false; n];
    loop {
        let mut changed = false;
        for r in &gp.rules {
            if let GroundHead::Normal(h) = r.head {
                if !certain[h]
                    && r.naf.is_empty()
                    && r.aggs.is_empty()
                    && r.pos.iter().all(|&p| certain[p])
                {
                    certain[h] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let simplify_elem_lists =
        |pos: &[AtomId], naf: &[AtomId]| -> Option<(Vec<AtomId>, Vec<AtomId>)> {
            if naf.iter().any(|&a| certain[a]) {
                return None; // condition can never hold
            }
            Some((
                pos.iter().copied().filter(|&a| !certain[a]).collect(),
                naf.to_vec(),
            ))
        };

    let mut out: BTreeSet<GroundRule> = BTreeSet::new();
    for r in &gp.rules {
        if let GroundHead::Normal(h) = r.head {
            if certain[h] {
                // All derivations collapse into a single fact rule.
                out.insert(GroundRule {
                    head: GroundHead::Normal(h),
                    pos: vec![],
                    naf: vec![],
                    aggs: vec![],
                });
                continue;
            }
        }
        if r.naf.iter().any(|&a| certain[a]) {
            continue; // body refuted
        }
        let pos: Vec<AtomId> = r.pos.iter().copied().filter(|&a| !certain[a]).collect();
        let mut aggs = Vec::new();
        let mut dropped = false;
        for agg in &r.aggs {
            let mut elems = Vec::new();
            for e in &agg.elems {
                if let Some((epos, enaf)) = simplify_elem_lists(&e.pos, &e.naf) {
                    elems.push(GroundAggElem {
                        tuple: e.tuple.clone(),
                        pos: epos,
                        naf: enaf,
                    });
                }
            }
            if elems.is_empty() {
                dropped = true; // aggregate over an empty element set
                break;
            }
            aggs.push(GroundAgg {
                kind: agg.kind,
                target: agg.target.clone(),
                elems,
            });
        }
        if dropped {
            continue;
        }
        let head = match &r.head {
            GroundHead::Choice {
                lower,
                upper,
                elems,
            } => {
                let mut kept = Vec::new();
                for e in elems {
                    if let Some((epos, enaf)) = simplify_elem_lists(&e.pos, &e.naf) {
                        kept.push(GroundChoiceElem {
                            atom: e.atom,
                            pos: epos,
                            naf: enaf,
                        });
                    }
                }
                GroundHead::Choice {
                    lower: *lower,
                    upper: *upper,
                    elems: kept,
                }
            }
            h => h.clone(),
        };
        out.insert(GroundRule {
            head,
            pos,
            naf: r.naf.clone(),
            aggs,
        });
    }
    gp.rules = out.into_iter().collect();

    if let Some(obj) = &mut gp.objective {
        let mut elems = Vec::new();
        for e in &obj.elems {
            if let Some((epos, enaf)) = simplify_elem_lists(&e.pos, &e.naf) {
                elems.push(GroundAggElem {
                    tuple: e.tuple.clone(),
                    pos: epos,
                    naf: enaf,
                });
            }
        }
        obj.elems = elems;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;

    fn atoms(gp: &GroundProgram) -> Vec<String> {
        gp.atoms().iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn empty_program_grounds_to_nothing() {
        let gp = ground(&Program::default(), &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(gp.atom_count(), 0);
        assert!(gp.rules.is_empty());
    }

    #[test]
    fn facts_become_fact_rules() {
        let p = parse_program("p(1). p(2). q(X) :- p(X).").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(atoms(&gp), vec!["p(1)", "p(2)", "q(1)", "q(2)"]);
        assert!(gp.rules.iter().all(|r| r.is_fact()));
    }

    #[test]
    fn ranges_expand() {
        let p = parse_program("p(X) :- X = 2..4.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(atoms(&gp), vec!["p(2)", "p(3)", "p(4)"]);
    }

    #[test]
    fn arithmetic_in_heads_folds() {
        let p = parse_program("p(X + 1, X \\ 2) :- X = 1..2.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(atoms(&gp), vec!["p(2,1)", "p(3,0)"]);
    }

    #[test]
    fn division_by_zero_drops_the_instance() {
        let p = parse_program("p(1 / X) :- q(X). q(0). q(2).").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert!(atoms(&gp).contains(&"p(0)".to_string())); // 1/2 = 0
        assert_eq!(atoms(&gp).iter().filter(|a| a.starts_with("p(")).count(), 1);
    }

    #[test]
    fn depth_budget_catches_unbounded_lists() {
        // p(f(X)) :- p(X). p(0).
        let p = parse_program("p(f(X)) :- p(X). p(0).").unwrap();
        let err = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap_err();
        assert!(matches!(err, AspError::GroundingBudgetExceeded { .. }));
    }

    #[test]
    fn atom_budget_catches_wide_blowup() {
        let p = parse_program("p(X) :- X = 1..100.").unwrap();
        let limits = Limits {
            max_ground_atoms: 50,
            max_term_depth: 64,
        };
        let err = ground(&p, &BTreeSet::new(), &limits).unwrap_err();
        assert!(matches!(err, AspError::GroundingBudgetExceeded { .. }));
    }

    #[test]
    fn negation_does_not_prune_possible_atoms() {
        let p = parse_program("a :- not b. b :- not a.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(atoms(&gp), vec!["a", "b"]);
        assert_eq!(gp.rules.len(), 2);
    }

    #[test]
    fn naf_over_impossible_atom_is_removed() {
        let p = parse_program("a :- not zebra.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        // `zebra` can never be derived, so `a` is simply a fact.
        assert_eq!(atoms(&gp), vec!["a"]);
        assert!(gp.rules[0].is_fact());
    }

    #[test]
    fn certain_simplification_collapses_definite_parts() {
        let p = parse_program("a. b :- a. c :- b, not d. d :- e.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        // e is impossible, so d is impossible, so c is certain.
        for name in ["a", "b", "c"] {
            let id = gp.id_of(&Atom::new(name, vec![])).unwrap();
            assert!(
                gp.rules
                    .iter()
                    .any(|r| r.is_fact() && r.head == GroundHead::Normal(id)),
                "{name} should be a fact"
            );
        }
        assert!(gp.id_of(&Atom::new("d", vec![])).is_none());
    }

    #[test]
    fn choice_elements_enter_the_universe() {
        let p = parse_program("1 {pick(X) : cand(X)} 1 :- go. cand(a). cand(b). go.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert!(atoms(&gp).contains(&"pick(a)".to_string()));
        assert!(atoms(&gp).contains(&"pick(b)".to_string()));
        let choice = gp
            .rules
            .iter()
            .find(|r| matches!(r.head, GroundHead::Choice { .. }))
            .unwrap();
        let GroundHead::Choice { elems, .. } = &choice.head else {
            unreachable!()
        };
        assert_eq!(elems.len(), 2);
    }

    #[test]
    fn aggregate_sees_elements_derived_after_first_use() {
        // q(3) is derived one stratum later than q(1); the max must see it.
        let p = parse_program("q(1). later. q(3) :- later. m(M) :- M = #max{X : q(X)}.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert!(atoms(&gp).contains(&"m(3)".to_string()));
        // m(1) is possible (3 might be absent in some candidate), but the
        // aggregate literal must list both elements.
        let m3 = gp.id_of(&Atom::new("m", vec![Term::Int(3)])).unwrap();
        let rule = gp
            .rules
            .iter()
            .find(|r| r.head == GroundHead::Normal(m3) && !r.aggs.is_empty())
            .expect("m(3) rule with aggregate");
        assert_eq!(rule.aggs[0].elems.len(), 2);
    }

    #[test]
    fn empty_aggregate_element_set_drops_the_rule() {
        let p = parse_program("m(M) :- M = #max{X : q(X)}. p.").unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(atoms(&gp), vec!["p"]);
    }

    #[test]
    fn grounding_is_deterministic() {
        let src = "1 {p(X) : d(X)} 2. d(1). d(2). d(3). q(Y) :- p(Y), not r(Y). r(2) :- p(1).";
        let p = parse_program(src).unwrap();
        let a = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        let b = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        assert_eq!(a, b);
    }
}
