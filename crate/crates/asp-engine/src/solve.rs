//! Stable-model search and the stability checker.
//!
//! The solver runs a DFS over the ground atom table in ascending id order
//! (which the grounder sorted by the term order), branching false-first, so
//! answer sets come out in a documented, reproducible order: the first
//! model returned is the lexicographically least stable model under
//! "false < true" per atom. Between decisions a propagation sweep fires
//! rule heads, detects constraint and choice-bound conflicts, and prunes
//! atoms that have lost every potential support; propagation only ever
//! removes non-models, so the enumeration order of the surviving models is
//! unaffected. Every complete assignment is certified by [`check_stable`]
//! before it is reported.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::ControlFlow;

use crate::ast::{AggKind, OptSense};
use crate::error::AspError;
use crate::ground::{AtomId, GroundAgg, GroundHead, GroundProgram, GroundRule};
use crate::term::{Atom, Term};

/// A stable model plus, when the program optimizes, its objective value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    pub atoms: BTreeSet<Atom>,
    pub objective_value: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    True,
    False,
    Undet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BodyVal {
    True,
    False,
    Undet,
}

fn and3(a: BodyVal, b: BodyVal) -> BodyVal {
    match (a, b) {
        (BodyVal::False, _) | (_, BodyVal::False) => BodyVal::False,
        (BodyVal::True, BodyVal::True) => BodyVal::True,
        _ => BodyVal::Undet,
    }
}

/// Three-valued truth of one aggregate literal under a partial assignment.
fn agg_val(agg: &GroundAgg, val: &[Val]) -> BodyVal {
    // Group element instances by tuple: a tuple is satisfied when any of
    // its condition instances holds, and the aggregate ranges over the
    // distinct satisfied tuples.
    let mut tuples: Vec<(&Vec<Term>, BodyVal)> = Vec::new();
    for e in &agg.elems {
        let mut cond = BodyVal::True;
        for &p in &e.pos {
            cond = and3(
                cond,
                match val[p] {
                    Val::True => BodyVal::True,
                    Val::False => BodyVal::False,
                    Val::Undet => BodyVal::Undet,
                },
            );
        }
        for &n in &e.naf {
            cond = and3(
                cond,
                match val[n] {
                    Val::True => BodyVal::False,
                    Val::False => BodyVal::True,
                    Val::Undet => BodyVal::Undet,
                },
            );
        }
        match tuples.iter_mut().find(|(t, _)| *t == &e.tuple) {
            Some((_, status)) => {
                *status = match (*status, cond) {
                    (BodyVal::True, _) | (_, BodyVal::True) => BodyVal::True,
                    (BodyVal::Undet, _) | (_, BodyVal::Undet) => BodyVal::Undet,
                    _ => BodyVal::False,
                };
            }
            None => tuples.push((&e.tuple, cond)),
        }
    }
    let certain: Vec<&Term> = tuples
        .iter()
        .filter(|(_, s)| *s == BodyVal::True)
        .filter_map(|(t, _)| t.first())
        .collect();
    let possible: Vec<&Term> = tuples
        .iter()
        .filter(|(_, s)| *s != BodyVal::False)
        .filter_map(|(t, _)| t.first())
        .collect();
    match agg.kind {
        AggKind::Max | AggKind::Min => {
            let better = |a: &Term, b: &Term| match agg.kind {
                AggKind::Max => a.cmp(b) == Ordering::Greater,
                _ => a.cmp(b) == Ordering::Less,
            };
            if !possible.iter().any(|v| **v == agg.target) {
                return BodyVal::False; // target unreachable
            }
            if certain.iter().any(|v| better(v, &agg.target)) {
                return BodyVal::False; // certainly beaten
            }
            let target_certain = certain.iter().any(|v| **v == agg.target);
            let none_possible_better = !possible.iter().any(|v| better(v, &agg.target));
            if target_certain && none_possible_better {
                BodyVal::True
            } else {
                BodyVal::Undet
            }
        }
        AggKind::Count => {
            let Term::Int(k) = agg.target else {
                return BodyVal::False;
            };
            let ct = tuples.iter().filter(|(_, s)| *s == BodyVal::True).count() as i64;
            let cp = tuples.iter().filter(|(_, s)| *s != BodyVal::False).count() as i64;
            if k < ct || k > cp {
                BodyVal::False
            } else if ct == k && cp == k {
                BodyVal::True
            } else {
                BodyVal::Undet
            }
        }
    }
}

fn body_val(rule: &GroundRule, val: &[Val]) -> BodyVal {
    let mut v = BodyVal::True;
    for &p in &rule.pos {
        v = and3(
            v,
            match val[p] {
                Val::True => BodyVal::True,
                Val::False => BodyVal::False,
                Val::Undet => BodyVal::Undet,
            },
        );
        if v == BodyVal::False {
            return v;
        }
    }
    for &n in &rule.naf {
        v = and3(
            v,
            match val[n] {
                Val::True => BodyVal::False,
                Val::False => BodyVal::True,
                Val::Undet => BodyVal::Undet,
            },
        );
        if v == BodyVal::False {
            return v;
        }
    }
    for agg in &rule.aggs {
        v = and3(v, agg_val(agg, val));
        if v == BodyVal::False {
            return v;
        }
    }
    v
}

/// Truth of an element condition (used for choice bounds).
fn cond_val(pos: &[AtomId], naf: &[AtomId], val: &[Val]) -> BodyVal {
    let mut v = BodyVal::True;
    for &p in pos {
        v = and3(
            v,
            match val[p] {
                Val::True => BodyVal::True,
                Val::False => BodyVal::False,
                Val::Undet => BodyVal::Undet,
            },
        );
    }
    for &n in naf {
        v = and3(
            v,
            match val[n] {
                Val::True => BodyVal::False,
                Val::False => BodyVal::True,
                Val::Undet => BodyVal::Undet,
            },
        );
    }
    v
}

struct Search<'a> {
    gp: &'a GroundProgram,
    val: Vec<Val>,
    trail: Vec<AtomId>,
    /// Per atom: indices of rules whose head can derive it (normal head or
    /// choice element). Everything else can never support the atom.
    supports: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(gp: &'a GroundProgram) -> Self {
        let mut supports = vec![Vec::new(); gp.atom_count()];
        for (i, rule) in gp.rules.iter().enumerate() {
            match &rule.head {
                GroundHead::Normal(h) => supports[*h].push(i),
                GroundHead::Choice { elems, .. } => {
                    for e in elems {
                        let s = &mut supports[e.atom];
                        if s.last() != Some(&i) {
                            s.push(i);
                        }
                    }
                }
                GroundHead::None => {}
            }
        }
        Search {
            gp,
            val: vec![Val::Undet; gp.atom_count()],
            trail: Vec::new(),
            supports,
        }
    }

    /// Assigns an atom; returns false on contradiction with a prior value.
    fn assign(&mut self, a: AtomId, v: Val) -> bool {
        match self.val[a] {
            Val::Undet => {
                self.val[a] = v;
                self.trail.push(a);
                true
            }
            old => old == v,
        }
    }

    fn unwind(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let a = self.trail.pop().unwrap();
            self.val[a] = Val::Undet;
        }
    }

    /// Fixpoint propagation; false signals a conflict.
    ///
    /// Choice forcing works off a per-rule snapshot of the assignment.
    /// Assignments are monotone within a branch (Undet never reverts, True
    /// and False never flip), so a snapshot can only understate what is
    /// determined — forcing decisions drawn from it stay sound, and anything
    /// missed is picked up on the next sweep.
    fn propagate(&mut self) -> bool {
        let gp = self.gp;
        loop {
            let before = self.trail.len();
            for rule in &gp.rules {
                let bv = body_val(rule, &self.val);
                match &rule.head {
                    GroundHead::Normal(h) => {
                        if bv == BodyVal::True && !self.assign(*h, Val::True) {
                            return false;
                        }
                    }
                    GroundHead::None => {
                        if bv == BodyVal::True {
                            return false;
                        }
                    }
                    GroundHead::Choice {
                        lower,
                        upper,
                        elems,
                    } => {
                        if bv != BodyVal::True {
                            continue;
                        }
                        // Distinct atoms: an atom is chosen when it is true
                        // and some condition instance of it holds.
                        let mut atoms: Vec<AtomId> = elems.iter().map(|e| e.atom).collect();
                        atoms.sort_unstable();
                        atoms.dedup();
                        // (atom, surely-chosen, condition truth) snapshot
                        let mut status: Vec<(AtomId, BodyVal, BodyVal)> =
                            Vec::with_capacity(atoms.len());
                        for &a in &atoms {
                            let mut any_true = false;
                            let mut any_open = false;
                            for e in elems.iter().filter(|e| e.atom == a) {
                                match cond_val(&e.pos, &e.naf, &self.val) {
                                    BodyVal::True => any_true = true,
                                    BodyVal::Undet => any_open = true,
                                    BodyVal::False => {}
                                }
                            }
                            let cond = if any_true {
                                BodyVal::True
                            } else if any_open {
                                BodyVal::Undet
                            } else {
                                BodyVal::False
                            };
                            let av = match self.val[a] {
                                Val::True => BodyVal::True,
                                Val::False => BodyVal::False,
                                Val::Undet => BodyVal::Undet,
                            };
                            status.push((a, and3(av, cond), cond));
                        }
                        let chosen = status
                            .iter()
                            .filter(|(_, s, _)| *s == BodyVal::True)
                            .count() as i64;
                        let possible = status
                            .iter()
                            .filter(|(_, s, _)| *s != BodyVal::False)
                            .count() as i64;
                        let mut forced: Vec<(AtomId, Val)> = Vec::new();
                        if let Some(u) = upper {
                            if chosen > *u {
                                return false;
                            }
                            if chosen == *u {
                                // No further atom with a holding condition
                                // may become true.
                                for (a, _, cond) in &status {
                                    if self.val[*a] == Val::Undet && *cond == BodyVal::True {
                                        forced.push((*a, Val::False));
                                    }
                                }
                            }
                        }
                        if let Some(l) = lower {
                            if possible < *l {
                                return false;
                            }
                            if possible == *l {
                                for (a, _, cond) in &status {
                                    if self.val[*a] == Val::Undet && *cond != BodyVal::False {
                                        forced.push((*a, Val::True));
                                    }
                                }
                            }
                        }
                        for (a, v) in forced {
                            if !self.assign(a, v) {
                                return false;
                            }
                        }
                    }
                }
            }
            // Support pruning: an atom with no potentially-supporting rule
            // cannot be true in any stable extension.
            for a in 0..self.val.len() {
                if self.val[a] == Val::False {
                    continue;
                }
                let mut supported = false;
                for &ri in &self.supports[a] {
                    let rule = &gp.rules[ri];
                    if body_val(rule, &self.val) == BodyVal::False {
                        continue;
                    }
                    match &rule.head {
                        GroundHead::Normal(_) => supported = true,
                        GroundHead::Choice { elems, .. } => {
                            if elems.iter().any(|e| {
                                e.atom == a && cond_val(&e.pos, &e.naf, &self.val) != BodyVal::False
                            }) {
                                supported = true;
                            }
                        }
                        GroundHead::None => {}
                    }
                    if supported {
                        break;
                    }
                }
                if !supported {
                    match self.val[a] {
                        Val::True => return false,
                        Val::Undet => {
                            if !self.assign(a, Val::False) {
                                return false;
                            }
                        }
                        Val::False => {}
                    }
                }
            }
            if self.trail.len() == before {
                return true;
            }
        }
    }

    fn dfs(&mut self, on_model: &mut dyn FnMut(&[Val]) -> ControlFlow<()>) -> ControlFlow<()> {
        let mark = self.trail.len();
        if !self.propagate() {
            self.unwind(mark);
            return ControlFlow::Continue(());
        }
        let next = (0..self.val.len()).find(|&a| self.val[a] == Val::Undet);
        let Some(decide) = next else {
            let flow = if stable_bits(self.gp, &self.val) {
                on_model(&self.val)
            } else {
                ControlFlow::Continue(())
            };
            self.unwind(mark);
            return flow;
        };
        for v in [Val::False, Val::True] {
            let branch_mark = self.trail.len();
            if self.assign(decide, v) && self.dfs(on_model).is_break() {
                self.unwind(mark);
                return ControlFlow::Break(());
            }
            self.unwind(branch_mark);
        }
        self.unwind(mark);
        ControlFlow::Continue(())
    }
}

fn candidate_bits(gp: &GroundProgram, candidate: &BTreeSet<Atom>) -> Option<Vec<bool>> {
    let mut bits = vec![false; gp.atom_count()];
    for a in candidate {
        bits[gp.id_of(a)?] = true;
    }
    Some(bits)
}

fn agg_true_bits(agg: &GroundAgg, bits: &[bool]) -> bool {
    let mut satisfied: BTreeSet<&Vec<Term>> = BTreeSet::new();
    for e in &agg.elems {
        if e.pos.iter().all(|&p| bits[p]) && e.naf.iter().all(|&n| !bits[n]) {
            satisfied.insert(&e.tuple);
        }
    }
    match agg.kind {
        AggKind::Count => agg.target == Term::Int(satisfied.len() as i64),
        AggKind::Max => satisfied
            .iter()
            .filter_map(|t| t.first())
            .max()
            .is_some_and(|m| *m == agg.target),
        AggKind::Min => satisfied
            .iter()
            .filter_map(|t| t.first())
            .min()
            .is_some_and(|m| *m == agg.target),
    }
}

fn body_true_bits(rule: &GroundRule, bits: &[bool]) -> bool {
    rule.pos.iter().all(|&p| bits[p])
        && rule.naf.iter().all(|&n| !bits[n])
        && rule.aggs.iter().all(|agg| agg_true_bits(agg, bits))
}

/// Stability of a complete assignment: classical satisfaction plus equality
/// with the least model of the reduct. Chosen choice atoms are derivable in
/// the reduct through their rule's positive body and their element's
/// positive condition.
fn stable_bits(gp: &GroundProgram, val: &[Val]) -> bool {
    let bits: Vec<bool> = val.iter().map(|v| *v == Val::True).collect();
    stable_from_bits(gp, &bits)
}

fn stable_from_bits(gp: &GroundProgram, bits: &[bool]) -> bool {
    // 1. Satisfaction.
    for rule in &gp.rules {
        if !body_true_bits(rule, bits) {
            continue;
        }
        match &rule.head {
            GroundHead::Normal(h) => {
                if !bits[*h] {
                    return false;
                }
            }
            GroundHead::None => return false,
            GroundHead::Choice {
                lower,
                upper,
                elems,
            } => {
                let mut chosen: BTreeSet<AtomId> = BTreeSet::new();
                for e in elems {
                    if bits[e.atom]
                        && e.pos.iter().all(|&p| bits[p])
                        && e.naf.iter().all(|&n| !bits[n])
                    {
                        chosen.insert(e.atom);
                    }
                }
                let n = chosen.len() as i64;
                if lower.is_some_and(|l| n < l) || upper.is_some_and(|u| n > u) {
                    return false;
                }
            }
        }
    }
    // 2. Least model of the reduct.
    let mut least = vec![false; bits.len()];
    loop {
        let mut changed = false;
        for rule in &gp.rules {
            // Negation and aggregates are evaluated against the candidate.
            if rule.naf.iter().any(|&n| bits[n]) {
                continue;
            }
            if !rule.aggs.iter().all(|agg| agg_true_bits(agg, bits)) {
                continue;
            }
            match &rule.head {
                GroundHead::Normal(h) => {
                    if !least[*h] && rule.pos.iter().all(|&p| least[p]) {
                        least[*h] = true;
                        changed = true;
                    }
                }
                GroundHead::Choice { elems, .. } => {
                    for e in elems {
                        if bits[e.atom]
                            && !least[e.atom]
                            && e.naf.iter().all(|&n| !bits[n])
                            && rule.pos.iter().all(|&p| least[p])
                            && e.pos.iter().all(|&p| least[p])
                        {
                            least[e.atom] = true;
                            changed = true;
                        }
                    }
                }
                GroundHead::None => {}
            }
        }
        if !changed {
            break;
        }
    }
    least == bits
}

/// True iff `candidate` is a stable model of `gp`. Atoms outside the atom
/// table cannot be supported, so such candidates are never stable.
pub fn check_stable(gp: &GroundProgram, candidate: &BTreeSet<Atom>) -> bool {
    match candidate_bits(gp, candidate) {
        Some(bits) => stable_from_bits(gp, &bits),
        None => false,
    }
}

/// Objective value of a model: the sum over the first components of the
/// distinct satisfied weight tuples. `Err` carries the offending tuple.
fn objective_of(gp: &GroundProgram, bits: &[bool]) -> Option<Result<i64, AspError>> {
    let obj = gp.objective.as_ref()?;
    let mut satisfied: BTreeSet<&Vec<Term>> = BTreeSet::new();
    for e in &obj.elems {
        if e.pos.iter().all(|&p| bits[p]) && e.naf.iter().all(|&n| !bits[n]) {
            satisfied.insert(&e.tuple);
        }
    }
    let mut sum = 0i64;
    for t in satisfied {
        match t.first() {
            Some(Term::Int(w)) => sum += *w,
            Some(other) => {
                return Some(Err(AspError::NonIntegerWeight {
                    term: other.to_string(),
                }));
            }
            None => {}
        }
    }
    Some(Ok(sum))
}

pub(crate) fn model_from_bits(gp: &GroundProgram, bits: &[bool]) -> AnswerSet {
    let atoms: BTreeSet<Atom> = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| gp.atom(i).clone())
        .collect();
    // A model of an optimizing program carries its objective; a non-integer
    // weight leaves it unset here (solve_optimal escalates instead).
    let objective_value = objective_of(gp, bits).and_then(|r| r.ok());
    AnswerSet {
        atoms,
        objective_value,
    }
}

/// Enumerates stable models in the documented order, stopping after
/// `max_models` when given.
pub fn solve(gp: &GroundProgram, max_models: Option<usize>) -> Vec<AnswerSet> {
    let mut out = Vec::new();
    if max_models == Some(0) {
        return out;
    }
    let mut search = Search::new(gp);
    let _ = search.dfs(&mut |val| {
        let bits: Vec<bool> = val.iter().map(|v| *v == Val::True).collect();
        out.push(model_from_bits(gp, &bits));
        if max_models.is_some_and(|m| out.len() >= m) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    out
}

/// Returns an optimal answer set (per the program's objective sense), or
/// `None` when the program is inconsistent. Ties go to the model that
/// enumerates first.
pub fn solve_optimal(gp: &GroundProgram) -> Result<Option<AnswerSet>, AspError> {
    let sense = gp
        .objective
        .as_ref()
        .map(|o| o.sense)
        .unwrap_or(OptSense::Maximize);
    let mut best: Option<(i64, AnswerSet)> = None;
    let mut failure: Option<AspError> = None;
    let mut search = Search::new(gp);
    let _ = search.dfs(&mut |val| {
        let bits: Vec<bool> = val.iter().map(|v| *v == Val::True).collect();
        let objective = match objective_of(gp, &bits) {
            None => Some(Ok(0)),
            some => some,
        };
        match objective {
            Some(Ok(value)) => {
                let better = match &best {
                    None => true,
                    Some((b, _)) => match sense {
                        OptSense::Maximize => value > *b,
                        OptSense::Minimize => value < *b,
                    },
                };
                if better {
                    let mut model = model_from_bits(gp, &bits);
                    model.objective_value = Some(value);
                    best = Some((value, model));
                }
                ControlFlow::Continue(())
            }
            Some(Err(e)) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
            None => unreachable!("objective handled above"),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(best.map(|(_, m)| m))
}
