//! Domain types shared by the runtime: data sets, belief sets, output
//! rules and context/sensor descriptions.

use std::collections::BTreeSet;

use asp_engine::{Program, Term};

use crate::behavior::Behavior;

/// A piece of communication between system components: who produced it and
/// the set of information terms it carries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSet {
    pub source: String,
    pub info: BTreeSet<Term>,
}

impl DataSet {
    pub fn new(source: impl Into<String>, info: impl IntoIterator<Item = Term>) -> Self {
        DataSet {
            source: source.into(),
            info: info.into_iter().collect(),
        }
    }

    /// The end-of-computation notification a context sends when it goes idle.
    pub fn eoc(source: impl Into<String>) -> Self {
        DataSet::new(source, [Term::constant("eoc")])
    }
}

/// One belief set produced by a context behavior.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BeliefSet {
    pub beliefs: BTreeSet<Term>,
}

impl BeliefSet {
    pub fn new(beliefs: impl IntoIterator<Item = Term>) -> Self {
        BeliefSet {
            beliefs: beliefs.into_iter().collect(),
        }
    }

    pub fn holds(&self, t: &Term) -> bool {
        self.beliefs.contains(t)
    }
}

/// A conditional emission: when the current belief set supports the body,
/// `info` is shared with `stakeholder`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputRule {
    pub stakeholder: String,
    pub info: Term,
    pub positive_body: BTreeSet<Term>,
    pub negative_body: BTreeSet<Term>,
}

impl OutputRule {
    pub fn new(
        stakeholder: impl Into<String>,
        info: Term,
        positive: impl IntoIterator<Item = Term>,
        negative: impl IntoIterator<Item = Term>,
    ) -> Self {
        OutputRule {
            stakeholder: stakeholder.into(),
            info,
            positive_body: positive.into_iter().collect(),
            negative_body: negative.into_iter().collect(),
        }
    }

    /// An unconditional emission.
    pub fn always(stakeholder: impl Into<String>, info: Term) -> Self {
        OutputRule::new(stakeholder, info, [], [])
    }
}

/// When a context re-evaluates its packing program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    /// After every buffer change while idle (changes while busy coalesce
    /// into one evaluation at end of computation).
    OnArrival,
    /// At virtual-clock multiples of the period, only while idle; missed
    /// ticks coalesce into the next one.
    Interval(u64),
    /// Only when explicitly requested.
    Manual,
}

/// A tag the receiving context attaches to arriving data sets, optionally
/// restricted to data sets from one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceiverTag {
    /// `None` tags every arrival.
    pub from: Option<String>,
    pub tag: Term,
}

/// Partial replacement a behavior may hand back after a computation; every
/// `Some` field overwrites the corresponding part of the context spec once
/// the computation's `eoc` has gone out.
#[derive(Debug, Clone, Default)]
pub struct SpecPatch {
    pub packing_program: Option<Program>,
    pub output_rules: Option<Vec<OutputRule>>,
    pub trigger: Option<Trigger>,
    pub eval_mode: Option<amcs_packing::EvalMode>,
    pub compute_latency: Option<u64>,
}

impl SpecPatch {
    pub fn is_empty(&self) -> bool {
        self.packing_program.is_none()
            && self.output_rules.is_none()
            && self.trigger.is_none()
            && self.eval_mode.is_none()
            && self.compute_latency.is_none()
    }
}

/// Static description of one context.
#[derive(Debug, Clone)]
pub struct ContextSpec {
    pub name: String,
    pub behavior: Behavior,
    pub packing_program: Program,
    pub trigger: Trigger,
    pub eval_mode: amcs_packing::EvalMode,
    pub output_rules: Vec<OutputRule>,
    /// Virtual time between consecutive belief-set emissions of one
    /// computation (and between the last one and the `eoc`).
    pub compute_latency: u64,
    /// Tags this context attaches to arriving data sets.
    pub receive_tags: Vec<ReceiverTag>,
    /// When set, the buffer encoding also emits arrived(id, index) facts.
    pub emit_arrival_facts: bool,
}

impl ContextSpec {
    pub fn new(name: impl Into<String>, behavior: Behavior, packing_program: Program) -> Self {
        ContextSpec {
            name: name.into(),
            behavior,
            packing_program,
            trigger: Trigger::OnArrival,
            eval_mode: amcs_packing::EvalMode::First,
            output_rules: Vec::new(),
            compute_latency: 0,
            receive_tags: Vec::new(),
            emit_arrival_facts: false,
        }
    }

    pub fn with_trigger(mut self, trigger: Trigger) -> Self {
        self.trigger = trigger;
        self
    }

    pub fn with_eval_mode(mut self, mode: amcs_packing::EvalMode) -> Self {
        self.eval_mode = mode;
        self
    }

    pub fn with_output_rules(mut self, rules: Vec<OutputRule>) -> Self {
        self.output_rules = rules;
        self
    }

    pub fn with_compute_latency(mut self, latency: u64) -> Self {
        self.compute_latency = latency;
        self
    }

    pub fn with_receive_tags(mut self, tags: Vec<ReceiverTag>) -> Self {
        self.receive_tags = tags;
        self
    }

    pub fn with_arrival_facts(mut self) -> Self {
        self.emit_arrival_facts = true;
        self
    }

    pub fn apply_patch(&mut self, patch: SpecPatch) {
        if let Some(p) = patch.packing_program {
            self.packing_program = p;
        }
        if let Some(r) = patch.output_rules {
            self.output_rules = r;
        }
        if let Some(t) = patch.trigger {
            self.trigger = t;
        }
        if let Some(m) = patch.eval_mode {
            self.eval_mode = m;
        }
        if let Some(l) = patch.compute_latency {
            self.compute_latency = l;
        }
    }
}

/// A scripted environment component: emits fixed information sets to fixed
/// targets at fixed virtual times.
#[derive(Debug, Clone)]
pub struct SensorSpec {
    pub name: String,
    /// Contexts every emission is delivered to.
    pub targets: Vec<String>,
    /// Emission script, sorted by time ascending.
    pub script: Vec<(u64, BTreeSet<Term>)>,
}

impl SensorSpec {
    pub fn new(
        name: impl Into<String>,
        targets: impl IntoIterator<Item = String>,
        script: Vec<(u64, BTreeSet<Term>)>,
    ) -> Self {
        SensorSpec {
            name: name.into(),
            targets: targets.into_iter().collect(),
            script,
        }
    }
}
