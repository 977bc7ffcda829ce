//! The discrete-event engine: contexts with managed buffers, scripted
//! sensors, output streams and a deterministic virtual-time scheduler.
//!
//! Determinism: every event carries a (time, seq) key where seq is the
//! global insertion order; the queue pops the least key. Two runs of the
//! same scenario therefore produce byte-identical traces.

use std::collections::{BTreeMap, BTreeSet};

use amcs_packing::{
    apply, decode, evaluate, AssembledPackage, BufferState, IdGen, Ingest, PackError,
};
use asp_engine::{AspError, Limits, Term};
use thiserror::Error;

use crate::relout::relout;
use crate::trace::{render_jsonl, TraceKind, TraceLine};
use crate::types::{BeliefSet, ContextSpec, DataSet, SensorSpec, SpecPatch, Trigger};

/// Hard faults; soft findings go to the trace as directive warnings.
#[derive(Debug, Error)]
pub enum EngineError {
    /// A dispatch target that is neither a context nor an output stream.
    #[error("unknown stakeholder `{0}`")]
    UnknownStakeholder(String),
    #[error("unknown context `{0}`")]
    UnknownContext(String),
    /// A computation was requested while one is still running.
    #[error("context `{0}` is already computing")]
    ContextBusy(String),
    #[error("cannot start a computation over an empty batch in `{0}`")]
    EmptyBatch(String),
    /// A malformed scenario, reported with a path to the offending part.
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pack(#[from] PackError),
    #[error(transparent)]
    Asp(#[from] AspError),
}

/// Scheduled work. `Deliver` is the transport leg of a dispatch; the rest
/// are context lifecycle steps.
#[derive(Debug)]
enum Event {
    Deliver {
        to: String,
        ds: DataSet,
        computation: Option<Term>,
    },
    Evaluate {
        ctx: String,
    },
    Tick {
        ctx: String,
    },
    Belief {
        ctx: String,
        computation: Term,
        bs: BeliefSet,
    },
    Eoc {
        ctx: String,
        computation: Term,
    },
}

#[derive(Debug)]
struct Busy {
    computation: Term,
    patch: Option<SpecPatch>,
}

#[derive(Debug)]
struct ContextRuntime {
    spec: ContextSpec,
    buffer: BufferState,
    busy: Option<Busy>,
    /// The buffer changed while the context was busy (or a tick was
    /// missed); forces a re-evaluation when the computation ends.
    dirty: bool,
    /// An Evaluate event is queued; dedupes same-time arrivals.
    eval_pending: bool,
    /// A Tick event is queued for this time.
    tick_pending: Option<u64>,
}

/// Builder for a validated [`Engine`].
#[derive(Debug, Default)]
pub struct EngineBuilder {
    scenario: String,
    contexts: Vec<ContextSpec>,
    sensors: Vec<SensorSpec>,
    streams: Vec<String>,
    limits: Limits,
}

impl EngineBuilder {
    pub fn context(mut self, spec: ContextSpec) -> Self {
        self.contexts.push(spec);
        self
    }

    pub fn sensor(mut self, sensor: SensorSpec) -> Self {
        self.sensors.push(sensor);
        self
    }

    pub fn stream(mut self, name: impl Into<String>) -> Self {
        self.streams.push(name.into());
        self
    }

    pub fn limits(mut self, limits: Limits) -> Self {
        self.limits = limits;
        self
    }

    /// Validates the scenario wiring and seeds the event queue with every
    /// sensor emission. Validation failures name the offending component.
    pub fn build(self) -> Result<Engine, EngineError> {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for n in self
            .contexts
            .iter()
            .map(|c| c.name.as_str())
            .chain(self.sensors.iter().map(|s| s.name.as_str()))
            .chain(self.streams.iter().map(|s| s.as_str()))
        {
            if n.is_empty() {
                return Err(EngineError::Invalid("empty component name".into()));
            }
            if !names.insert(n) {
                return Err(EngineError::Invalid(format!(
                    "duplicate component name `{n}`"
                )));
            }
        }
        let context_names: BTreeSet<&str> = self.contexts.iter().map(|c| c.name.as_str()).collect();
        let stream_names: BTreeSet<&str> = self.streams.iter().map(|s| s.as_str()).collect();

        for c in &self.contexts {
            validate_trigger(&c.name, c.trigger)?;
            validate_output_rules(&c.name, &c.output_rules, &context_names, &stream_names)?;
        }
        for s in &self.sensors {
            for t in &s.targets {
                if !context_names.contains(t.as_str()) {
                    return Err(EngineError::Invalid(format!(
                        "sensor `{}`: target `{t}` is not a context",
                        s.name
                    )));
                }
            }
            let mut last = 0;
            for (i, (t, info)) in s.script.iter().enumerate() {
                if *t < last {
                    return Err(EngineError::Invalid(format!(
                        "sensor `{}`: script[{i}] goes back in time",
                        s.name
                    )));
                }
                last = *t;
                if info.is_empty() {
                    return Err(EngineError::Invalid(format!(
                        "sensor `{}`: script[{i}] has an empty info set",
                        s.name
                    )));
                }
                if info.contains(&Term::constant("eoc")) {
                    return Err(EngineError::Invalid(format!(
                        "sensor `{}`: script[{i}] emits eoc (sensors have no computations)",
                        s.name
                    )));
                }
            }
        }

        let mut engine = Engine {
            clock: 0,
            event_seq: 0,
            trace_seq: 0,
            queue: BTreeMap::new(),
            contexts: self
                .contexts
                .into_iter()
                .map(|spec| {
                    let buffer = BufferState {
                        emit_arrival: spec.emit_arrival_facts,
                        ..BufferState::default()
                    };
                    (
                        spec.name.clone(),
                        ContextRuntime {
                            spec,
                            buffer,
                            busy: None,
                            dirty: false,
                            eval_pending: false,
                            tick_pending: None,
                        },
                    )
                })
                .collect(),
            streams: self.streams.into_iter().map(|s| (s, Vec::new())).collect(),
            ids: IdGen::default(),
            limits: self.limits,
            trace: Vec::new(),
        };
        engine.tr(
            0,
            TraceKind::Header {
                scenario: self.scenario,
            },
        );
        for s in &self.sensors {
            for (t, info) in &s.script {
                for target in &s.targets {
                    engine.push(
                        *t,
                        Event::Deliver {
                            to: target.clone(),
                            ds: DataSet::new(s.name.clone(), info.iter().cloned()),
                            computation: None,
                        },
                    );
                }
            }
        }
        Ok(engine)
    }
}

fn validate_trigger(ctx: &str, trigger: Trigger) -> Result<(), EngineError> {
    if let Trigger::Interval(0) = trigger {
        return Err(EngineError::Invalid(format!(
            "context `{ctx}`: interval trigger with period 0"
        )));
    }
    Ok(())
}

fn validate_output_rules(
    ctx: &str,
    rules: &[crate::types::OutputRule],
    contexts: &BTreeSet<&str>,
    streams: &BTreeSet<&str>,
) -> Result<(), EngineError> {
    for (i, r) in rules.iter().enumerate() {
        if !contexts.contains(r.stakeholder.as_str()) && !streams.contains(r.stakeholder.as_str()) {
            return Err(EngineError::Invalid(format!(
                "context `{ctx}`: output_rules[{i}]: unknown stakeholder `{}`",
                r.stakeholder
            )));
        }
        if r.info == Term::constant("eoc") {
            return Err(EngineError::Invalid(format!(
                "context `{ctx}`: output_rules[{i}]: eoc is reserved for end-of-computation",
            )));
        }
    }
    Ok(())
}

/// The running system.
#[derive(Debug)]
pub struct Engine {
    clock: u64,
    event_seq: u64,
    trace_seq: u64,
    queue: BTreeMap<(u64, u64), Event>,
    contexts: BTreeMap<String, ContextRuntime>,
    streams: BTreeMap<String, Vec<(u64, DataSet)>>,
    ids: IdGen,
    limits: Limits,
    trace: Vec<TraceLine>,
}

impl Engine {
    pub fn builder(scenario: impl Into<String>) -> EngineBuilder {
        EngineBuilder {
            scenario: scenario.into(),
            ..EngineBuilder::default()
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// True when no work is scheduled.
    pub fn is_quiescent(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn context_buffer(&self, name: &str) -> Option<&BufferState> {
        self.contexts.get(name).map(|c| &c.buffer)
    }

    pub fn context_spec(&self, name: &str) -> Option<&ContextSpec> {
        self.contexts.get(name).map(|c| &c.spec)
    }

    pub fn is_busy(&self, name: &str) -> Option<bool> {
        self.contexts.get(name).map(|c| c.busy.is_some())
    }

    /// The computation the context is currently running, if any.
    pub fn current_computation(&self, name: &str) -> Option<&Term> {
        self.contexts
            .get(name)
            .and_then(|c| c.busy.as_ref())
            .map(|b| &b.computation)
    }

    pub fn stream_log(&self, name: &str) -> Option<&[(u64, DataSet)]> {
        self.streams.get(name).map(|v| v.as_slice())
    }

    pub fn trace(&self) -> &[TraceLine] {
        &self.trace
    }

    /// The trace as JSON Lines; byte-identical across runs of the same
    /// scenario.
    pub fn render_trace(&self) -> String {
        render_jsonl(&self.trace)
    }

    fn push(&mut self, t: u64, ev: Event) {
        let s = self.event_seq;
        self.event_seq += 1;
        self.queue.insert((t, s), ev);
    }

    fn tr(&mut self, t: u64, kind: TraceKind) {
        let seq = self.trace_seq;
        self.trace_seq += 1;
        self.trace.push(TraceLine { t, seq, kind });
    }

    /// Routes a data set to a stakeholder at the current virtual time.
    ///
    /// The trace records the emission immediately; the matching buffer
    /// append (for context stakeholders) or stream append happens when the
    /// scheduled delivery runs. Unknown stakeholders are a hard error —
    /// nothing is ever dropped silently.
    pub fn dispatch(
        &mut self,
        ds: DataSet,
        computation: Option<Term>,
        stakeholder: &str,
    ) -> Result<(), EngineError> {
        if !self.contexts.contains_key(stakeholder) && !self.streams.contains_key(stakeholder) {
            return Err(EngineError::UnknownStakeholder(stakeholder.to_string()));
        }
        let now = self.clock;
        self.tr(
            now,
            TraceKind::Output {
                ctx: ds.source.clone(),
                to: stakeholder.to_string(),
                computation: computation.as_ref().map(|c| c.to_string()),
                info: ds.info.iter().map(|t| t.to_string()).collect(),
            },
        );
        self.push(
            now,
            Event::Deliver {
                to: stakeholder.to_string(),
                ds,
                computation,
            },
        );
        Ok(())
    }

    /// Queues a packing evaluation of `name` at the current time (the way
    /// to drive contexts with a manual trigger).
    pub fn evaluate_now(&mut self, name: &str) -> Result<(), EngineError> {
        if !self.contexts.contains_key(name) {
            return Err(EngineError::UnknownContext(name.to_string()));
        }
        self.schedule_eval(name);
        Ok(())
    }

    /// Starts a computation over `batch`: runs the behavior once per
    /// package in order, schedules the resulting belief emissions
    /// `compute_latency` apart and the end-of-computation after the last.
    pub fn start_computation(
        &mut self,
        name: &str,
        batch: Vec<AssembledPackage>,
    ) -> Result<(), EngineError> {
        let now = self.clock;
        let (behavior, latency) = {
            let ctx = self
                .contexts
                .get(name)
                .ok_or_else(|| EngineError::UnknownContext(name.to_string()))?;
            if ctx.busy.is_some() {
                return Err(EngineError::ContextBusy(name.to_string()));
            }
            if batch.is_empty() {
                return Err(EngineError::EmptyBatch(name.to_string()));
            }
            (ctx.spec.behavior.clone(), ctx.spec.compute_latency)
        };
        let comp = self.ids.fresh_comp();
        self.tr(
            now,
            TraceKind::ComputeStart {
                ctx: name.to_string(),
                computation: comp.to_string(),
                packages: batch.len() as u64,
            },
        );
        let mut beliefs: Vec<BeliefSet> = Vec::new();
        let mut patch: Option<SpecPatch> = None;
        for p in &batch {
            let members: Vec<BTreeSet<Term>> = p.members.iter().map(|m| m.info.clone()).collect();
            let (bs, rp) = behavior.run(&p.schema, &members, &self.limits)?;
            beliefs.extend(bs);
            if rp.is_some() {
                patch = rp;
            }
        }
        let n = beliefs.len() as u64;
        for (i, bs) in beliefs.into_iter().enumerate() {
            self.push(
                now + (i as u64 + 1) * latency,
                Event::Belief {
                    ctx: name.to_string(),
                    computation: comp.clone(),
                    bs,
                },
            );
        }
        self.push(
            now + (n + 1) * latency,
            Event::Eoc {
                ctx: name.to_string(),
                computation: comp.clone(),
            },
        );
        self.contexts.get_mut(name).unwrap().busy = Some(Busy {
            computation: comp,
            patch,
        });
        Ok(())
    }

    /// Runs the next scheduled event; returns false when none is left.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let Some(((t, _), ev)) = self.queue.pop_first() else {
            return Ok(false);
        };
        self.clock = t;
        self.exec(ev)?;
        Ok(true)
    }

    /// Processes every event scheduled at or before `t_end`.
    pub fn run_until(&mut self, t_end: u64) -> Result<(), EngineError> {
        while let Some((&(t, _), _)) = self.queue.first_key_value() {
            if t > t_end {
                break;
            }
            self.step()?;
        }
        Ok(())
    }

    /// Runs until no work is left. Interval-triggered contexts re-tick
    /// while their buffers hold records, so scenarios that never consume
    /// them will not quiesce — bound those runs with [`Engine::run_until`].
    pub fn run_to_quiescence(&mut self) -> Result<(), EngineError> {
        while self.step()? {}
        Ok(())
    }

    fn exec(&mut self, ev: Event) -> Result<(), EngineError> {
        match ev {
            Event::Deliver {
                to,
                ds,
                computation,
            } => self.deliver(&to, ds, computation),
            Event::Evaluate { ctx } => {
                let c = self
                    .contexts
                    .get_mut(&ctx)
                    .ok_or_else(|| EngineError::UnknownContext(ctx.clone()))?;
                c.eval_pending = false;
                if c.busy.is_some() {
                    c.dirty = true;
                    return Ok(());
                }
                self.evaluate_context(&ctx)
            }
            Event::Tick { ctx } => {
                let c = self
                    .contexts
                    .get_mut(&ctx)
                    .ok_or_else(|| EngineError::UnknownContext(ctx.clone()))?;
                c.tick_pending = None;
                if c.busy.is_some() {
                    // Missed tick: coalesces into the evaluation scheduled
                    // when the running computation ends.
                    c.dirty = true;
                    return Ok(());
                }
                self.evaluate_context(&ctx)?;
                // Leftover records keep the interval alive: re-tick unless
                // the evaluation started a computation (its end handles
                // rescheduling) or consumed the buffer.
                let c = self.contexts.get(&ctx).unwrap();
                if c.busy.is_none() && !c.buffer.records.is_empty() {
                    self.schedule_tick(&ctx);
                }
                Ok(())
            }
            Event::Belief {
                ctx,
                computation,
                bs,
            } => self.exec_belief(&ctx, computation, bs),
            Event::Eoc { ctx, computation } => self.exec_eoc(&ctx, computation),
        }
    }

    /// The receiving half of a dispatch: streams log, contexts ingest.
    fn deliver(
        &mut self,
        to: &str,
        ds: DataSet,
        computation: Option<Term>,
    ) -> Result<(), EngineError> {
        let now = self.clock;
        if let Some(log) = self.streams.get_mut(to) {
            log.push((now, ds));
            return Ok(());
        }
        let appended;
        let changed;
        {
            let ctx = self
                .contexts
                .get_mut(to)
                .ok_or_else(|| EngineError::UnknownStakeholder(to.to_string()))?;
            let mut engine_tags: BTreeSet<Term> = BTreeSet::new();
            engine_tags.insert(Term::func("created", vec![Term::Int(now as i64)]));
            for rt in &ctx.spec.receive_tags {
                if rt.from.as_deref().is_none_or(|f| f == ds.source) {
                    engine_tags.insert(rt.tag.clone());
                }
            }
            let outcome = ctx.buffer.ingest(
                Ingest {
                    source: ds.source.clone(),
                    computation: computation.clone(),
                    info: ds.info.clone(),
                    engine_tags,
                    explicit_id: None,
                },
                &mut self.ids,
            )?;
            changed = outcome.buffer != ctx.buffer;
            appended = outcome.appended;
            ctx.buffer = outcome.buffer;
            ctx.buffer.clock = now;
        }
        if let Some(id) = appended {
            self.tr(
                now,
                TraceKind::Append {
                    ctx: to.to_string(),
                    id: id.to_string(),
                    from: ds.source.clone(),
                    computation: computation.as_ref().map(|c| c.to_string()),
                    info: ds.info.iter().map(|t| t.to_string()).collect(),
                },
            );
        }
        if changed {
            self.arrival_reaction(to);
        }
        Ok(())
    }

    /// What a buffer change triggers, depending on the context's state.
    fn arrival_reaction(&mut self, name: &str) {
        let trigger = {
            let c = self.contexts.get_mut(name).unwrap();
            if c.busy.is_some() {
                c.dirty = true;
                return;
            }
            c.spec.trigger
        };
        match trigger {
            Trigger::OnArrival => self.schedule_eval(name),
            Trigger::Interval(_) => self.schedule_tick(name),
            Trigger::Manual => {}
        }
    }

    fn schedule_eval(&mut self, name: &str) {
        let now = self.clock;
        {
            let c = self.contexts.get_mut(name).unwrap();
            if c.eval_pending {
                return;
            }
            c.eval_pending = true;
        }
        self.push(
            now,
            Event::Evaluate {
                ctx: name.to_string(),
            },
        );
    }

    /// Queues the next interval tick: the first clock multiple of the
    /// period strictly after now. At most one tick is pending per context.
    fn schedule_tick(&mut self, name: &str) {
        let now = self.clock;
        let t = {
            let c = self.contexts.get_mut(name).unwrap();
            let Trigger::Interval(d) = c.spec.trigger else {
                return;
            };
            if c.tick_pending.is_some() {
                return;
            }
            let t = (now / d + 1) * d;
            c.tick_pending = Some(t);
            t
        };
        self.push(
            t,
            Event::Tick {
                ctx: name.to_string(),
            },
        );
    }

    /// Runs the packing program over the context's buffer, interprets the
    /// chosen answer set and applies it. Conflicting directive sets are
    /// refused: the finding goes to the trace and the buffer stays as it
    /// was. Assembled packages start a computation.
    fn evaluate_context(&mut self, name: &str) -> Result<(), EngineError> {
        let now = self.clock;
        let (program, mode, buffer) = {
            let c = self.contexts.get_mut(name).unwrap();
            c.buffer.clock = now;
            (
                c.spec.packing_program.clone(),
                c.spec.eval_mode,
                c.buffer.clone(),
            )
        };
        let Some(answer) = evaluate(&program, &buffer, mode, &self.limits)? else {
            self.tr(
                now,
                TraceKind::Eval {
                    ctx: name.to_string(),
                    answer: false,
                    packages: 0,
                },
            );
            return Ok(());
        };
        let (directives, warnings) = match decode(&answer, &buffer) {
            Ok(res) => res,
            Err(e) => {
                self.tr(
                    now,
                    TraceKind::Eval {
                        ctx: name.to_string(),
                        answer: true,
                        packages: 0,
                    },
                );
                self.tr(
                    now,
                    TraceKind::DirectiveWarning {
                        ctx: name.to_string(),
                        message: e.to_string(),
                    },
                );
                return Ok(());
            }
        };
        let outcome = apply(&buffer, &directives);
        self.tr(
            now,
            TraceKind::Eval {
                ctx: name.to_string(),
                answer: true,
                packages: outcome.packages.len() as u64,
            },
        );
        for w in &warnings {
            self.tr(
                now,
                TraceKind::DirectiveWarning {
                    ctx: name.to_string(),
                    message: w.to_string(),
                },
            );
        }
        for w in &outcome.warnings {
            self.tr(
                now,
                TraceKind::DirectiveWarning {
                    ctx: name.to_string(),
                    message: w.to_string(),
                },
            );
        }
        for p in &outcome.packages {
            self.tr(
                now,
                TraceKind::Package {
                    ctx: name.to_string(),
                    schema: p.schema.to_string(),
                    members: p.members.iter().map(|m| m.id.to_string()).collect(),
                },
            );
        }
        {
            let c = self.contexts.get_mut(name).unwrap();
            c.buffer = outcome.buffer;
            c.buffer.clock = now;
        }
        if !outcome.packages.is_empty() {
            self.start_computation(name, outcome.packages)?;
        }
        Ok(())
    }

    /// Emits one belief set: for every stakeholder of the output rules (in
    /// first-occurrence order) the relativised information is dispatched,
    /// unless empty.
    fn exec_belief(
        &mut self,
        name: &str,
        computation: Term,
        bs: BeliefSet,
    ) -> Result<(), EngineError> {
        let now = self.clock;
        self.tr(
            now,
            TraceKind::Belief {
                ctx: name.to_string(),
                computation: computation.to_string(),
                beliefs: bs.beliefs.iter().map(|t| t.to_string()).collect(),
            },
        );
        let rules = self.contexts.get(name).unwrap().spec.output_rules.clone();
        for st in stakeholders_in_order(&rules) {
            let ds = relout(name, &bs, &rules, &st);
            if !ds.info.is_empty() {
                self.dispatch(ds, Some(computation.clone()), &st)?;
            }
        }
        Ok(())
    }

    /// Ends a computation: notifies every stakeholder of the current
    /// output rules, applies a pending respec patch, marks the context
    /// idle and re-evaluates if the buffer changed while busy.
    fn exec_eoc(&mut self, name: &str, computation: Term) -> Result<(), EngineError> {
        let now = self.clock;
        self.tr(
            now,
            TraceKind::Eoc {
                ctx: name.to_string(),
                computation: computation.to_string(),
            },
        );
        let rules = self.contexts.get(name).unwrap().spec.output_rules.clone();
        for st in stakeholders_in_order(&rules) {
            self.dispatch(DataSet::eoc(name), Some(computation.clone()), &st)?;
        }
        let patch = {
            let c = self.contexts.get_mut(name).unwrap();
            c.busy.take().and_then(|b| b.patch)
        };
        if let Some(p) = patch {
            self.apply_patch(name, p)?;
        }
        let (dirty, trigger, has_records) = {
            let c = self.contexts.get_mut(name).unwrap();
            let d = c.dirty;
            c.dirty = false;
            (d, c.spec.trigger, !c.buffer.records.is_empty())
        };
        match trigger {
            Trigger::OnArrival if dirty => self.schedule_eval(name),
            Trigger::Interval(_) if dirty || has_records => self.schedule_tick(name),
            _ => {}
        }
        Ok(())
    }

    /// Validates and installs a respec patch returned by a behavior.
    fn apply_patch(&mut self, name: &str, patch: SpecPatch) -> Result<(), EngineError> {
        if let Some(t) = patch.trigger {
            validate_trigger(name, t)?;
        }
        if let Some(rules) = &patch.output_rules {
            let context_names: BTreeSet<&str> = self.contexts.keys().map(|s| s.as_str()).collect();
            let stream_names: BTreeSet<&str> = self.streams.keys().map(|s| s.as_str()).collect();
            validate_output_rules(name, rules, &context_names, &stream_names)?;
        }
        self.contexts.get_mut(name).unwrap().spec.apply_patch(patch);
        Ok(())
    }
}

/// Distinct stakeholders in first-occurrence order — the deterministic
/// emission order of [`Engine::exec_belief`] and end-of-computation
/// notifications.
fn stakeholders_in_order(rules: &[crate::types::OutputRule]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rules {
        if !out.iter().any(|s| s == &r.stakeholder) {
            out.push(r.stakeholder.clone());
        }
    }
    out
}
