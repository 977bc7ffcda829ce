//! Scenario files: a structured key-value tree (TOML) describing contexts,
//! sensors, output streams and wiring. Rule programs are referenced by
//! file path relative to the scenario file and parsed eagerly at load, so
//! every error surfaces before a simulation starts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use amcs_runtime::{
    Behavior, BeliefSet, ContextSpec, Engine, EngineError, OutputRule, ReceiverTag, ScriptRow,
    SensorSpec, Trigger,
};
use asp_engine::{parse_program, parse_term_str, Limits, Program, Term};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::CliError;

/// A cross-validation failure, with the path to the offending field.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

fn err<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ValidationError> {
    Err(ValidationError {
        path: path.into(),
        message: message.into(),
    })
}

/// The serialized scenario. Scalar and plain-array fields come before the
/// table arrays so the TOML writer never has to emit a value after a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioToml {
    pub name: String,
    /// Unit label for the virtual clock; informational.
    #[serde(default = "default_clock_units")]
    pub clock_units: String,
    /// Reserved for randomized behaviors; the engine itself is
    /// deterministic and does not consume it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_streams: Vec<String>,
    #[serde(default)]
    pub contexts: Vec<ContextToml>,
    #[serde(default)]
    pub sensors: Vec<SensorToml>,
}

fn default_clock_units() -> String {
    "ms".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextToml {
    pub name: String,
    /// Path of the packing program, relative to the scenario file.
    pub packing_program: String,
    #[serde(default = "default_eval_mode")]
    pub eval_mode: String,
    #[serde(default)]
    pub compute_latency: u64,
    #[serde(default)]
    pub emit_arrival_facts: bool,
    #[serde(default)]
    pub trigger: TriggerToml,
    pub behavior: BehaviorToml,
    #[serde(default)]
    pub output_rules: Vec<OutputRuleToml>,
    #[serde(default)]
    pub receive_tags: Vec<ReceiveTagToml>,
}

fn default_eval_mode() -> String {
    "first".to_string()
}

/// `"on_arrival"`, `"manual"`, or `{ interval = <period> }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TriggerToml {
    Named(String),
    Interval { interval: u64 },
}

impl Default for TriggerToml {
    fn default() -> Self {
        TriggerToml::Named("on_arrival".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorToml {
    /// `"scripted"` or `"logic_program"`.
    pub kind: String,
    /// For logic programs: path of the knowledge base, relative to the
    /// scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    /// For scripted behaviors: the match table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<RowToml>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowToml {
    /// Package schema this row responds to; absent matches any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    /// Info terms that must all occur in the package.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub requires: Vec<String>,
    /// Belief sets, each a list of term strings.
    #[serde(default)]
    pub beliefs: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRuleToml {
    pub stakeholder: String,
    pub info: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pos: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub neg: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiveTagToml {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorToml {
    pub name: String,
    pub targets: Vec<String>,
    #[serde(default)]
    pub script: Vec<EmissionToml>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionToml {
    pub t: u64,
    pub info: Vec<String>,
}

/// A scenario after cross-validation: the raw spec plus runtime-ready
/// components with all referenced programs parsed.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub spec: ScenarioToml,
    contexts: Vec<ContextSpec>,
    sensors: Vec<SensorSpec>,
    streams: Vec<String>,
}

impl LoadedScenario {
    /// Builds a fresh engine; each call starts from a clean state, so a
    /// scenario can be run any number of times.
    pub fn build_engine(&self, limits: Limits) -> Result<Engine, EngineError> {
        let mut b = Engine::builder(self.spec.name.clone()).limits(limits);
        for c in &self.contexts {
            b = b.context(c.clone());
        }
        for s in &self.sensors {
            b = b.sensor(s.clone());
        }
        for s in &self.streams {
            b = b.stream(s.clone());
        }
        b.build()
    }
}

/// Reads, parses and cross-validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let spec: ScenarioToml = toml::from_str(&text).map_err(|e| CliError::Toml {
        file: path.display().to_string(),
        source: Box::new(e),
    })?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let loaded = validate(spec, dir)?;
    Ok(loaded)
}

/// Writes the spec back out as TOML. Round trip through save and load is
/// the identity on [`ScenarioToml`].
pub fn save_scenario(spec: &ScenarioToml, path: &Path) -> Result<(), CliError> {
    let text = toml::to_string_pretty(spec).expect("scenario specs always serialize");
    fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn parse_term_at(s: &str, path: &str) -> Result<Term, ValidationError> {
    match parse_term_str(s) {
        Ok(t) => Ok(t),
        Err(e) => err(path, format!("bad term `{s}`: {e}")),
    }
}

fn load_program(rel: &str, dir: &Path, path: &str) -> Result<Program, ValidationError> {
    let file: PathBuf = dir.join(rel);
    let text = match fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => return err(path, format!("cannot read `{}`: {e}", file.display())),
    };
    match parse_program(&text) {
        Ok(p) => Ok(p),
        Err(e) => err(path, format!("`{}`: {e}", file.display())),
    }
}

fn validate(spec: ScenarioToml, dir: &Path) -> Result<LoadedScenario, ValidationError> {
    if spec.name.is_empty() {
        return err("name", "must not be empty");
    }

    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let named = spec
        .contexts
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("contexts[{i}].name"), c.name.as_str()))
        .chain(
            spec.sensors
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("sensors[{i}].name"), s.name.as_str())),
        )
        .chain(
            spec.output_streams
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("output_streams[{i}]"), s.as_str())),
        );
    for (path, name) in named {
        if name.is_empty() {
            return err(path, "must not be empty");
        }
        if !seen.insert(name) {
            return err(path, format!("duplicate component name `{name}`"));
        }
    }
    let context_names: BTreeSet<&str> = spec.contexts.iter().map(|c| c.name.as_str()).collect();
    let stream_names: BTreeSet<&str> = spec.output_streams.iter().map(|s| s.as_str()).collect();

    let mut contexts = Vec::new();
    for (i, c) in spec.contexts.iter().enumerate() {
        let at = |f: &str| format!("contexts[{i}].{f}");

        let program = load_program(&c.packing_program, dir, &at("packing_program"))?;

        let trigger = match &c.trigger {
            TriggerToml::Named(n) => match n.as_str() {
                "on_arrival" => Trigger::OnArrival,
                "manual" => Trigger::Manual,
                other => {
                    return err(
                        at("trigger"),
                        format!("unknown trigger `{other}` (expected on_arrival, manual, or {{ interval = n }})"),
                    )
                }
            },
            TriggerToml::Interval { interval: 0 } => {
                return err(at("trigger"), "interval must be positive")
            }
            TriggerToml::Interval { interval } => Trigger::Interval(*interval),
        };

        let eval_mode = match c.eval_mode.as_str() {
            "first" => amcs_packing::EvalMode::First,
            "optimal" => amcs_packing::EvalMode::Optimal,
            other => {
                return err(
                    at("eval_mode"),
                    format!("unknown mode `{other}` (expected first or optimal)"),
                )
            }
        };

        let behavior = match c.behavior.kind.as_str() {
            "scripted" => {
                if c.behavior.program.is_some() {
                    return err(
                        at("behavior.program"),
                        "scripted behaviors take rows, not a program",
                    );
                }
                let mut rows = Vec::new();
                for (j, r) in c.behavior.rows.iter().enumerate() {
                    let rat = |f: &str| format!("contexts[{i}].behavior.rows[{j}].{f}");
                    let schema = match &r.schema {
                        Some(s) => Some(parse_term_at(s, &rat("schema"))?),
                        None => None,
                    };
                    let mut requires = Vec::new();
                    for (k, s) in r.requires.iter().enumerate() {
                        requires.push(parse_term_at(s, &rat(&format!("requires[{k}]")))?);
                    }
                    let mut beliefs = Vec::new();
                    for (k, bs) in r.beliefs.iter().enumerate() {
                        let mut terms = Vec::new();
                        for (l, s) in bs.iter().enumerate() {
                            terms.push(parse_term_at(s, &rat(&format!("beliefs[{k}][{l}]")))?);
                        }
                        beliefs.push(BeliefSet::new(terms));
                    }
                    rows.push(ScriptRow::new(schema, requires, beliefs));
                }
                Behavior::Scripted(rows)
            }
            "logic_program" => {
                if !c.behavior.rows.is_empty() {
                    return err(
                        at("behavior.rows"),
                        "logic-program behaviors take a program, not rows",
                    );
                }
                let Some(rel) = &c.behavior.program else {
                    return err(
                        at("behavior.program"),
                        "required for logic_program behaviors",
                    );
                };
                Behavior::LogicProgram(load_program(rel, dir, &at("behavior.program"))?)
            }
            other => {
                return err(
                    at("behavior.kind"),
                    format!("unknown kind `{other}` (expected scripted or logic_program)"),
                )
            }
        };

        let mut output_rules = Vec::new();
        for (j, r) in c.output_rules.iter().enumerate() {
            let rat = |f: &str| format!("contexts[{i}].output_rules[{j}].{f}");
            if !context_names.contains(r.stakeholder.as_str())
                && !stream_names.contains(r.stakeholder.as_str())
            {
                return err(
                    rat("stakeholder"),
                    format!("unknown stakeholder `{}`", r.stakeholder),
                );
            }
            let info = parse_term_at(&r.info, &rat("info"))?;
            if info == Term::constant("eoc") {
                return err(rat("info"), "eoc is reserved for end-of-computation");
            }
            let mut pos = Vec::new();
            for (k, s) in r.pos.iter().enumerate() {
                pos.push(parse_term_at(s, &rat(&format!("pos[{k}]")))?);
            }
            let mut neg = Vec::new();
            for (k, s) in r.neg.iter().enumerate() {
                neg.push(parse_term_at(s, &rat(&format!("neg[{k}]")))?);
            }
            output_rules.push(OutputRule::new(r.stakeholder.clone(), info, pos, neg));
        }

        let mut receive_tags = Vec::new();
        for (j, rt) in c.receive_tags.iter().enumerate() {
            let tag = parse_term_at(&rt.tag, &format!("contexts[{i}].receive_tags[{j}].tag"))?;
            receive_tags.push(ReceiverTag {
                from: rt.from.clone(),
                tag,
            });
        }

        let mut built = ContextSpec::new(c.name.clone(), behavior, program)
            .with_trigger(trigger)
            .with_eval_mode(eval_mode)
            .with_output_rules(output_rules)
            .with_compute_latency(c.compute_latency)
            .with_receive_tags(receive_tags);
        if c.emit_arrival_facts {
            built = built.with_arrival_facts();
        }
        contexts.push(built);
    }

    let mut sensors = Vec::new();
    for (i, s) in spec.sensors.iter().enumerate() {
        for (j, t) in s.targets.iter().enumerate() {
            if !context_names.contains(t.as_str()) {
                return err(
                    format!("sensors[{i}].targets[{j}]"),
                    format!("`{t}` is not a context"),
                );
            }
        }
        let mut script = Vec::new();
        let mut last = 0;
        for (j, e) in s.script.iter().enumerate() {
            let eat = |f: &str| format!("sensors[{i}].script[{j}].{f}");
            if e.t < last {
                return err(eat("t"), "emission times must be sorted ascending");
            }
            last = e.t;
            if e.info.is_empty() {
                return err(eat("info"), "must not be empty");
            }
            let mut info = BTreeSet::new();
            for (k, term) in e.info.iter().enumerate() {
                let t = parse_term_at(term, &eat(&format!("info[{k}]")))?;
                if t == Term::constant("eoc") {
                    return err(
                        eat(&format!("info[{k}]")),
                        "sensors have no computations to end",
                    );
                }
                info.insert(t);
            }
            script.push((e.t, info));
        }
        sensors.push(SensorSpec::new(s.name.clone(), s.targets.clone(), script));
    }

    let streams = spec.output_streams.clone();
    Ok(LoadedScenario {
        spec,
        contexts,
        sensors,
        streams,
    })
}
