//! The three subcommands: solve, run, oracle.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use asp_engine::{
    ground, oracle_answer_sets, parse_program, render_atoms, solve, solve_optimal, Atom, Head,
    Limits, Program, ORACLE_BUDGET_DEFAULT,
};

use crate::scenario::load_scenario;
use crate::CliError;

/// What a subcommand produced; the binary prints the streams and exits
/// with the code.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct CmdOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutcome {
    fn failure(e: impl std::fmt::Display) -> Self {
        CmdOutcome {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        }
    }
}

/// Grounding limits, with environment overrides.
pub fn limits_from_env() -> Result<Limits, CliError> {
    let mut l = Limits::default();
    if let Some(v) = env_usize("AMCS_MAX_GROUND_ATOMS")? {
        l.max_ground_atoms = v;
    }
    if let Some(v) = env_usize("AMCS_MAX_TERM_DEPTH")? {
        l.max_term_depth = v;
    }
    Ok(l)
}

/// Free-atom budget of the brute-force oracle, with environment override.
pub fn oracle_budget_from_env() -> Result<usize, CliError> {
    Ok(env_usize("AMCS_ORACLE_BUDGET")?.unwrap_or(ORACLE_BUDGET_DEFAULT))
}

fn env_usize(name: &str) -> Result<Option<usize>, CliError> {
    match std::env::var(name) {
        Ok(v) => v.parse::<usize>().map(Some).map_err(|_| CliError::Env {
            name: name.to_string(),
            value: v,
        }),
        Err(_) => Ok(None),
    }
}

fn read_program(path: &Path) -> Result<Program, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_program(&text).map_err(|e| CliError::InFile {
        path: path.display().to_string(),
        source: e,
    })
}

/// A facts file is a program consisting solely of ground facts.
fn read_facts(path: &Path) -> Result<BTreeSet<Atom>, CliError> {
    let program = read_program(path)?;
    let reject = |what: &str| CliError::Facts {
        path: path.display().to_string(),
        found: what.to_string(),
    };
    if !program.optimize.is_empty() {
        return Err(reject("an optimization statement"));
    }
    let mut facts = BTreeSet::new();
    for r in &program.rules {
        let Head::Normal(a) = &r.head else {
            return Err(reject("a non-fact rule"));
        };
        if !r.body.is_empty() {
            return Err(reject("a rule with a body"));
        }
        if !a.args.iter().all(|t| t.is_ground()) {
            return Err(reject("a non-ground fact"));
        }
        facts.insert(a.clone());
    }
    Ok(facts)
}

/// How many answer sets `solve` may enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelCount {
    Bounded(usize),
    All,
}

/// `amcs solve <program> <facts> [--models N | --all] [--opt]`
///
/// Prints every found answer set as a `% answer N` header followed by its
/// atoms in canonical order; `--opt` prints one optimal answer set and a
/// `% optimum V` line. Exit 0 with at least one model, 1 when
/// inconsistent, 2 on errors.
pub fn cmd_solve(program: &Path, facts: &Path, models: ModelCount, opt: bool) -> CmdOutcome {
    match solve_inner(program, facts, models, opt) {
        Ok(out) => out,
        Err(e) => CmdOutcome::failure(e),
    }
}

fn solve_inner(
    program: &Path,
    facts: &Path,
    models: ModelCount,
    opt: bool,
) -> Result<CmdOutcome, CliError> {
    let limits = limits_from_env()?;
    let p = read_program(program)?;
    let f = read_facts(facts)?;
    let gp = ground(&p, &f, &limits)?;

    let mut stdout = String::new();
    if opt {
        let Some(best) = solve_optimal(&gp)? else {
            return Ok(unsatisfiable());
        };
        stdout.push_str("% answer 1\n");
        stdout.push_str(&render_atoms(&best.atoms));
        if let Some(v) = best.objective_value {
            stdout.push_str(&format!("% optimum {v}\n"));
        }
        return Ok(CmdOutcome {
            code: 0,
            stdout,
            stderr: String::new(),
        });
    }

    let cap = match models {
        ModelCount::Bounded(n) => Some(n),
        ModelCount::All => None,
    };
    let found = solve(&gp, cap);
    if found.is_empty() {
        return Ok(unsatisfiable());
    }
    for (i, ans) in found.iter().enumerate() {
        stdout.push_str(&format!("% answer {}\n", i + 1));
        stdout.push_str(&render_atoms(&ans.atoms));
    }
    Ok(CmdOutcome {
        code: 0,
        stdout,
        stderr: String::new(),
    })
}

fn unsatisfiable() -> CmdOutcome {
    CmdOutcome {
        code: 1,
        stdout: "% unsatisfiable\n".to_string(),
        stderr: String::new(),
    }
}

/// `amcs run <scenario> [--until T] [--trace out]`
///
/// Simulates to T (or quiescence without `--until`) and writes the JSONL
/// trace to the `--trace` path, or to stdout. Exit 0, or 2 on validation
/// and runtime errors.
pub fn cmd_run(scenario: &Path, until: Option<u64>, trace_out: Option<&Path>) -> CmdOutcome {
    match run_inner(scenario, until, trace_out) {
        Ok(out) => out,
        Err(e) => CmdOutcome::failure(e),
    }
}

fn run_inner(
    scenario: &Path,
    until: Option<u64>,
    trace_out: Option<&Path>,
) -> Result<CmdOutcome, CliError> {
    let limits = limits_from_env()?;
    let loaded = load_scenario(scenario)?;
    let mut engine = loaded.build_engine(limits)?;
    match until {
        Some(t) => engine.run_until(t)?,
        None => engine.run_to_quiescence()?,
    }
    let trace = engine.render_trace();
    match trace_out {
        Some(path) => {
            fs::write(path, &trace).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            Ok(CmdOutcome::default())
        }
        None => Ok(CmdOutcome {
            code: 0,
            stdout: trace,
            stderr: String::new(),
        }),
    }
}

/// `amcs oracle <program> <facts>`
///
/// Exhaustive brute-force listing of all stable models, in the oracle's
/// deterministic order; used to cross-check `solve --all`. Exit 2 when the
/// input exceeds the free-atom budget.
pub fn cmd_oracle(program: &Path, facts: &Path) -> CmdOutcome {
    match oracle_inner(program, facts) {
        Ok(out) => out,
        Err(e) => CmdOutcome::failure(e),
    }
}

fn oracle_inner(program: &Path, facts: &Path) -> Result<CmdOutcome, CliError> {
    let limits = limits_from_env()?;
    let budget = oracle_budget_from_env()?;
    let p = read_program(program)?;
    let f = read_facts(facts)?;
    let gp = ground(&p, &f, &limits)?;
    let found = oracle_answer_sets(&gp, budget)?;
    if found.is_empty() {
        return Ok(unsatisfiable());
    }
    let mut stdout = String::new();
    for (i, ans) in found.iter().enumerate() {
        stdout.push_str(&format!("% answer {}\n", i + 1));
        stdout.push_str(&render_atoms(&ans.atoms));
    }
    Ok(CmdOutcome {
        code: 0,
        stdout,
        stderr: String::new(),
    })
}
