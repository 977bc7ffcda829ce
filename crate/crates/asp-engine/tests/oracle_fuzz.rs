//! Randomized cross-checks of the solver against the brute-force oracle,
//! plus the stratified-fixpoint and grounding-idempotence invariants.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use asp_engine::{
    check_stable, ground, oracle_answer_sets, parse_program, render_atoms, solve, solve_optimal,
    Limits, OptSense,
};

const ATOMS: [&str; 12] = [
    "p0", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10", "p11",
];

fn pick_atom(rng: &mut ChaCha8Rng) -> &'static str {
    ATOMS[rng.gen_range(0..ATOMS.len())]
}

fn body(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| {
            let neg = rng.gen_bool(0.4);
            let a = pick_atom(rng);
            if neg {
                format!("not {a}")
            } else {
                a.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// A random ground program: facts, normal rules, constraints and choice
/// heads over a 12-atom pool, at most 15 statements.
fn random_program(rng: &mut ChaCha8Rng, with_objective: bool) -> String {
    let n_rules = rng.gen_range(1..=15);
    let mut out = String::new();
    for _ in 0..n_rules {
        match rng.gen_range(0..10) {
            0 | 1 => out.push_str(&format!("{}.\n", pick_atom(rng))),
            2..=5 => {
                let blen = rng.gen_range(1..=3);
                out.push_str(&format!("{} :- {}.\n", pick_atom(rng), body(rng, blen)));
            }
            6 | 7 => {
                let blen = rng.gen_range(1..=3);
                out.push_str(&format!(":- {}.\n", body(rng, blen)));
            }
            _ => {
                let n_elems = rng.gen_range(1..=3);
                let elems = (0..n_elems)
                    .map(|_| {
                        let a = pick_atom(rng);
                        if rng.gen_bool(0.5) {
                            let c = pick_atom(rng);
                            if rng.gen_bool(0.3) {
                                format!("{a} : not {c}")
                            } else {
                                format!("{a} : {c}")
                            }
                        } else {
                            a.to_string()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                let lower = rng.gen_range(0..=2);
                let upper = lower + rng.gen_range(0..=2);
                let guard = if rng.gen_bool(0.4) {
                    format!(" :- {}", body(rng, 1))
                } else {
                    String::new()
                };
                match rng.gen_range(0..3) {
                    0 => out.push_str(&format!("{lower} {{{elems}}}{guard}.\n")),
                    1 => out.push_str(&format!("{{{elems}}} {upper}{guard}.\n")),
                    _ => out.push_str(&format!("{lower} {{{elems}}} {upper}{guard}.\n")),
                }
            }
        }
    }
    if with_objective {
        let sense = if rng.gen_bool(0.5) {
            "#maximize"
        } else {
            "#minimize"
        };
        let n_elems = rng.gen_range(1..=3);
        let elems = (0..n_elems)
            .map(|_| {
                let w = rng.gen_range(-3i64..=5);
                let a = pick_atom(rng);
                format!("{w}, t{a} : {a}")
            })
            .collect::<Vec<_>>()
            .join("; ");
        out.push_str(&format!("{sense}{{{elems}}}.\n"));
    }
    out
}

#[test]
fn solver_matches_oracle_on_220_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    for case in 0..220 {
        let with_obj = case % 5 == 0;
        let src = random_program(&mut rng, with_obj);
        let p = parse_program(&src).unwrap_or_else(|e| panic!("case {case} parse: {e}\n{src}"));
        let gp = ground(&p, &BTreeSet::new(), &Limits::default())
            .unwrap_or_else(|e| panic!("case {case} ground: {e}\n{src}"));

        let models = solve(&gp, None);
        let oracle = oracle_answer_sets(&gp, 22)
            .unwrap_or_else(|e| panic!("case {case} oracle: {e}\n{src}"));
        assert_eq!(models, oracle, "case {case} diverged:\n{src}");

        // Every reported model must really be stable.
        for m in &models {
            assert!(
                check_stable(&gp, &m.atoms),
                "case {case} unstable model:\n{src}"
            );
        }

        // Optimization dominance against the oracle's objective values.
        if with_obj {
            let best = solve_optimal(&gp).unwrap_or_else(|e| panic!("case {case} opt: {e}"));
            let sense = p.optimize.first().map(|o| o.sense).unwrap();
            let oracle_best =
                oracle
                    .iter()
                    .filter_map(|m| m.objective_value)
                    .fold(None::<i64>, |acc, v| match (acc, sense) {
                        (None, _) => Some(v),
                        (Some(b), OptSense::Maximize) => Some(b.max(v)),
                        (Some(b), OptSense::Minimize) => Some(b.min(v)),
                    });
            assert_eq!(
                best.and_then(|m| m.objective_value),
                oracle_best,
                "case {case} optimum diverged:\n{src}"
            );
        }

        // Grounding the grounder's own output must not change the models.
        if case % 10 == 0 {
            let reground = ground(&gp.to_program(), &BTreeSet::new(), &Limits::default())
                .unwrap_or_else(|e| panic!("case {case} reground: {e}\n{src}"));
            let models2 = solve(&reground, None);
            let render = |ms: &[asp_engine::AnswerSet]| -> Vec<String> {
                ms.iter().map(|m| render_atoms(&m.atoms)).collect()
            };
            assert_eq!(render(&models), render(&models2), "case {case}:\n{src}");
        }
    }
}

#[test]
fn stratified_positive_programs_have_the_fixpoint_as_sole_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1f1_abcd);
    for case in 0..60 {
        // Facts plus positive rules only: the least fixpoint is the single
        // stable model.
        let mut src = String::new();
        for _ in 0..rng.gen_range(1..=4) {
            src.push_str(&format!("{}.\n", pick_atom(&mut rng)));
        }
        let mut rules: Vec<(String, Vec<String>)> = Vec::new();
        for _ in 0..rng.gen_range(1..=10) {
            let head = pick_atom(&mut rng).to_string();
            let blen = rng.gen_range(1..=3);
            let b: Vec<String> = (0..blen).map(|_| pick_atom(&mut rng).to_string()).collect();
            src.push_str(&format!("{} :- {}.\n", head, b.join(", ")));
            rules.push((head, b));
        }
        let p = parse_program(&src).unwrap();
        let gp = ground(&p, &BTreeSet::new(), &Limits::default()).unwrap();
        let models = solve(&gp, None);
        assert_eq!(models.len(), 1, "case {case}:\n{src}");

        // Independent naive fixpoint over the program text.
        let mut fix: BTreeSet<String> = src
            .lines()
            .filter(|l| !l.contains(":-") && !l.trim().is_empty())
            .map(|l| l.trim().trim_end_matches('.').to_string())
            .collect();
        loop {
            let mut grew = false;
            for (head, b) in &rules {
                if b.iter().all(|x| fix.contains(x)) && fix.insert(head.clone()) {
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        let model: BTreeSet<String> = models[0].atoms.iter().map(|a| a.to_string()).collect();
        assert_eq!(model, fix, "case {case}:\n{src}");
    }
}
