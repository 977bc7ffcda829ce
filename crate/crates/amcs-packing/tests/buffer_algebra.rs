//! Randomized ingest → evaluate → decode → apply sequences checking the
//! buffer-algebra invariants: arrival order survives every step, rm_pack
//! removes exactly the packaged data sets, ignored computations stay gone,
//! and decoding is stable under rendering an answer set back through the
//! parser.

use std::collections::BTreeSet;

use amcs_packing::{apply, decode, encode_facts, evaluate, BufferState, EvalMode, IdGen, Ingest};
use asp_engine::{parse_atom_str, parse_program, parse_term_str, AnswerSet, Limits, Program, Term};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn term(s: &str) -> Term {
    parse_term_str(s).unwrap()
}

/// A fixed pool of packing programs exercising every directive kind.
fn program_pool() -> Vec<Program> {
    [
        // Pack everything under one schema and flush it.
        "aux_any :- ds_avail(DS).
         process_as_schema(all) :- aux_any.
         in_pack(DS) :- ds_avail(DS).
         rm_pack.",
        // Pick exactly one data set, package it, and flush it.
        "aux_any :- ds_avail(DS).
         1 {aux_pick(DS) : ds_avail(DS)} 1 :- aux_any.
         in_pack(DS) :- aux_pick(DS).
         process_as_schema(one) :- aux_pick(DS).
         rm_pack.",
        // Drop the oldest data set without packaging anything.
        "rm(MDS) :- MDS = #min{DS : ds_avail(DS)}, ds_avail(MDS).",
        // Ignore finished computations and rotate marker tags.
        "ignore(CO) :- eoc(CO).
         add_tag(DS, seen) :- ds_avail(DS), not tag(DS, seen).
         rm_tag(DS, seen) :- ds_avail(DS), tag(DS, seen), time(T), T > 40.",
        // One single-member package per data set via the list variant.
        "process(solo, [DS]) :- ds_avail(DS).
         rm_pack.",
        // Pair the two newest data sets into one list package, keep them.
        "aux_newest(MDS) :- MDS = #max{DS : ds_avail(DS)}, ds_avail(MDS).
         aux_second(MDS) :- MDS = #max{DS : ds_avail(DS), not aux_newest(DS)}, ds_avail(MDS).
         process(pair, [A, B]) :- aux_newest(A), aux_second(B), A != B.",
    ]
    .iter()
    .map(|src| parse_program(src).unwrap())
    .collect()
}

fn ds_ids(buf: &BufferState) -> Vec<Term> {
    buf.records.iter().map(|r| r.id.clone()).collect()
}

/// Re-parses the rendered answer set and decodes it again; both decodes
/// must agree exactly.
fn assert_decode_roundtrip(answer: &AnswerSet, buf: &BufferState) {
    let rendered = asp_engine::render_atoms(&answer.atoms);
    let reparsed: BTreeSet<_> = rendered
        .lines()
        .map(|l| parse_atom_str(l).unwrap())
        .collect();
    assert_eq!(reparsed, answer.atoms, "rendering must round-trip atoms");
    let re_answer = AnswerSet {
        atoms: reparsed,
        objective_value: answer.objective_value,
    };
    let a = decode(answer, buf).unwrap();
    let b = decode(&re_answer, buf).unwrap();
    assert_eq!(a.0, b.0);
}

#[test]
fn randomized_sequences_preserve_the_buffer_invariants() {
    let programs = program_pool();
    let limits = Limits::default();
    let mut rng = StdRng::seed_from_u64(0x00b1_f00d);

    for round in 0..1000 {
        let mut ids = IdGen::default();
        let mut buf = BufferState::default();
        // Computations this round may talk about; a parallel record of the
        // ignores the engine has applied so far.
        let comps = ["comp_a", "comp_b", "comp_c"];
        let mut ignored: BTreeSet<Term> = BTreeSet::new();

        let steps = rng.gen_range(3..=10);
        for _ in 0..steps {
            if rng.gen_bool(0.6) {
                // Ingest one data set (sometimes an eoc notification).
                let comp = if rng.gen_bool(0.5) {
                    Some(term(comps[rng.gen_range(0..comps.len())]))
                } else {
                    None
                };
                let is_eoc = comp.is_some() && rng.gen_bool(0.15);
                let info = if is_eoc {
                    [term("eoc")].into()
                } else {
                    [term(&format!("obs({})", rng.gen_range(0..50)))].into()
                };
                let before = buf.records.len();
                let out = buf
                    .ingest(
                        Ingest {
                            source: if comp.is_some() {
                                "ctxt_src"
                            } else {
                                "sensor_a"
                            }
                            .into(),
                            computation: comp.clone(),
                            info,
                            ..Default::default()
                        },
                        &mut ids,
                    )
                    .unwrap();
                buf = out.buffer;
                // Ignored computations swallow their arrivals silently.
                if let Some(c) = &comp {
                    if ignored.contains(c) {
                        assert_eq!(out.appended, None);
                        assert_eq!(buf.records.len(), before);
                    }
                }
                buf.clock += rng.gen_range(1..20);
            } else {
                // Evaluate a random packing program and apply the result.
                let program = &programs[rng.gen_range(0..programs.len())];
                let answer = evaluate(program, &buf, EvalMode::First, &limits)
                    .unwrap()
                    .expect("pool programs are consistent for every buffer");
                assert_decode_roundtrip(&answer, &buf);
                let (d, _warnings) = decode(&answer, &buf).unwrap();

                let before_ids = ds_ids(&buf);
                let out = apply(&buf, &d);

                // Packages are nonempty, duplicate-free, and drawn from the
                // evaluated buffer.
                let mut packaged: BTreeSet<Term> = BTreeSet::new();
                for p in &out.packages {
                    assert!(!p.members.is_empty());
                    let mut seen = BTreeSet::new();
                    for m in &p.members {
                        assert!(before_ids.contains(&m.id), "package member not in buffer");
                        assert!(seen.insert(m.id.clone()), "duplicate package member");
                    }
                    packaged.extend(seen);
                }

                let after_ids = ds_ids(&out.buffer);
                if d.rm_pack {
                    // Packaged data sets are gone, nothing else is (modulo
                    // explicit removals and ignores handled below).
                    for id in &after_ids {
                        assert!(!packaged.contains(id), "rm_pack left a packaged id behind");
                    }
                }
                if !d.rm_pack && d.removals.is_empty() && d.ignores.is_empty() {
                    assert_eq!(
                        after_ids, before_ids,
                        "no removal directive may drop records"
                    );
                }

                // Survivors keep their relative arrival order.
                let order: Vec<u64> = out.buffer.records.iter().map(|r| r.arrival_index).collect();
                assert!(
                    order.windows(2).all(|w| w[0] < w[1]),
                    "arrival order broken"
                );
                let survivor_positions: Vec<usize> = after_ids
                    .iter()
                    .map(|id| before_ids.iter().position(|b| b == id).unwrap())
                    .collect();
                assert!(
                    survivor_positions.windows(2).all(|w| w[0] < w[1]),
                    "survivors must be a subsequence of the previous buffer"
                );

                ignored.extend(d.ignores.iter().cloned());
                buf = out.buffer;
            }

            // Ignore permanence: no encoding ever shows a data set of an
            // ignored computation again.
            let facts = encode_facts(&buf);
            for a in &facts {
                if a.pred == "ds_comp" && a.args.len() == 2 {
                    assert!(
                        !ignored.contains(&a.args[1]),
                        "round {round}: ignored computation resurfaced as {a}"
                    );
                }
            }
        }
    }
}
