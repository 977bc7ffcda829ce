//! End-to-end packing pipelines over the worked ambulance-dispatch
//! scenarios: build a buffer through ingest, encode it, evaluate a packing
//! program, decode the chosen answer set, and apply the directives.

use std::collections::BTreeSet;

use amcs_packing::{
    apply, decode, encode_facts, evaluate, render_facts, BufferState, DecodeWarning, EvalMode,
    IdGen, Ingest,
};
use asp_engine::{ground, parse_program, parse_term_str, solve, Atom, Limits, Term};

fn term(s: &str) -> Term {
    parse_term_str(s).unwrap()
}

/// Appends one data set with an explicit id; `tags` become engine tags.
fn ds(
    buf: BufferState,
    ids: &mut IdGen,
    id: &str,
    source: &str,
    comp: Option<&str>,
    tags: &[&str],
) -> BufferState {
    buf.ingest(
        Ingest {
            source: source.into(),
            computation: comp.map(term),
            info: [term("payload")].into(),
            engine_tags: tags.iter().map(|t| term(t)).collect(),
            explicit_id: Some(term(id)),
        },
        ids,
    )
    .unwrap()
    .buffer
}

fn eoc(buf: BufferState, ids: &mut IdGen, comp: &str, source: &str) -> BufferState {
    buf.ingest(
        Ingest {
            source: source.into(),
            computation: Some(term(comp)),
            info: [term("eoc")].into(),
            ..Default::default()
        },
        ids,
    )
    .unwrap()
    .buffer
}

/// Projects an answer set onto its directive atoms, rendered.
fn directives_of(atoms: &BTreeSet<Atom>) -> BTreeSet<String> {
    atoms
        .iter()
        .filter(|a| {
            matches!(
                (a.pred.as_str(), a.args.len()),
                ("in_pack", 1)
                    | ("process_as_schema", 1)
                    | ("process", 2)
                    | ("rm_pack", 0)
                    | ("rm", 1)
                    | ("add_tag", 2)
                    | ("rm_tag", 2)
                    | ("ignore", 1)
            )
        })
        .map(|a| a.to_string())
        .collect()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn record_ids(buf: &BufferState) -> Vec<String> {
    buf.records.iter().map(|r| r.id.to_string()).collect()
}

/// Grounds `program` against the buffer's facts and enumerates every
/// answer set (the evaluate entry point caps at one by design).
fn all_models(program: &str, buf: &BufferState) -> Vec<BTreeSet<String>> {
    let p = parse_program(program).unwrap();
    let gp = ground(&p, &encode_facts(buf), &Limits::default()).unwrap();
    solve(&gp, None)
        .into_iter()
        .map(|m| directives_of(&m.atoms))
        .collect()
}

const CASE_AMB_PROGRAM: &str = "\
aux_case_avail :- ds_avail(DS),source(DS,ctxt_case_anl).
aux_ambulance_avail :- ds_avail(DS),source(DS,ctxt_amb_mng).
process_as_schema(sch1) :- aux_case_avail, aux_ambulance_avail.
in_pack(DS) :- ds_avail(DS), source(DS,ctxt_amb_mng).
1 {aux_case_in_pack(DS) : ds_avail(DS), source(DS,ctxt_case_anl)} 1.
in_pack(DS) :- aux_case_in_pack(DS).
rm_pack.
";

/// Two open cases and three ambulances: ca_ds11/ca_ds12 from the case
/// analyser, am_ds54/55/56 from the ambulance manager.
fn case_amb_buffer() -> BufferState {
    let mut ids = IdGen::default();
    let mut buf = BufferState::default();
    for id in ["ca_ds11", "ca_ds12"] {
        buf = ds(buf, &mut ids, id, "ctxt_case_anl", None, &[]);
    }
    for id in ["am_ds54", "am_ds55", "am_ds56"] {
        buf = ds(buf, &mut ids, id, "ctxt_amb_mng", None, &[]);
    }
    buf
}

#[test]
fn case_assignment_pipeline_packs_one_case_with_all_ambulances() {
    let buf = case_amb_buffer();

    // The encoded buffer is exactly the availability and source facts plus
    // the clock.
    assert_eq!(
        render_facts(&encode_facts(&buf)),
        "ds_avail(am_ds54).\n\
         ds_avail(am_ds55).\n\
         ds_avail(am_ds56).\n\
         ds_avail(ca_ds11).\n\
         ds_avail(ca_ds12).\n\
         time(0).\n\
         source(am_ds54,ctxt_amb_mng).\n\
         source(am_ds55,ctxt_amb_mng).\n\
         source(am_ds56,ctxt_amb_mng).\n\
         source(ca_ds11,ctxt_case_anl).\n\
         source(ca_ds12,ctxt_case_anl).\n"
    );

    // Unbounded enumeration yields exactly two answer sets: one packs
    // ca_ds12, the other ca_ds11, each with every ambulance.
    let models = all_models(CASE_AMB_PROGRAM, &buf);
    assert_eq!(models.len(), 2);
    assert_eq!(
        models[0],
        set(&[
            "in_pack(am_ds54)",
            "in_pack(am_ds55)",
            "in_pack(am_ds56)",
            "in_pack(ca_ds12)",
            "process_as_schema(sch1)",
            "rm_pack",
        ])
    );
    assert_eq!(
        models[1],
        set(&[
            "in_pack(am_ds54)",
            "in_pack(am_ds55)",
            "in_pack(am_ds56)",
            "in_pack(ca_ds11)",
            "process_as_schema(sch1)",
            "rm_pack",
        ])
    );

    // The single-shot pipeline takes the first answer set.
    let program = parse_program(CASE_AMB_PROGRAM).unwrap();
    let answer = evaluate(&program, &buf, EvalMode::First, &Limits::default())
        .unwrap()
        .unwrap();
    assert_eq!(directives_of(&answer.atoms), models[0]);

    let (d, warnings) = decode(&answer, &buf).unwrap();
    assert!(warnings.is_empty());
    assert!(d.rm_pack);
    assert_eq!(d.packages.len(), 1);
    assert_eq!(d.packages[0].schema, term("sch1"));
    // Members follow buffer (arrival) order, not atom order.
    let member_ids: Vec<String> = d.packages[0].members.iter().map(Term::to_string).collect();
    assert_eq!(member_ids, ["ca_ds12", "am_ds54", "am_ds55", "am_ds56"]);

    let out = apply(&buf, &d);
    assert!(out.warnings.is_empty());
    assert_eq!(out.packages.len(), 1);
    let packaged: Vec<String> = out.packages[0]
        .members
        .iter()
        .map(|r| r.id.to_string())
        .collect();
    assert_eq!(packaged, ["ca_ds12", "am_ds54", "am_ds55", "am_ds56"]);
    // rm_pack leaves only the unchosen case behind.
    assert_eq!(record_ids(&out.buffer), ["ca_ds11"]);
    assert_eq!(out.buffer.records[0].arrival_index, 0);
}

const COMPUTATION_PROGRAM: &str = "\
aux_case_avail :- ds_avail(DS),source(DS,ctxt_case_anl).
aux_ambulance_avail :- ds_avail(DS),source(DS,ctxt_amb_mng).
process_as_schema(sch1) :- aux_case_avail, aux_ambulance_avail.
in_pack(DS) :- ds_avail(DS), source(DS,ctxt_amb_mng).
1 {aux_selected_case_comp(CO) : source(CO,ctxt_case_anl),ds_comp(DS,CO)} 1.
in_pack(MDS) :- MDS = #max{DS : ds_avail(DS), ds_comp(DS,CO), aux_selected_case_comp(CO)}.
rm_pack.
";

/// Case revisions grouped into two case-analyser computations (ca_comp35
/// ended, ca_comp36 open) plus one ambulance data set from an ended
/// ambulance-manager computation.
fn computation_buffer() -> BufferState {
    let mut ids = IdGen::default();
    let mut buf = BufferState::default();
    buf = ds(
        buf,
        &mut ids,
        "ca_ds21",
        "ctxt_case_anl",
        Some("ca_comp35"),
        &[],
    );
    buf = ds(
        buf,
        &mut ids,
        "ca_ds22",
        "ctxt_case_anl",
        Some("ca_comp35"),
        &[],
    );
    buf = ds(
        buf,
        &mut ids,
        "ca_ds24",
        "ctxt_case_anl",
        Some("ca_comp36"),
        &[],
    );
    buf = ds(
        buf,
        &mut ids,
        "ca_ds25",
        "ctxt_case_anl",
        Some("ca_comp36"),
        &[],
    );
    buf = ds(
        buf,
        &mut ids,
        "am_ds54",
        "ctxt_amb_mng",
        Some("am_comp61"),
        &[],
    );
    buf = eoc(buf, &mut ids, "ca_comp35", "ctxt_case_anl");
    buf = eoc(buf, &mut ids, "am_comp61", "ctxt_amb_mng");
    buf
}

#[test]
fn computation_pipeline_selects_the_latest_revision_of_one_case() {
    let buf = computation_buffer();

    // One answer set per case-analyser computation, each packing that
    // computation's latest data set together with the ambulance data.
    let models = all_models(COMPUTATION_PROGRAM, &buf);
    assert_eq!(models.len(), 2);
    let with_25 = set(&[
        "in_pack(am_ds54)",
        "in_pack(ca_ds25)",
        "process_as_schema(sch1)",
        "rm_pack",
    ]);
    let with_22 = set(&[
        "in_pack(am_ds54)",
        "in_pack(ca_ds22)",
        "process_as_schema(sch1)",
        "rm_pack",
    ]);
    assert!(models.contains(&with_22));
    assert!(models.contains(&with_25));

    let program = parse_program(COMPUTATION_PROGRAM).unwrap();
    let answer = evaluate(&program, &buf, EvalMode::First, &Limits::default())
        .unwrap()
        .unwrap();
    assert_eq!(directives_of(&answer.atoms), models[0]);

    let (d, warnings) = decode(&answer, &buf).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(d.packages.len(), 1);
    let member_ids: Vec<String> = d.packages[0].members.iter().map(Term::to_string).collect();
    let out = apply(&buf, &d);
    let left = record_ids(&out.buffer);
    // Whichever computation was chosen, its latest revision plus the
    // ambulance data set leave the buffer; everything else stays put in
    // arrival order, and the ended computations remain known.
    if member_ids == ["ca_ds25", "am_ds54"] {
        assert_eq!(left, ["ca_ds21", "ca_ds22", "ca_ds24"]);
    } else {
        assert_eq!(member_ids, ["ca_ds22", "am_ds54"]);
        assert_eq!(left, ["ca_ds21", "ca_ds24", "ca_ds25"]);
    }
    assert!(out.buffer.computations[&term("ca_comp35")].ended);
    assert!(!out.buffer.computations[&term("ca_comp36")].ended);
    assert!(out.buffer.computations[&term("am_comp61")].ended);
}

const TAGGED_CASE_PROGRAM: &str = "\
aux_case_avail :- ds_avail(DS),source(DS,ctxt_case_anl).
aux_ambulance_avail :- ds_avail(DS),source(DS,ctxt_amb_mng), tag(DS,\"available\"), not aux_some_amb_broken.
aux_some_amb_broken :- ds_avail(DS),source(DS,ctxt_amb_mng), tag(DS,\"broken\").
process_as_schema(sch1) :- aux_case_avail, aux_ambulance_avail, not aux_some_amb_broken.
process_as_schema(sch2) :- aux_some_amb_broken.
in_pack(DS) :- ds_avail(DS),source(DS,ctxt_amb_mng), not aux_some_amb_broken.
in_pack(DS) :- ds_avail(DS),source(DS,ctxt_amb_mng), tag(DS,\"broken\").
1 {aux_selected_case(C) : tag(DS,case(C,I)),ds_avail(DS), source(DS,ctxt_case_anl)} 1 :- not aux_some_amb_broken.
in_pack(MDS) :- MI = #max{I:tag(DS,case(C,I)),ds_avail(DS),source(DS,ctxt_case_anl)}, tag(MDS,case(C,MI)), ds_avail(MDS), aux_selected_case(C), source(MDS,ctxt_case_anl).
rm_pack.
rm(DS) :- ds_avail(DS), source(DS,ctxt_case_anl), aux_selected_case(C), tag(DS,case(C,I)), not in_pack(DS).
";

/// Three case revisions, two of them (ca_ds26 and ca_ds28) for the same
/// case c1, and no ambulance data at all.
fn tagged_case_buffer() -> BufferState {
    let mut ids = IdGen::default();
    let mut buf = BufferState::default();
    buf = ds(
        buf,
        &mut ids,
        "ca_ds26",
        "ctxt_case_anl",
        Some("comp37"),
        &["case(c1,1)"],
    );
    buf = ds(
        buf,
        &mut ids,
        "ca_ds27",
        "ctxt_case_anl",
        Some("comp38"),
        &["case(c2,1)"],
    );
    buf = ds(
        buf,
        &mut ids,
        "ca_ds28",
        "ctxt_case_anl",
        Some("comp39"),
        &["case(c1,2)"],
    );
    buf
}

#[test]
fn tag_pipeline_drops_stale_case_revisions_even_without_a_package() {
    let buf = tagged_case_buffer();
    let encoded = render_facts(&encode_facts(&buf));
    assert!(encoded.contains("tag(ca_ds26,case(c1,1)).\n"));
    assert!(encoded.contains("tag(ca_ds28,case(c1,2)).\n"));

    // No ambulance is available, so no schema is derivable; the program
    // still picks a case per answer set and prunes its stale revisions.
    let models = all_models(TAGGED_CASE_PROGRAM, &buf);
    assert_eq!(models.len(), 2);
    let for_c1 = models
        .iter()
        .find(|m| m.contains("rm(ca_ds26)"))
        .expect("one answer set handles case c1");
    assert_eq!(
        *for_c1,
        set(&["in_pack(ca_ds28)", "rm(ca_ds26)", "rm_pack"])
    );
    let for_c2 = models.iter().find(|m| !m.contains("rm(ca_ds26)")).unwrap();
    assert_eq!(*for_c2, set(&["in_pack(ca_ds27)", "rm_pack"]));

    // Decode the c1 answer set: the in_pack atom has no schema, so it
    // forms no package (warning), but the removal still goes through.
    let p = parse_program(TAGGED_CASE_PROGRAM).unwrap();
    let gp = ground(&p, &encode_facts(&buf), &Limits::default()).unwrap();
    let c1_answer = solve(&gp, None)
        .into_iter()
        .find(|m| directives_of(&m.atoms).contains("rm(ca_ds26)"))
        .unwrap();
    let (d, warnings) = decode(&c1_answer, &buf).unwrap();
    assert_eq!(d.packages.len(), 0);
    assert!(d.rm_pack);
    assert_eq!(d.removals, BTreeSet::from([term("ca_ds26")]));
    assert!(warnings
        .iter()
        .any(|w| matches!(w, DecodeWarning::DanglingInPack { ids } if ids == &["ca_ds28"])));

    let out = apply(&buf, &d);
    assert!(out.packages.is_empty());
    assert!(out.warnings.is_empty());
    assert_eq!(record_ids(&out.buffer), ["ca_ds27", "ca_ds28"]);
}

/// The two-case buffer again, now with numeric priority tags; the
/// maximize statement keeps only the higher-priority answer set.
#[test]
fn priority_pipeline_prefers_the_higher_priority_case() {
    let mut ids = IdGen::default();
    let mut buf = BufferState::default();
    buf = ds(buf, &mut ids, "ca_ds11", "ctxt_case_anl", None, &["3"]);
    buf = ds(buf, &mut ids, "ca_ds12", "ctxt_case_anl", None, &["7"]);
    for id in ["am_ds54", "am_ds55", "am_ds56"] {
        buf = ds(buf, &mut ids, id, "ctxt_amb_mng", None, &[]);
    }

    let mut source = String::from(CASE_AMB_PROGRAM);
    source.push_str("#maximize{P:aux_case_in_pack(DS),tag(DS,P)}.\n");
    let program = parse_program(&source).unwrap();

    let answer = evaluate(&program, &buf, EvalMode::Optimal, &Limits::default())
        .unwrap()
        .unwrap();
    assert_eq!(answer.objective_value, Some(7));
    assert_eq!(
        directives_of(&answer.atoms),
        set(&[
            "in_pack(am_ds54)",
            "in_pack(am_ds55)",
            "in_pack(am_ds56)",
            "in_pack(ca_ds12)",
            "process_as_schema(sch1)",
            "rm_pack",
        ])
    );

    let (d, warnings) = decode(&answer, &buf).unwrap();
    assert!(warnings.is_empty());
    let out = apply(&buf, &d);
    assert_eq!(record_ids(&out.buffer), ["ca_ds11"]);
    // The surviving record keeps its priority tag for the next round.
    assert!(out.buffer.records[0].tags.contains(&term("3")));
}

const LIST_SPLIT_PROGRAM: &str = "\
aux_min_amb_ds(MDS) :- MDS = #min{DS : ds_avail(DS),source(DS,ctxt_amb_mng)}.
aux_amb_in_between(DS1,DS2) :- ds_avail(DS1),source(DS1,ctxt_amb_mng), ds_avail(DS),source(DS,ctxt_amb_mng), ds_avail(DS2),source(DS2,ctxt_amb_mng), DS1<DS, DS<DS2.
aux_amb_ds_nr(MDS,0) :- aux_min_amb_ds(MDS).
aux_amb_ds_nr(DS2,I+1) :- aux_amb_ds_nr(DS1,I), ds_avail(DS2),source(DS2,ctxt_amb_mng), DS1<DS2, not aux_amb_in_between(DS1,DS2).
aux_build_package(I,I,DS) :- I=0..2, aux_amb_ds_nr(DS,I).
aux_build_package(I\\3,I,[DS|T]) :- aux_build_package(I\\3,I-3,T), aux_amb_ds_nr(DS,I).
process(sch,L) :- aux_build_package(M,MI,L), M=0..2, MI=#max{I:aux_build_package(M,I,_)}.
";

/// Ten ambulance data sets next to the tagged case revisions; the list
/// program deals them round-robin into three packages.
#[test]
fn list_pipeline_splits_ambulances_into_three_packages() {
    let mut ids = IdGen::default();
    let mut buf = tagged_case_buffer();
    for id in [
        "am_ds24", "am_ds34", "am_ds45", "am_ds46", "am_ds49", "am_ds53", "am_ds55", "am_ds56",
        "am_ds74", "am_ds84",
    ] {
        buf = ds(buf, &mut ids, id, "ctxt_amb_mng", None, &[]);
    }

    let models = all_models(LIST_SPLIT_PROGRAM, &buf);
    assert_eq!(models.len(), 1);

    let program = parse_program(LIST_SPLIT_PROGRAM).unwrap();
    let answer = evaluate(&program, &buf, EvalMode::First, &Limits::default())
        .unwrap()
        .unwrap();
    assert_eq!(
        directives_of(&answer.atoms),
        set(&[
            "process(sch,[am_ds56,am_ds49|am_ds34])",
            "process(sch,[am_ds74,am_ds53|am_ds45])",
            "process(sch,[am_ds84,am_ds55,am_ds46|am_ds24])",
        ])
    );

    let (d, warnings) = decode(&answer, &buf).unwrap();
    assert!(warnings.is_empty());
    assert!(!d.rm_pack);
    let members: Vec<Vec<String>> = d
        .packages
        .iter()
        .map(|p| p.members.iter().map(Term::to_string).collect())
        .collect();
    assert_eq!(
        members,
        [
            vec!["am_ds56", "am_ds49", "am_ds34"],
            vec!["am_ds74", "am_ds53", "am_ds45"],
            vec!["am_ds84", "am_ds55", "am_ds46", "am_ds24"],
        ]
    );
    assert!(d.packages.iter().all(|p| p.schema == term("sch")));

    // Without rm_pack the buffer is untouched; the packages are only
    // assembled.
    let before = record_ids(&buf);
    let out = apply(&buf, &d);
    assert!(out.warnings.is_empty());
    assert_eq!(record_ids(&out.buffer), before);
    assert_eq!(out.packages.len(), 3);
    let sizes: Vec<usize> = out.packages.iter().map(|p| p.members.len()).collect();
    assert_eq!(sizes, [3, 3, 4]);
}
