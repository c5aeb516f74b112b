mod common;

use std::collections::BTreeSet;
use std::time::Duration;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use dsltrans_core::cutoff::{
    compute_cutoff, per_class_bounds, relevant_rules, select_fragment, CutoffParams, FragmentKind, RelevanceMode,
};
use dsltrans_core::exec::{check_property_concrete, execute, execute_rules};
use dsltrans_core::lang::{parse_spec, print_spec, Specification, TransformationView};
use dsltrans_core::model::{closure_with_info, induce_with_info, InstanceModel};
use dsltrans_core::verify::{verify_property, Status, VerificationConfig};

fn every_fixture() -> Vec<(String, Specification)> {
    let mut specs = common::tiny_corpus();
    for f in ["uml2java.dslt", "property_has_field.dslt", "cegar_refine.dslt", "cegar_confirm.dslt", "tight_bound.dslt", "stress.dslt"] {
        specs.push((f.to_string(), common::load(f)));
    }
    specs
}

fn domain() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("Bool".to_string()),
        Just("Int".to_string()),
        (-3i64..3, 0i64..4).prop_map(|(lo, w)| format!("Int[{lo}..{}]", lo + w)),
        proptest::collection::vec(-9i64..9, 1..4).prop_map(|v| {
            format!("Int{{{}}}", v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", "))
        }),
        Just("String".to_string()),
        proptest::collection::vec("[a-z\"\\\\ ]{0,3}", 1..3).prop_map(|v| {
            let q: Vec<String> = v.iter().map(|s| format!("{s:?}")).collect();
            format!("String{{{}}}", q.join(", "))
        }),
    ]
}

fn mult() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        Just(" [*]".to_string()),
        Just(" [1]".to_string()),
        (0u32..2, 1u32..3).prop_map(|(l, u)| format!(" [{l}..{}]", l + u)),
        Just(" [1..*]".to_string()),
    ]
}

fn guard_op() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("=="), Just("!="), Just("<"), Just("<="), Just(">"), Just(">=")]
}

prop_compose! {
    fn spec_text()(
        src_doms in proptest::collection::vec(domain(), 2),
        m1 in mult(), m2 in mult(),
        abstract_base in any::<bool>(),
        op in guard_op(),
        lit in -5i64..5,
        use_copy in any::<bool>(),
        doc in proptest::option::of("[a-z ]{0,8}"),
        layers in 1usize..3,
    ) -> String {
        let base = if abstract_base { "abstract class Base { }" } else { "class Base { }" };
        let mut s = format!(
            "metamodel S {{ {base} class A extends Base {{ x: {} y: {} }} class B {{ }} assoc ab : A{m1} -> B{m2} }}\n",
            src_doms[0], src_doms[1]
        );
        let tgt_dom = if use_copy { src_doms[0].clone() } else { "Int".to_string() };
        s += &format!("metamodel T {{ class X {{ v: {tgt_dom} }} class Y {{ }} assoc xy : X -> Y }}\n");
        s += "transformation t : S -> T {\n";
        for l in 0..layers {
            s += &format!("layer l{l} {{ rule R{l} {{ match {{ any a : A  b : B  direct e : ab -- a.b }} ");
            if use_copy {
                s += "apply { x : X { v = a.x }  y : Y  k : xy -- x.y } } }\n";
            } else {
                s += &format!("apply {{ x : X {{ v = {lit} }}  y : Y  k : xy -- x.y }} }} }}\n");
            }
        }
        s += "}\n";
        let doc = doc.map(|d| format!(" {d:?}")).unwrap_or_default();
        let guard = match src_doms[1].as_str() {
            "Bool" => " where y == true".to_string(),
            "String" => " where y != \"q\"".to_string(),
            d if d.starts_with("Int") => format!(" where y {op} {lit}"),
            _ => String::new(),
        };
        s += &format!(
            "property P{doc} for t {{ precondition {{ a : A{guard}  b : B }} postcondition {{ x : X  y : Y  x <--trace-- a  indirect w : xy -- x.y }} }}\n"
        );
        s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(text in spec_text()) {
        let spec = parse_spec(&text).map_err(|d| TestCaseError::fail(format!("{d:?}\n{text}")))?;
        let printed = print_spec(&spec);
        let again = parse_spec(&printed).expect("printed spec parses");
        prop_assert_eq!(&again, &spec);
        prop_assert_eq!(print_spec(&again), printed);
    }

    #[test]
    fn execution_is_monotone(seed in any::<u64>(), which in 0usize..64) {
        let specs = every_fixture();
        let (_, spec) = &specs[which % specs.len()];
        let view = TransformationView::new(spec, &spec.transformations[0]).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let m = common::random_model(&view, &mut rng, 3);
        let keep: BTreeSet<String> = m.elements.iter().enumerate()
            .filter(|(i, _)| (seed >> (i % 64)) & 1 == 1)
            .map(|(_, e)| e.id.clone())
            .collect();
        let sub = induce_with_info(&m, &keep, &view.src).unwrap();
        let big = execute_rules(&view, &m, |_| true);
        let small = execute_rules(&view, &sub, |_| true);
        let el = |x: &InstanceModel| x.elements.iter().map(|e| e.id.clone()).collect::<BTreeSet<_>>();
        prop_assert!(el(&small.target).is_subset(&el(&big.target)));
        let ln = |x: &InstanceModel| x.links.iter().cloned().collect::<BTreeSet<_>>();
        prop_assert!(ln(&small.target).is_subset(&ln(&big.target)));
        let tr = |r: &[dsltrans_core::model::TraceLink]| r.iter().cloned().collect::<BTreeSet<_>>();
        prop_assert!(tr(&small.traces).is_subset(&tr(&big.traces)));
    }

    #[test]
    fn execution_is_deterministic(seed in any::<u64>(), which in 0usize..64) {
        let specs = every_fixture();
        let (_, spec) = &specs[which % specs.len()];
        let view = TransformationView::new(spec, &spec.transformations[0]).unwrap();
        let m = common::random_model(&view, &mut StdRng::seed_from_u64(seed), 2);
        let a = execute_rules(&view, &m, |_| true);
        let b = execute_rules(&view, &m, |_| true);
        prop_assert_eq!(a.target, b.target);
        prop_assert_eq!(a.traces, b.traces);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symbolic_and_concrete_guards_agree(op in guard_op(), lit in -3i64..3, value in -3i64..3) {
        let text = format!(
            "metamodel S {{ class A {{ n: Int[-3..3] }} }}\n\
             metamodel T {{ class X {{ }} }}\n\
             transformation t : S -> T {{ layer l {{ rule R {{ match {{ a : A where n {op} {lit} }} apply {{ x : X }} }} }} }}\n\
             property P {{ precondition {{ a : A where n == {value} }} postcondition {{ x : X  x <--trace-- a }} }}\n"
        );
        let spec = parse_spec(&text).unwrap();
        let prop = &spec.properties[0];
        let view = TransformationView::for_property(&spec, prop).unwrap();
        let src = InstanceModel::from_json(&format!(
            r#"{{"elements":[{{"id":"a","type":"A","attrs":{{"n":{value}}}}}]}}"#
        )).unwrap();
        let res = execute(&view, &src).unwrap();
        let concrete = check_property_concrete(&view, prop, &src, &res).holds;
        let cfg = VerificationConfig { timeout: Duration::from_secs(30), ..Default::default() };
        let v = verify_property(&spec, prop, &cfg);
        prop_assert_eq!(v.status, if concrete { Status::Holds } else { Status::Violated });
    }
}

#[test]
fn cutoff_is_monotone_in_every_parameter() {
    let grid = 0..=4u64;
    for c in grid.clone() {
        for m in grid.clone() {
            for p in grid.clone() {
                for d in grid.clone() {
                    for a in grid.clone() {
                        for r in grid.clone() {
                            let base = CutoffParams { c, m, p, d, a, r };
                            let b = compute_cutoff(&base);
                            assert_eq!(b.k, b.coarse.min(b.sharp).min(b.tight));
                            let bumped = [
                                CutoffParams { c: c + 1, ..base },
                                CutoffParams { m: m + 1, ..base },
                                CutoffParams { p: p + 1, ..base },
                                CutoffParams { d: d + 1, ..base },
                                CutoffParams { a: a + 1, ..base },
                                CutoffParams { r: r + 1, ..base },
                            ];
                            for q in bumped {
                                let n = compute_cutoff(&q);
                                assert!(n.coarse >= b.coarse && n.sharp >= b.sharp && n.tight >= b.tight, "{base:?} -> {q:?}");
                                assert!(n.k >= b.k, "{base:?} -> {q:?}");
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn relevance_modes_are_nested() {
    for (name, spec) in every_fixture() {
        for p in &spec.properties {
            let view = TransformationView::for_property(&spec, p).unwrap();
            let legacy = relevant_rules(&view, p, RelevanceMode::Legacy);
            let trace = relevant_rules(&view, p, RelevanceMode::TraceAware);
            let attr = relevant_rules(&view, p, RelevanceMode::TraceAttributeAware);
            assert!(attr.rules.is_subset(&trace.rules), "{name}/{}", p.name);
            assert!(trace.rules.is_subset(&legacy.rules), "{name}/{}", p.name);
            assert!(attr.d <= trace.d && trace.d <= legacy.d);
        }
    }
}

#[test]
fn fragments_are_nested() {
    for (name, spec) in every_fixture() {
        for p in &spec.properties {
            let view = TransformationView::for_property(&spec, p).unwrap();
            let rel = relevant_rules(&view, p, RelevanceMode::TraceAttributeAware);
            let set = |k| select_fragment(&view, &rel, k).into_iter().collect::<BTreeSet<_>>();
            let (min, base, full) = (set(FragmentKind::Minimal), set(FragmentKind::Baseline), set(FragmentKind::Full));
            assert!(min.is_subset(&base) && base.is_subset(&full), "{name}/{}", p.name);
            assert_eq!(full.len(), view.t.layers.len());
        }
    }
}

#[test]
fn per_class_bounds_grow_with_k_and_stay_under_it() {
    for (name, spec) in every_fixture() {
        for p in &spec.properties {
            let view = TransformationView::for_property(&spec, p).unwrap();
            let rel = relevant_rules(&view, p, RelevanceMode::TraceAttributeAware);
            let closure = closure_with_info(&view.src).unwrap();
            let mut prev = per_class_bounds(&view, p, &rel.rules, &closure, 0).unwrap();
            for k in 1..12 {
                let cur = per_class_bounds(&view, p, &rel.rules, &closure, k).unwrap();
                for (c, b) in &cur.source {
                    assert!(*b <= k, "{name}/{}: {c}={b} > {k}", p.name);
                    assert!(*b >= prev.source_of(c), "{name}/{}", p.name);
                }
                for (c, b) in &cur.target {
                    assert!(*b >= prev.target_of(c), "{name}/{}", p.name);
                }
                prev = cur;
            }
        }
    }
}
