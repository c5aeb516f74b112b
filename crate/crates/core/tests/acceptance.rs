//! End-to-end acceptance checks, one line of output per criterion.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use dsltrans_core::cutoff::{compute_cutoff, cutoff_report, CutoffParams, FragmentKind, RelevanceMode};
use dsltrans_core::exec::{check_property_concrete, execute, execute_rules};
use dsltrans_core::kboundary::{run_experiment, Side};
use dsltrans_core::lang::{Specification, TransformationView};
use dsltrans_core::model::induce_with_info;
use dsltrans_core::verify::{verify_property, PropertyVerdict, Status, UnknownReason, VerificationConfig};

fn cfg() -> VerificationConfig {
    VerificationConfig { timeout: Duration::from_secs(60), ..Default::default() }
}

fn verify_named(spec: &Specification, name: &str, cfg: &VerificationConfig) -> PropertyVerdict {
    verify_property(spec, spec.property(name).unwrap(), cfg)
}

fn cutoff_exactness() {
    let b = compute_cutoff(&CutoffParams { c: 5, m: 3, p: 1, d: 1, a: 5, r: 8 });
    assert_eq!((b.coarse, b.sharp, b.tight), (120, 150, 102));
    assert_eq!(b.k, 102);
    let spec = common::load("property_has_field.dslt");
    let prop = spec.property("PropertyHasField").unwrap();
    let view = TransformationView::for_property(&spec, prop).unwrap();
    let rep = cutoff_report(&view, prop, RelevanceMode::TraceAttributeAware).unwrap();
    assert_eq!(rep.bounds.k, 102);
}

fn trivial_bounds() {
    for p in 1..4u64 {
        for m in 1..5u64 {
            for r in 0..6u64 {
                for a in 0..5u64 {
                    let b = compute_cutoff(&CutoffParams { c: 3, m, p, d: 0, a, r });
                    assert_eq!(b.sharp, p * (1 + m * r) * (a + 1));
                    for d in 0..4u64 {
                        let b = compute_cutoff(&CutoffParams { c: 3, m: 1, p, d, a, r });
                        assert_eq!(b.tight, p * (a + 1));
                    }
                }
            }
        }
    }
}

fn oracle_equivalence() {
    let start = Instant::now();
    let corpus = common::tiny_corpus();
    assert!(corpus.len() >= 10);
    let mut checked = 0;
    for (name, spec) in &corpus {
        assert!(spec.properties.len() >= 3);
        for p in &spec.properties {
            let view = TransformationView::for_property(spec, p).unwrap();
            let rep = cutoff_report(&view, p, RelevanceMode::TraceAttributeAware).unwrap();
            let bounds = &rep.per_class;
            let total: u64 = bounds.source.values().chain(bounds.target.values()).sum();
            assert!(bounds.max() <= 2 && total <= 6, "{name}/{}", p.name);
            let bf = common::brute_force(&view, p, &bounds.source);
            let oracle = if bf.violation.is_some() { Status::Violated } else { Status::Holds };
            let v = verify_property(spec, p, &cfg());
            assert_eq!(v.status, oracle, "{name}/{}", p.name);
            checked += 1;
        }
    }
    assert!(checked >= 30);
    assert!(start.elapsed() < Duration::from_secs(120));
}

fn k_boundary_pattern() {
    let start = Instant::now();
    let spec = common::load("tight_bound.dslt");
    let neg = spec.property("SourceHasTwoTD_ShouldFail").unwrap();
    let r = run_experiment("tight_bound", &spec, neg, None, &cfg()).unwrap();
    let sweep = r.sweep.unwrap();
    let got: Vec<(i64, Status)> = sweep.runs.iter().map(|x| (x.delta, x.status)).collect();
    let want: Vec<(i64, Status)> = (-3..=3)
        .map(|d| (d, if d < 0 { Status::Holds } else { Status::Violated }))
        .collect();
    assert_eq!(got, want);
    assert!(sweep.matched);
    let pert = r.perturbation.unwrap();
    assert!(!pert.binding_classes.is_empty());
    assert!(pert.binding_classes.iter().any(|(s, _)| *s == Side::Target));

    let pos = spec.property("SourceHasTD").unwrap();
    let r = run_experiment("tight_bound", &spec, pos, None, &cfg()).unwrap();
    let sweep = r.sweep.unwrap();
    assert!(sweep.runs.iter().all(|x| x.status == Status::Holds));
    assert_eq!(sweep.runs.len(), 7);
    assert!(r.perturbation.unwrap().binding_classes.is_empty());
    assert!(start.elapsed() < Duration::from_secs(60));
}

fn all_suites() -> Vec<(String, Specification)> {
    let mut specs = common::tiny_corpus();
    for f in ["uml2java.dslt", "property_has_field.dslt", "cegar_refine.dslt", "cegar_confirm.dslt", "tight_bound.dslt"] {
        specs.push((f.to_string(), common::load(f)));
    }
    specs
}

fn cross_validation() {
    let mut violated = 0;
    for (name, spec) in all_suites() {
        for p in &spec.properties {
            let v = verify_property(&spec, p, &cfg());
            if v.status != Status::Violated {
                continue;
            }
            violated += 1;
            let cex = v.counterexample.as_ref().unwrap_or_else(|| panic!("{name}/{} lacks a witness", p.name));
            let view = TransformationView::for_property(&spec, p).unwrap();
            let res = execute(&view, &cex.source).unwrap();
            assert!(!check_property_concrete(&view, p, &cex.source, &res).holds, "{name}/{}", p.name);
        }
    }
    assert!(violated >= 10);
}

fn monotonicity() {
    let start = Instant::now();
    let specs = all_suites();
    let mut rng = StdRng::seed_from_u64(7);
    for trial in 0..200 {
        let (name, spec) = &specs[rng.gen_range(0..specs.len())];
        let view = TransformationView::new(spec, &spec.transformations[0]).unwrap();
        let m = common::random_model(&view, &mut rng, 3);
        let keep: BTreeSet<String> = m.elements.iter().filter(|_| rng.gen_bool(0.5)).map(|e| e.id.clone()).collect();
        let sub = induce_with_info(&m, &keep, &view.src).unwrap();
        let big = execute_rules(&view, &m, |_| true);
        let small = execute_rules(&view, &sub, |_| true);
        let ids = |r: &dsltrans_core::exec::ExecutionResult| {
            r.target.elements.iter().map(|e| (e.id.clone(), e.class.clone())).collect::<BTreeSet<_>>()
        };
        let links = |r: &dsltrans_core::exec::ExecutionResult| r.target.links.iter().cloned().collect::<BTreeSet<_>>();
        let traces = |r: &dsltrans_core::exec::ExecutionResult| {
            r.traces.iter().map(|t| (t.src.clone(), t.tgt.clone())).collect::<BTreeSet<_>>()
        };
        assert!(ids(&small).is_subset(&ids(&big)), "trial {trial} on {name}");
        assert!(links(&small).is_subset(&links(&big)), "trial {trial} on {name}");
        assert!(traces(&small).is_subset(&traces(&big)), "trial {trial} on {name}");
    }
    assert!(start.elapsed() < Duration::from_secs(60));
}

fn composability() {
    for (name, spec) in common::tiny_corpus() {
        for p in &spec.properties {
            let reference = verify_property(&spec, p, &cfg()).status;
            for bits in 0..16u32 {
                let mut c = cfg();
                c.per_class = bits & 1 != 0;
                c.fragment = if bits & 2 != 0 { FragmentKind::Full } else { FragmentKind::Minimal };
                c.encode.factored = bits & 4 != 0;
                c.encode.symmetry_break = bits & 8 != 0;
                let v = verify_property(&spec, p, &c);
                assert_eq!(v.status, reference, "{name}/{} with options {bits:04b}", p.name);
            }
            for lazy in [false, true] {
                let mut c = cfg();
                c.encode.lazy_closure = lazy;
                assert_eq!(verify_property(&spec, p, &c).status, reference, "{name}/{} lazy={lazy}", p.name);
            }
        }
    }
}

fn cegar_behaviour() {
    let spec = common::load("cegar_refine.dslt");
    let v = verify_named(&spec, "AHasX", &cfg());
    assert_eq!(v.status, Status::Holds);
    assert_eq!(v.provenance.cegar_rounds, 1);

    let spec = common::load("cegar_confirm.dslt");
    let v = verify_named(&spec, "AHasX_ShouldFail", &cfg());
    assert_eq!(v.status, Status::Violated);
    assert_eq!(v.provenance.cegar_rounds, 0);
}

fn table_pattern() {
    let start = Instant::now();
    let spec = common::load("uml2java.dslt");
    let v = verify_named(&spec, "PackageHasPackageDeclaration", &cfg());
    assert_eq!(v.status, Status::Holds);
    assert_eq!(v.provenance.per_class_max, 2);
    assert_eq!(v.provenance.k, 2);
    let v = verify_named(&spec, "ClassMappedToInterfaceDeclaration_ShouldFail", &cfg());
    assert_eq!(v.status, Status::Violated);
    assert!(start.elapsed() < Duration::from_secs(60));
}

fn child_processes() -> usize {
    let mut n = 0;
    if let Ok(tasks) = std::fs::read_dir("/proc/self/task") {
        for t in tasks.flatten() {
            if let Ok(s) = std::fs::read_to_string(t.path().join("children")) {
                n += s.split_whitespace().count();
            }
        }
    }
    n
}

fn robustness() {
    let start = Instant::now();
    let spec = common::load("stress.dslt");
    let name = "JoinedHasHighQ_ShouldFail";
    let mut c = cfg();
    c.timeout = Duration::from_millis(10);
    c.per_class = false;
    c.cegar = false;
    c.fragment = FragmentKind::Full;
    let v = verify_named(&spec, name, &c);
    assert_eq!(v.status, Status::Unknown, "{v:?}");
    assert_eq!(v.reason, Some(UnknownReason::Timeout));
    assert_eq!(child_processes(), 0);

    let mut c = cfg();
    c.per_class = false;
    c.encode.ceiling = 100;
    let v = verify_named(&spec, name, &c);
    assert_eq!(v.status, Status::Unknown);
    assert_eq!(v.reason.as_ref().map(|r| r.kind()), Some("ceiling"));
    assert!(start.elapsed() < Duration::from_secs(30));
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn()); 10] = [
        ("cutoff exactness", cutoff_exactness),
        ("trivial-bound cases", trivial_bounds),
        ("oracle equivalence", oracle_equivalence),
        ("k-boundary pattern", k_boundary_pattern),
        ("counterexample cross-validation", cross_validation),
        ("monotonicity", monotonicity),
        ("optimization composability", composability),
        ("cegar behaviour", cegar_behaviour),
        ("uml-to-java verdict pattern", table_pattern),
        ("robustness", robustness),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        let line = format!(
            "criterion {:>2} {:<32} {} ({:.2}s)",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        println!("{line}");
        if !ok {
            failed.push(*name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
