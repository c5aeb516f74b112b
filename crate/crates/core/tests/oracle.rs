mod common;

use std::time::Duration;

use dsltrans_core::cutoff::{cutoff_report, RelevanceMode};
use dsltrans_core::exec::{check_property_concrete, execute};
use dsltrans_core::lang::TransformationView;
use dsltrans_core::verify::{verify_property, Status, VerificationConfig};

fn cfg() -> VerificationConfig {
    VerificationConfig { timeout: Duration::from_secs(60), ..Default::default() }
}

#[test]
fn corpus_shape() {
    let corpus = common::tiny_corpus();
    assert!(corpus.len() >= 10);
    let mut bad = Vec::new();
    for (name, spec) in &corpus {
        assert!(spec.properties.len() >= 3, "{name}");
        let statuses: Vec<Status> = spec.properties.iter().map(|p| common::expected_status(&p.name)).collect();
        assert!(statuses.contains(&Status::Holds) && statuses.contains(&Status::Violated), "{name}");
        for p in &spec.properties {
            let view = TransformationView::for_property(spec, p).unwrap();
            let rep = cutoff_report(&view, p, RelevanceMode::TraceAttributeAware).unwrap();
            let b = &rep.per_class;
            let total: u64 = b.source.values().chain(b.target.values()).sum();
            if b.max() > 2 || total > 6 {
                bad.push(format!("{name}/{}: {b:?}", p.name));
            }
        }
    }
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn smt_agrees_with_enumeration() {
    for (name, spec) in common::tiny_corpus() {
        for p in &spec.properties {
            let view = TransformationView::for_property(&spec, p).unwrap();
            let rep = cutoff_report(&view, p, RelevanceMode::TraceAttributeAware).unwrap();
            let bf = common::brute_force(&view, p, &rep.per_class.source);
            let v = verify_property(&spec, p, &cfg());
            let oracle = if bf.violation.is_some() { Status::Violated } else { Status::Holds };
            assert_eq!(v.status, oracle, "{name}/{}: {v:?}", p.name);
            assert_eq!(v.status, common::expected_status(&p.name), "{name}/{}", p.name);
            if let Some(m) = bf.violation {
                let res = execute(&view, &m).unwrap();
                assert!(!check_property_concrete(&view, p, &m, &res).holds);
            }
        }
    }
}
