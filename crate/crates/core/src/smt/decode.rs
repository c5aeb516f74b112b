use std::collections::BTreeMap;

use serde::Serialize;

use super::EncodedProblem;
use crate::lang::TransformationView;
use crate::model::{Element, InstanceModel, Link, TraceLink};

/// Source and target instances read back from a satisfying assignment.
#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub source: InstanceModel,
    pub target: InstanceModel,
    /// Precondition element name to source element id.
    pub binding: BTreeMap<String, String>,
}

fn truth(model: &BTreeMap<String, i64>, v: &str) -> bool {
    model.get(v).copied().unwrap_or(0) != 0
}

pub fn decode_counterexample(
    view: &TransformationView,
    problem: &EncodedProblem,
    model: &BTreeMap<String, i64>,
) -> Counterexample {
    let enums: Vec<_> = view.src.enums.iter().chain(view.tgt.enums.iter()).cloned().collect();
    let mut source = InstanceModel::default();
    for (i, s) in problem.source_slots.iter().enumerate() {
        if !truth(model, &s.exists) {
            continue;
        }
        let ci = view.src.class(&s.class).expect("slot class");
        let mut attrs = BTreeMap::new();
        for (a, d) in &ci.attributes {
            let v = problem
                .source_attrs
                .iter()
                .find(|x| x.slot == i && &x.attr == a)
                .and_then(|x| model.get(&x.var))
                .map(|n| problem.codec.decode(*n, d, &enums))
                .unwrap_or_else(|| view.src.default_value(d));
            attrs.insert(a.clone(), v);
        }
        source.elements.push(Element {
            id: s.id.clone(),
            class: s.class.clone(),
            attrs,
        });
    }
    for l in &problem.source_links {
        if truth(model, &l.var) {
            source.links.push(Link {
                assoc: l.assoc.clone(),
                src: problem.source_slots[l.src].id.clone(),
                tgt: problem.source_slots[l.tgt].id.clone(),
            });
        }
    }
    let mut target = InstanceModel::default();
    for (t, s) in problem.target_slots.iter().enumerate() {
        if !truth(model, &s.exists) {
            continue;
        }
        let ci = view.tgt.class(&s.class).expect("slot class");
        let mut attrs = BTreeMap::new();
        for (a, d) in &ci.attributes {
            let v = problem
                .target_attrs
                .iter()
                .find(|x| x.slot == t && &x.attr == a)
                .and_then(|x| model.get(&x.var))
                .map(|n| problem.codec.decode(*n, d, &enums))
                .unwrap_or_else(|| view.tgt.default_value(d));
            attrs.insert(a.clone(), v);
        }
        target.elements.push(Element {
            id: s.id.clone(),
            class: s.class.clone(),
            attrs,
        });
    }
    for l in &problem.target_links {
        if truth(model, &l.var) {
            target.links.push(Link {
                assoc: l.assoc.clone(),
                src: problem.target_slots[l.src].id.clone(),
                tgt: problem.target_slots[l.tgt].id.clone(),
            });
        }
    }
    for c in &problem.creators {
        if truth(model, &c.var) {
            for s in &problem.firings[c.firing].binding {
                target.traces.push(TraceLink {
                    src: problem.source_slots[*s].id.clone(),
                    tgt: problem.target_slots[c.slot].id.clone(),
                });
            }
        }
    }
    source.normalize();
    target.normalize();
    let binding = problem
        .pre_bindings
        .iter()
        .find(|b| truth(model, &b.var))
        .map(|b| {
            problem
                .pre_names
                .iter()
                .zip(&b.slots)
                .map(|(n, s)| (n.clone(), problem.source_slots[*s].id.clone()))
                .collect()
        })
        .unwrap_or_default();
    Counterexample {
        source,
        target,
        binding,
    }
}
