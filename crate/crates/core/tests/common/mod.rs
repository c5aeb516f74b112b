//! Shared fixtures, an exhaustive enumeration oracle and a random model generator.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;

use dsltrans_core::exec::{check_property_concrete, execute};
use dsltrans_core::lang::{parse_spec, PropertyDecl, Specification, TransformationView, Value};
use dsltrans_core::model::{Element, InstanceModel, Link};
use dsltrans_core::verify::Status;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn load(name: &str) -> Specification {
    let text = std::fs::read_to_string(fixture_dir().join(name)).unwrap();
    parse_spec(&text).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

/// Every tiny spec, sorted by file name.
pub fn tiny_corpus() -> Vec<(String, Specification)> {
    let mut names: Vec<String> = std::fs::read_dir(fixture_dir().join("tiny"))
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".dslt"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let spec = load(&format!("tiny/{n}"));
            (n, spec)
        })
        .collect()
}

pub fn expected_status(prop: &str) -> Status {
    if prop.ends_with("_ShouldFail") {
        Status::Violated
    } else {
        Status::Holds
    }
}

/// Mixed-radix counter over `radices`; calls `f` on every digit vector.
fn for_each_digits(radices: &[usize], mut f: impl FnMut(&[usize]) -> bool) -> bool {
    let mut digits = vec![0usize; radices.len()];
    if radices.contains(&0) {
        return true;
    }
    loop {
        if !f(&digits) {
            return false;
        }
        let mut i = 0;
        loop {
            if i == digits.len() {
                return true;
            }
            digits[i] += 1;
            if digits[i] < radices[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn values_of(view: &TransformationView, class: &str) -> Vec<(String, Vec<Value>)> {
    view.src
        .class(class)
        .unwrap()
        .attributes
        .iter()
        .map(|(a, d)| {
            let vals = view.src.domain_values(d).unwrap_or_else(|| vec![view.src.default_value(d)]);
            (a.clone(), vals)
        })
        .collect()
}

/// Result of an exhaustive search.
pub struct Enumeration {
    pub models: usize,
    pub violation: Option<InstanceModel>,
}

/// Enumerates every conformant source model with at most `bounds[C]`
/// elements of each concrete class, executes it and evaluates `prop`.
pub fn brute_force(view: &TransformationView, prop: &PropertyDecl, bounds: &BTreeMap<String, u64>) -> Enumeration {
    let classes: Vec<(String, u64)> = view
        .src
        .concrete_classes()
        .filter_map(|c| bounds.get(c).copied().filter(|b| *b > 0).map(|b| (c.clone(), b)))
        .collect();
    let count_radices: Vec<usize> = classes.iter().map(|(_, b)| *b as usize + 1).collect();
    let mut seen = 0usize;
    let mut found = None;
    for_each_digits(&count_radices, |counts| {
        let mut elements = Vec::new();
        for ((c, _), n) in classes.iter().zip(counts) {
            for i in 1..=*n {
                elements.push(Element { id: format!("{c}_{i}"), class: c.clone(), attrs: BTreeMap::new() });
            }
        }
        let mut attr_slots: Vec<(usize, String, Vec<Value>)> = Vec::new();
        for (i, e) in elements.iter().enumerate() {
            for (a, vals) in values_of(view, &e.class) {
                attr_slots.push((i, a, vals));
            }
        }
        let mut candidates = Vec::new();
        for name in &view.src.assoc_order {
            let a = &view.src.associations[name];
            for s in &elements {
                for t in &elements {
                    if view.src.is_subtype(&s.class, &a.source) && view.src.is_subtype(&t.class, &a.target) {
                        candidates.push(Link { assoc: name.clone(), src: s.id.clone(), tgt: t.id.clone() });
                    }
                }
            }
        }
        assert!(candidates.len() < 16, "link grid too large for enumeration");
        let attr_radices: Vec<usize> = attr_slots.iter().map(|(_, _, v)| v.len()).collect();
        for_each_digits(&attr_radices, |choice| {
            let mut els = elements.clone();
            for ((i, a, vals), d) in attr_slots.iter().zip(choice) {
                els[*i].attrs.insert(a.clone(), vals[*d].clone());
            }
            for mask in 0u32..(1 << candidates.len()) {
                let links = candidates
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask & (1 << j) != 0)
                    .map(|(_, l)| l.clone())
                    .collect();
                let model = InstanceModel { elements: els.clone(), links, traces: vec![] };
                let Ok(res) = execute(view, &model) else { continue };
                seen += 1;
                if !check_property_concrete(view, prop, &model, &res).holds {
                    found = Some(model);
                    return false;
                }
            }
            true
        })
    });
    Enumeration { models: seen, violation: found }
}

/// Random source model respecting declared upper multiplicities and, where
/// possible, lower ones.
pub fn random_model(view: &TransformationView, rng: &mut impl Rng, max_per_class: usize) -> InstanceModel {
    let mut elements = Vec::new();
    for c in view.src.concrete_classes() {
        let n = rng.gen_range(0..=max_per_class);
        for i in 1..=n {
            let mut attrs = BTreeMap::new();
            for (a, vals) in values_of(view, c) {
                let v = if vals.len() == 1 {
                    match vals[0] {
                        Value::Int(_) => Value::Int(rng.gen_range(-2..5)),
                        Value::Str(_) => Value::Str(["", "a", "b"][rng.gen_range(0..3)].to_string()),
                        Value::Bool(_) => Value::Bool(rng.gen()),
                    }
                } else {
                    vals[rng.gen_range(0..vals.len())].clone()
                };
                attrs.insert(a, v);
            }
            elements.push(Element { id: format!("{c}_{i}"), class: c.clone(), attrs });
        }
    }
    let mut links = Vec::new();
    for name in &view.src.assoc_order {
        let a = &view.src.associations[name];
        let srcs: Vec<&Element> = elements.iter().filter(|e| view.src.is_subtype(&e.class, &a.source)).collect();
        let tgts: Vec<&Element> = elements.iter().filter(|e| view.src.is_subtype(&e.class, &a.target)).collect();
        let mut out_deg: BTreeMap<String, u32> = BTreeMap::new();
        let mut in_deg: BTreeMap<String, u32> = BTreeMap::new();
        let mut chosen: Vec<(String, String)> = Vec::new();
        let mut try_add = |s: &str, t: &str, chosen: &mut Vec<(String, String)>| {
            let fits = |deg: &BTreeMap<String, u32>, id: &str, upper: Option<u32>| {
                upper.is_none_or(|u| deg.get(id).copied().unwrap_or(0) < u)
            };
            if chosen.iter().any(|(a, b)| a == s && b == t)
                || !fits(&out_deg, s, a.target_mult.upper)
                || !fits(&in_deg, t, a.source_mult.upper)
            {
                return;
            }
            *out_deg.entry(s.to_string()).or_insert(0) += 1;
            *in_deg.entry(t.to_string()).or_insert(0) += 1;
            chosen.push((s.to_string(), t.to_string()));
        };
        if a.source_mult.lower > 0 && !srcs.is_empty() {
            for t in &tgts {
                let s = srcs[rng.gen_range(0..srcs.len())];
                try_add(&s.id, &t.id, &mut chosen);
            }
        }
        if a.target_mult.lower > 0 && !tgts.is_empty() {
            for s in &srcs {
                let t = tgts[rng.gen_range(0..tgts.len())];
                try_add(&s.id, &t.id, &mut chosen);
            }
        }
        for s in &srcs {
            for t in &tgts {
                if rng.gen_bool(0.35) {
                    try_add(&s.id, &t.id, &mut chosen);
                }
            }
        }
        links.extend(chosen.into_iter().map(|(src, tgt)| Link { assoc: name.clone(), src, tgt }));
    }
    InstanceModel { elements, links, traces: vec![] }
}
