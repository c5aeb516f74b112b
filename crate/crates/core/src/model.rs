//! Instance models: typed graphs with attribute valuations and trace links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Metamodel, MetamodelInfo, Value};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown association `{0}`")]
    UnknownAssociation(String),
    #[error("duplicate element id `{0}`")]
    DuplicateId(String),
    #[error("unknown element id `{0}`")]
    MissingElement(String),
    #[error("mandatory associations form a cycle through `{0}`")]
    MandatoryCycle(String),
    #[error("invalid model JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Lang(#[from] crate::lang::LangError),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub id: String,
    #[serde(rename = "type")]
    pub class: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub assoc: String,
    pub src: String,
    pub tgt: String,
}

/// Provenance edge from a source element to a target element.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLink {
    pub src: String,
    pub tgt: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceModel {
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default)]
    pub traces: Vec<TraceLink>,
}

impl InstanceModel {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element_ids(&self) -> BTreeSet<String> {
        self.elements.iter().map(|e| e.id.clone()).collect()
    }

    pub fn link_set(&self) -> BTreeSet<Link> {
        self.links.iter().cloned().collect()
    }

    pub fn trace_set(&self) -> BTreeSet<TraceLink> {
        self.traces.iter().cloned().collect()
    }

    /// Sort all collections so serialization is canonical.
    pub fn normalize(&mut self) {
        self.elements.sort();
        self.links.sort();
        self.links.dedup();
        self.traces.sort();
        self.traces.dedup();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Type,
    MultiplicityLower,
    MultiplicityUpper,
    AttributeDomain,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub ids: Vec<String>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConformanceReport {
    pub violations: Vec<Violation>,
}

impl ConformanceReport {
    pub fn conforms(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, kind: ViolationKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }
}

pub fn validate_conformance(model: &InstanceModel, mm: &Metamodel) -> Result<ConformanceReport, ModelError> {
    let info = MetamodelInfo::build(mm, &[])?;
    validate_with_info(model, &info)
}

pub fn validate_with_info(model: &InstanceModel, info: &MetamodelInfo) -> Result<ConformanceReport, ModelError> {
    let mut report = ConformanceReport::default();
    let mut v = |kind, ids: Vec<&str>, message: String| {
        report.violations.push(Violation {
            kind,
            ids: ids.into_iter().map(String::from).collect(),
            message,
        })
    };
    let mut by_id: BTreeMap<&str, &Element> = BTreeMap::new();
    for e in &model.elements {
        if by_id.insert(&e.id, e).is_some() {
            return Err(ModelError::DuplicateId(e.id.clone()));
        }
        let Some(ci) = info.class(&e.class) else {
            return Err(ModelError::UnknownClass(e.class.clone()));
        };
        if ci.is_abstract {
            v(
                ViolationKind::Type,
                vec![&e.id],
                format!("abstract instantiation of `{}`", e.class),
            );
        }
        for (a, val) in &e.attrs {
            match info.attribute(&e.class, a) {
                None => v(
                    ViolationKind::AttributeDomain,
                    vec![&e.id],
                    format!("`{}` has no attribute `{a}`", e.class),
                ),
                Some(d) => {
                    if !info.domain_contains(d, val) {
                        v(
                            ViolationKind::AttributeDomain,
                            vec![&e.id],
                            format!("value {val} of `{}.{a}` lies outside its domain", e.id),
                        )
                    }
                }
            }
        }
    }
    let mut out_count: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    let mut in_count: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    for l in &model.links {
        let Some(a) = info.association(&l.assoc) else {
            return Err(ModelError::UnknownAssociation(l.assoc.clone()));
        };
        let (Some(s), Some(t)) = (by_id.get(l.src.as_str()), by_id.get(l.tgt.as_str())) else {
            v(
                ViolationKind::Type,
                vec![&l.src, &l.tgt],
                format!("link `{}` has a dangling endpoint", l.assoc),
            );
            continue;
        };
        if !info.is_subtype(&s.class, &a.source) || !info.is_subtype(&t.class, &a.target) {
            v(
                ViolationKind::Type,
                vec![&l.src, &l.tgt],
                format!(
                    "link `{}` from `{}` to `{}` is ill-typed (expects `{}` -> `{}`)",
                    l.assoc, s.class, t.class, a.source, a.target
                ),
            );
        }
        *out_count.entry((&l.src, &l.assoc)).or_default() += 1;
        *in_count.entry((&l.tgt, &l.assoc)).or_default() += 1;
    }
    for name in &info.assoc_order {
        let a = &info.associations[name];
        for e in &model.elements {
            for (end_class, mult, counts, dir) in [
                (&a.source, a.target_mult, &out_count, "outgoing"),
                (&a.target, a.source_mult, &in_count, "incoming"),
            ] {
                if !info.is_subtype(&e.class, end_class) {
                    continue;
                }
                let n = counts.get(&(e.id.as_str(), name.as_str())).copied().unwrap_or(0);
                if n < mult.lower {
                    v(
                        ViolationKind::MultiplicityLower,
                        vec![&e.id],
                        format!("`{}` has {n} {dir} `{name}` links, needs at least {}", e.id, mult.lower),
                    );
                }
                if let Some(u) = mult.upper {
                    if n > u {
                        v(
                            ViolationKind::MultiplicityUpper,
                            vec![&e.id],
                            format!("`{}` has {n} {dir} `{name}` links, allows at most {u}", e.id),
                        );
                    }
                }
            }
        }
    }
    for t in &model.traces {
        if !by_id.contains_key(t.src.as_str()) && !by_id.contains_key(t.tgt.as_str()) {
            v(
                ViolationKind::Type,
                vec![&t.src, &t.tgt],
                "trace link with no endpoint in this model".to_string(),
            );
        }
    }
    Ok(report)
}

/// Which end of an association an element sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Source,
    Target,
}

/// A lower-bound obligation: each instance of `from` needs at least `lower`
/// neighbours of type `to` through `assoc`, sitting at the opposite end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MandatoryEdge {
    pub from: String,
    pub to: String,
    pub assoc: String,
    /// End occupied by `from`.
    pub from_end: End,
    pub lower: u32,
}

pub fn mandatory_edges(info: &MetamodelInfo) -> Vec<MandatoryEdge> {
    let mut out = Vec::new();
    for name in &info.assoc_order {
        let a = &info.associations[name];
        if a.target_mult.lower > 0 {
            out.push(MandatoryEdge {
                from: a.source.clone(),
                to: a.target.clone(),
                assoc: name.clone(),
                from_end: End::Source,
                lower: a.target_mult.lower,
            });
        }
        if a.source_mult.lower > 0 {
            out.push(MandatoryEdge {
                from: a.target.clone(),
                to: a.source.clone(),
                assoc: name.clone(),
                from_end: End::Target,
                lower: a.source_mult.lower,
            });
        }
    }
    out
}

/// Obligations applying to instances of concrete class `class` (inherited ones included).
pub fn obligations_of<'e>(info: &MetamodelInfo, edges: &'e [MandatoryEdge], class: &str) -> Vec<&'e MandatoryEdge> {
    edges.iter().filter(|e| info.is_subtype(class, &e.from)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClosureInfo {
    /// Elements forced transitively by one instance of each concrete class.
    pub per_class_forced: BTreeMap<String, u64>,
    /// Per concrete class, the forced elements broken down by concrete class.
    pub forced_by_class: BTreeMap<String, BTreeMap<String, u64>>,
    pub a: u64,
}

impl ClosureInfo {
    pub fn forced(&self, class: &str) -> u64 {
        self.per_class_forced.get(class).copied().unwrap_or(0)
    }
}

pub fn mandatory_closure(mm: &Metamodel) -> Result<ClosureInfo, ModelError> {
    let info = MetamodelInfo::build(mm, &[])?;
    closure_with_info(&info)
}

pub fn closure_with_info(info: &MetamodelInfo) -> Result<ClosureInfo, ModelError> {
    let edges = mandatory_edges(info);
    let mut out = ClosureInfo::default();
    for c in info.concrete_classes() {
        let mut stack = Vec::new();
        let v = forced_vector(info, &edges, c, None, &mut stack)?;
        let total: u64 = v.values().sum();
        out.a = out.a.max(total);
        out.per_class_forced.insert(c.clone(), total);
        out.forced_by_class.insert(c.clone(), v);
    }
    Ok(out)
}

/// Forced elements (excluding the instance itself) for one instance of `class`
/// that was reached through `via` (association and the end it sits on).
fn forced_vector(
    info: &MetamodelInfo,
    edges: &[MandatoryEdge],
    class: &str,
    via: Option<(&str, End)>,
    stack: &mut Vec<String>,
) -> Result<BTreeMap<String, u64>, ModelError> {
    if stack.iter().any(|s| s == class) {
        return Err(ModelError::MandatoryCycle(class.to_string()));
    }
    stack.push(class.to_string());
    let mut total: BTreeMap<String, u64> = BTreeMap::new();
    for e in obligations_of(info, edges, class) {
        let mut need = e.lower as u64;
        if via == Some((e.assoc.as_str(), e.from_end)) {
            need -= 1;
        }
        if need == 0 {
            continue;
        }
        let arrive_end = match e.from_end {
            End::Source => End::Target,
            End::Target => End::Source,
        };
        // Worst case over concrete subtypes, componentwise.
        let mut worst: BTreeMap<String, u64> = BTreeMap::new();
        for d in info.concrete_subtypes(&e.to) {
            let mut sub = forced_vector(info, edges, d, Some((&e.assoc, arrive_end)), stack)?;
            *sub.entry(d.clone()).or_default() += 1;
            for (k, n) in sub {
                let w = worst.entry(k).or_default();
                *w = (*w).max(n);
            }
        }
        for (k, n) in worst {
            *total.entry(k).or_default() += n * need;
        }
    }
    stack.pop();
    Ok(total)
}

/// Induced submodel on `keep`, extended with the least mandatory closure
/// available inside `model`.
pub fn induce_submodel(
    model: &InstanceModel,
    keep: &BTreeSet<String>,
    mm: &Metamodel,
) -> Result<InstanceModel, ModelError> {
    let info = MetamodelInfo::build(mm, &[])?;
    induce_with_info(model, keep, &info)
}

pub fn induce_with_info(
    model: &InstanceModel,
    keep: &BTreeSet<String>,
    info: &MetamodelInfo,
) -> Result<InstanceModel, ModelError> {
    let edges = mandatory_edges(info);
    let by_id: BTreeMap<&str, &Element> = model.elements.iter().map(|e| (e.id.as_str(), e)).collect();
    for k in keep {
        if !by_id.contains_key(k.as_str()) {
            return Err(ModelError::MissingElement(k.clone()));
        }
    }
    let mut kept: BTreeSet<String> = keep.clone();
    let mut queue: VecDeque<String> = keep.iter().cloned().collect();
    let mut sorted_links: Vec<&Link> = model.links.iter().collect();
    sorted_links.sort();
    while let Some(id) = queue.pop_front() {
        let el = by_id[id.as_str()];
        for e in obligations_of(info, &edges, &el.class) {
            let neighbours: Vec<&str> = sorted_links
                .iter()
                .filter(|l| l.assoc == e.assoc)
                .filter_map(|l| match e.from_end {
                    End::Source if l.src == id => Some(l.tgt.as_str()),
                    End::Target if l.tgt == id => Some(l.src.as_str()),
                    _ => None,
                })
                .filter(|n| by_id.get(n).is_some_and(|x| info.is_subtype(&x.class, &e.to)))
                .collect();
            let already = neighbours.iter().filter(|n| kept.contains(**n)).count() as u32;
            let mut missing = e.lower.saturating_sub(already);
            for n in neighbours {
                if missing == 0 {
                    break;
                }
                if kept.insert(n.to_string()) {
                    queue.push_back(n.to_string());
                    missing -= 1;
                }
            }
        }
    }
    let mut out = InstanceModel {
        elements: model
            .elements
            .iter()
            .filter(|e| kept.contains(&e.id))
            .cloned()
            .collect(),
        links: model
            .links
            .iter()
            .filter(|l| kept.contains(&l.src) && kept.contains(&l.tgt))
            .cloned()
            .collect(),
        traces: model
            .traces
            .iter()
            .filter(|t| kept.contains(&t.src))
            .cloned()
            .collect(),
    };
    out.normalize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_spec;

    fn mm(text: &str) -> Metamodel {
        parse_spec(text).unwrap().metamodels.remove(0)
    }

    #[test]
    fn empty_model_conforms() {
        let m = mm("metamodel M { class A assoc r : A -> A [1..1] }");
        let r = validate_conformance(&InstanceModel::default(), &m).unwrap();
        assert!(r.conforms());
    }

    #[test]
    fn chain_closure() {
        let m = mm("metamodel M { class A class B class C assoc ab : A -> B [1..1] assoc bc : B -> C [1..1] }");
        let c = mandatory_closure(&m).unwrap();
        assert_eq!(c.forced("A"), 2);
        assert_eq!(c.forced("B"), 1);
        assert_eq!(c.forced("C"), 0);
        assert_eq!(c.a, 2);
    }

    #[test]
    fn no_lower_bounds_gives_zero() {
        let m = mm("metamodel M { class A class B assoc ab : A -> B [0..3] }");
        assert_eq!(mandatory_closure(&m).unwrap().a, 0);
    }

    #[test]
    fn one_to_one_composition_is_not_a_cycle() {
        let m = mm("metamodel M { class A class B assoc ab : A [1..1] -> B [1..1] }");
        let c = mandatory_closure(&m).unwrap();
        assert_eq!(c.forced("A"), 1);
        assert_eq!(c.forced("B"), 1);
    }

    #[test]
    fn growing_cycle_is_rejected() {
        let m = mm("metamodel M { class A class B assoc ab : A -> B [1..1] assoc ba : B -> A [1..1] }");
        assert!(matches!(mandatory_closure(&m), Err(ModelError::MandatoryCycle(_))));
    }

    #[test]
    fn abstract_instantiation_flagged() {
        let m = mm("metamodel M { abstract class C class D extends C }");
        let model = InstanceModel::from_json(r#"{"elements":[{"id":"x","type":"C"}]}"#).unwrap();
        let r = validate_conformance(&model, &m).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert!(r.violations[0].message.contains("abstract instantiation"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(InstanceModel::from_json(r#"{"elements":[],"extra":1}"#).is_err());
        assert!(InstanceModel::from_json(r#"{"elements":[{"id":"a","type":"A","foo":1}]}"#).is_err());
    }

    #[test]
    fn unknown_class_is_an_error() {
        let m = mm("metamodel M { class A }");
        let model = InstanceModel::from_json(r#"{"elements":[{"id":"x","type":"Z"}]}"#).unwrap();
        assert!(matches!(validate_conformance(&model, &m), Err(ModelError::UnknownClass(_))));
    }

    #[test]
    fn induce_adds_mandatory_container() {
        let m = mm("metamodel M { class Package class Class assoc pe : Package [1..1] -> Class }");
        let model = InstanceModel::from_json(
            r#"{"elements":[{"id":"p","type":"Package"},{"id":"c","type":"Class"},{"id":"c2","type":"Class"}],
                "links":[{"assoc":"pe","src":"p","tgt":"c"},{"assoc":"pe","src":"p","tgt":"c2"}]}"#,
        )
        .unwrap();
        let keep: BTreeSet<String> = ["c".to_string()].into();
        let sub = induce_submodel(&model, &keep, &m).unwrap();
        assert_eq!(sub.element_ids(), ["c".to_string(), "p".to_string()].into());
        assert_eq!(sub.links.len(), 1);
        assert!(validate_conformance(&sub, &m).unwrap().conforms());
        assert!(induce_submodel(&model, &BTreeSet::new(), &m).unwrap().is_empty());
        let all = model.element_ids();
        let mut same = model.clone();
        same.normalize();
        assert_eq!(induce_submodel(&model, &all, &m).unwrap(), same);
    }
}
