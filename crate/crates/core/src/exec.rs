//! Concrete, layer-by-layer execution and concrete property evaluation.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::lang::{
    BindExpr, MetamodelInfo, PatternGraph, PropertyDecl, RuleRef, TransformationView, Value,
};
use crate::model::{validate_with_info, Element, InstanceModel, Link, ModelError, TraceLink};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("source model does not conform: {0}")]
    NonConformant(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lang(#[from] crate::lang::LangError),
}

/// One rule firing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Firing {
    pub layer: String,
    pub rule: String,
    pub binding: Vec<String>,
    pub created: Vec<String>,
}

/// A match that did not fire because a backward link failed to resolve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkippedFiring {
    pub layer: String,
    pub rule: String,
    pub binding: Vec<String>,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExecutionResult {
    pub target: InstanceModel,
    pub traces: Vec<TraceLink>,
    pub firings: Vec<Firing>,
    pub skipped: Vec<SkippedFiring>,
}

impl ExecutionResult {
    /// Firing log as newline-delimited JSON.
    pub fn log_ndjson(&self) -> String {
        self.firings
            .iter()
            .map(|f| serde_json::to_string(f).expect("firing serializes") + "\n")
            .collect()
    }
}

/// Deterministic id of an element created by a rule firing.
pub fn target_id(rule: &str, binding: &[String], apply_element: &str) -> String {
    format!("{rule}#{}#{apply_element}", binding.join(","))
}

/// Indexed read-only view of a model for pattern matching.
pub struct ModelIndex<'m> {
    pub model: &'m InstanceModel,
    pub info: &'m MetamodelInfo,
    links: HashSet<(&'m str, &'m str, &'m str)>,
    by_id: BTreeMap<&'m str, &'m Element>,
}

impl<'m> ModelIndex<'m> {
    pub fn new(model: &'m InstanceModel, info: &'m MetamodelInfo) -> Self {
        ModelIndex {
            model,
            info,
            links: model
                .links
                .iter()
                .map(|l| (l.assoc.as_str(), l.src.as_str(), l.tgt.as_str()))
                .collect(),
            by_id: model.elements.iter().map(|e| (e.id.as_str(), e)).collect(),
        }
    }

    pub fn element(&self, id: &str) -> Option<&'m Element> {
        self.by_id.get(id).copied()
    }

    pub fn has_link(&self, assoc: &str, src: &str, tgt: &str) -> bool {
        self.links.contains(&(assoc, src, tgt))
    }

    /// Attribute value, falling back to the domain default.
    pub fn attr(&self, e: &Element, attr: &str) -> Value {
        if let Some(v) = e.attrs.get(attr) {
            return v.clone();
        }
        match self.info.attribute(&e.class, attr) {
            Some(d) => self.info.default_value(d),
            None => Value::Int(0),
        }
    }

    /// All injective, type-compatible, guard- and link-satisfying matches of
    /// `g` in pattern-element order. Enumeration stops once `visit` returns false.
    pub fn for_each_match(&self, g: &PatternGraph, mut visit: impl FnMut(&[&'m Element]) -> bool) {
        let cands: Vec<Vec<&'m Element>> = g
            .elements
            .iter()
            .map(|pe| {
                self.model
                    .elements
                    .iter()
                    .filter(|e| self.info.is_subtype(&e.class, &pe.class))
                    .filter(|e| {
                        pe.guards
                            .iter()
                            .all(|gd| gd.op.eval(&self.attr(e, &gd.attr), &gd.value.to_value()))
                    })
                    .collect()
            })
            .collect();
        let idx: Vec<(usize, usize, &str)> = g
            .links
            .iter()
            .filter_map(|l| Some((g.index_of(&l.from)?, g.index_of(&l.to)?, l.assoc.as_str())))
            .collect();
        let mut cur: Vec<&'m Element> = Vec::with_capacity(g.elements.len());
        self.rec(&cands, &idx, &mut cur, &mut visit);
    }

    fn rec(
        &self,
        cands: &[Vec<&'m Element>],
        links: &[(usize, usize, &str)],
        cur: &mut Vec<&'m Element>,
        visit: &mut impl FnMut(&[&'m Element]) -> bool,
    ) -> bool {
        let k = cur.len();
        if k == cands.len() {
            return visit(cur);
        }
        for &e in &cands[k] {
            if cur.iter().any(|x| x.id == e.id) {
                continue;
            }
            cur.push(e);
            let ok = links.iter().all(|&(f, t, a)| {
                if f > k || t > k || (f != k && t != k) {
                    return true;
                }
                self.has_link(a, &cur[f].id, &cur[t].id)
            });
            if ok && !self.rec(cands, links, cur, visit) {
                cur.pop();
                return false;
            }
            cur.pop();
        }
        true
    }

    pub fn matches(&self, g: &PatternGraph) -> Vec<Vec<&'m Element>> {
        let mut out = Vec::new();
        self.for_each_match(g, |m| {
            out.push(m.to_vec());
            true
        });
        out
    }
}

/// Execute every layer of the transformation after checking conformance.
pub fn execute(view: &TransformationView, source: &InstanceModel) -> Result<ExecutionResult, ExecError> {
    let rep = validate_with_info(source, &view.src)?;
    let bad: Vec<String> = rep
        .violations
        .iter()
        .map(|v| v.message.clone())
        .collect();
    if !bad.is_empty() {
        return Err(ExecError::NonConformant(bad.join("; ")));
    }
    Ok(execute_rules(view, source, |_| true))
}

/// Execute only the rules accepted by `keep`, without a conformance check.
pub fn execute_rules(
    view: &TransformationView,
    source: &InstanceModel,
    keep: impl Fn(RuleRef) -> bool,
) -> ExecutionResult {
    let idx = ModelIndex::new(source, &view.src);
    let mut res = ExecutionResult::default();
    let mut target_elems: BTreeMap<String, Element> = BTreeMap::new();
    let mut created_layer: BTreeMap<String, usize> = BTreeMap::new();
    let mut traces: BTreeSet<TraceLink> = BTreeSet::new();
    let mut links: BTreeSet<Link> = BTreeSet::new();
    let mut traced_from: BTreeMap<String, Vec<String>> = BTreeMap::new();

    for (li, layer) in view.t.layers.iter().enumerate() {
        let mut new_traces = Vec::new();
        for (ri, rule) in layer.rules.iter().enumerate() {
            if !keep(RuleRef { layer: li, rule: ri }) {
                continue;
            }
            for m in idx.matches(&rule.matcher) {
                let binding: Vec<String> = m.iter().map(|e| e.id.clone()).collect();
                let bind_of = |name: &str| rule.matcher.index_of(name).map(|i| m[i]);
                // Backward resolution against earlier layers only.
                let mut resolved: BTreeMap<&str, String> = BTreeMap::new();
                let mut failure = None;
                let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
                for b in &rule.backward {
                    groups.entry(b.apply.as_str()).or_default().push(b.matched.as_str());
                }
                for (ae_name, srcs) in &groups {
                    let ae = rule.apply_element(ae_name).expect("resolved");
                    let mut cands: Option<BTreeSet<String>> = None;
                    for s in srcs {
                        let sid = &bind_of(s).expect("resolved").id;
                        let here: BTreeSet<String> = traced_from
                            .get(sid)
                            .into_iter()
                            .flatten()
                            .filter(|t| created_layer.get(*t).is_some_and(|l| *l < li))
                            .filter(|t| view.tgt.is_subtype(&target_elems[*t].class, &ae.class))
                            .cloned()
                            .collect();
                        cands = Some(match cands {
                            None => here,
                            Some(c) => c.intersection(&here).cloned().collect(),
                        });
                    }
                    let cands = cands.unwrap_or_default();
                    if cands.len() == 1 {
                        resolved.insert(ae_name, cands.into_iter().next().unwrap());
                    } else {
                        failure = Some(format!(
                            "backward element `{ae_name}` has {} candidates",
                            cands.len()
                        ));
                        break;
                    }
                }
                if let Some(reason) = failure {
                    log::debug!("skipping {} on {:?}: {reason}", rule.name, binding);
                    res.skipped.push(SkippedFiring {
                        layer: layer.name.clone(),
                        rule: rule.name.clone(),
                        binding,
                        reason,
                    });
                    continue;
                }
                let mut created = Vec::new();
                let mut ids: BTreeMap<&str, String> = resolved;
                for ae in rule.fresh_elements() {
                    let id = target_id(&rule.name, &binding, &ae.name);
                    let ci = view.tgt.class(&ae.class).expect("resolved");
                    let mut attrs = BTreeMap::new();
                    for (a, d) in &ci.attributes {
                        attrs.insert(a.clone(), view.tgt.default_value(d));
                    }
                    for b in &ae.bindings {
                        let v = match &b.expr {
                            BindExpr::Literal(l) => l.to_value(),
                            BindExpr::Copy { element, attr } => idx.attr(bind_of(element).expect("resolved"), attr),
                        };
                        attrs.insert(b.attr.clone(), v);
                    }
                    target_elems.insert(
                        id.clone(),
                        Element {
                            id: id.clone(),
                            class: ae.class.clone(),
                            attrs,
                        },
                    );
                    created_layer.insert(id.clone(), li);
                    for s in &binding {
                        new_traces.push(TraceLink {
                            src: s.clone(),
                            tgt: id.clone(),
                        });
                    }
                    ids.insert(ae.name.as_str(), id.clone());
                    created.push(id);
                }
                for l in &rule.apply.links {
                    links.insert(Link {
                        assoc: l.assoc.clone(),
                        src: ids[l.from.as_str()].clone(),
                        tgt: ids[l.to.as_str()].clone(),
                    });
                }
                res.firings.push(Firing {
                    layer: layer.name.clone(),
                    rule: rule.name.clone(),
                    binding,
                    created,
                });
            }
        }
        // Outputs become visible to backward links only after the layer ends.
        for t in new_traces {
            traced_from.entry(t.src.clone()).or_default().push(t.tgt.clone());
            traces.insert(t);
        }
    }
    res.traces = traces.into_iter().collect();
    res.target = InstanceModel {
        elements: target_elems.into_values().collect(),
        links: links.into_iter().collect(),
        traces: res.traces.clone(),
    };
    res
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConcreteVerdict {
    pub holds: bool,
    /// Precondition bindings (element name to source id) lacking a witness.
    pub violating_bindings: Vec<BTreeMap<String, String>>,
}

pub fn check_property_concrete(
    view: &TransformationView,
    prop: &PropertyDecl,
    source: &InstanceModel,
    result: &ExecutionResult,
) -> ConcreteVerdict {
    let sidx = ModelIndex::new(source, &view.src);
    let tidx = ModelIndex::new(&result.target, &view.tgt);
    let traces: HashSet<(&str, &str)> = result
        .traces
        .iter()
        .map(|t| (t.src.as_str(), t.tgt.as_str()))
        .collect();
    let tr: Vec<(usize, usize)> = prop
        .traces
        .iter()
        .filter_map(|t| {
            Some((
                prop.postcondition.index_of(&t.post)?,
                prop.precondition.index_of(&t.pre)?,
            ))
        })
        .collect();
    let mut violating = Vec::new();
    for pre in sidx.matches(&prop.precondition) {
        let mut found = false;
        tidx.for_each_match(&prop.postcondition, |post| {
            if tr
                .iter()
                .all(|&(pi, si)| traces.contains(&(pre[si].id.as_str(), post[pi].id.as_str())))
            {
                found = true;
                return false;
            }
            true
        });
        if !found {
            violating.push(
                prop.precondition
                    .elements
                    .iter()
                    .zip(&pre)
                    .map(|(pe, e)| (pe.name.clone(), e.id.clone()))
                    .collect(),
            );
        }
    }
    ConcreteVerdict {
        holds: violating.is_empty(),
        violating_bindings: violating,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_spec;

    const SPEC: &str = r#"
metamodel UML {
    class Package { name: String }
    class Class { name: String isAbstract: Bool isFinal: Bool }
    assoc packagedElement : Package -> Class
}
metamodel Java {
    class PackageDeclaration { name: String }
    class CompilationUnit { fileName: String }
    class ClassDeclaration { name: String visibility: String isAbstract: Bool isFinal: Bool }
    assoc package : CompilationUnit -> PackageDeclaration
    assoc types : CompilationUnit -> ClassDeclaration
}
transformation uml2java : UML -> Java {
    layer CreatePackages {
        rule Package2PackageDeclaration {
            match { any pkg : Package }
            apply { pd : PackageDeclaration { name = pkg.name } }
        }
    }
    layer CreateTypes {
        rule Class2CompilationUnit {
            match {
                any pkg : Package
                any cls : Class
                direct pe : packagedElement -- pkg.cls
            }
            apply {
                pkgDecl : PackageDeclaration
                cu : CompilationUnit { fileName = cls.name }
                classDecl : ClassDeclaration {
                    name = cls.name,
                    visibility = "public",
                    isAbstract = cls.isAbstract,
                    isFinal = cls.isFinal
                }
                outP : package -- cu.pkgDecl
                outT : types -- cu.classDecl
            }
            backward { pkgDecl <--trace-- pkg }
        }
    }
}
property PackageHasPackageDeclaration {
    precondition { any pkg : Package }
    postcondition { pd : PackageDeclaration pd <--trace-- pkg }
}
property ClassHasTwoDecls {
    precondition { any c : Class }
    postcondition { a : ClassDeclaration b : ClassDeclaration a <--trace-- c b <--trace-- c }
}
"#;

    fn model(json: &str) -> InstanceModel {
        InstanceModel::from_json(json).unwrap()
    }

    #[test]
    fn layer_one_maps_package() {
        let spec = parse_spec(SPEC).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        let src = model(r#"{"elements":[{"id":"p","type":"Package","attrs":{"name":"app"}}]}"#);
        let r = execute(&view, &src).unwrap();
        assert_eq!(r.target.elements.len(), 1);
        assert_eq!(r.target.elements[0].class, "PackageDeclaration");
        assert_eq!(r.target.elements[0].attrs["name"], Value::Str("app".into()));
        assert_eq!(r.traces.len(), 1);
        let v = check_property_concrete(&view, &spec.properties[0], &src, &r);
        assert!(v.holds);
    }

    #[test]
    fn empty_source_gives_empty_target() {
        let spec = parse_spec(SPEC).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        let r = execute(&view, &InstanceModel::default()).unwrap();
        assert!(r.target.is_empty());
        assert!(r.firings.is_empty());
    }

    #[test]
    fn class_rule_resolves_backward_link() {
        let spec = parse_spec(SPEC).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        let src = model(
            r#"{"elements":[{"id":"p","type":"Package","attrs":{"name":"app"}},
                {"id":"c","type":"Class","attrs":{"name":"Order"}}],
                "links":[{"assoc":"packagedElement","src":"p","tgt":"c"}]}"#,
        );
        let r = execute(&view, &src).unwrap();
        let cu = r.target.element("Class2CompilationUnit#p,c#cu").unwrap();
        assert_eq!(cu.attrs["fileName"], Value::Str("Order".into()));
        assert!(r.target.element("Class2CompilationUnit#p,c#classDecl").is_some());
        assert!(r.target.links.contains(&Link {
            assoc: "package".into(),
            src: "Class2CompilationUnit#p,c#cu".into(),
            tgt: "Package2PackageDeclaration#p#pd".into(),
        }));
        let v = check_property_concrete(&view, &spec.properties[1], &src, &r);
        assert!(!v.holds);
        assert_eq!(v.violating_bindings[0]["c"], "c");
    }

    #[test]
    fn same_layer_outputs_are_invisible() {
        let text = SPEC.replace("    }\n    layer CreateTypes {\n", "");
        let spec = parse_spec(&text).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        let src = model(
            r#"{"elements":[{"id":"p","type":"Package"},{"id":"c","type":"Class"}],
                "links":[{"assoc":"packagedElement","src":"p","tgt":"c"}]}"#,
        );
        let r = execute_rules(&view, &src, |_| true);
        assert_eq!(r.firings.len(), 1);
        assert_eq!(r.skipped.len(), 1);
    }
}
