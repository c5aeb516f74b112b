//! Name resolution and static checks over a parsed specification.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::info::MetamodelInfo;
use super::ParseDiagnostic;

struct Resolver {
    diags: Vec<ParseDiagnostic>,
}

impl Resolver {
    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(ParseDiagnostic::error(span, msg));
    }
}

pub fn resolve(mut spec: Specification) -> Result<Specification, Vec<ParseDiagnostic>> {
    let mut r = Resolver { diags: vec![] };
    let all_enums = spec.all_enums();

    let mut mm_names = BTreeSet::new();
    for mm in &spec.metamodels {
        if !mm_names.insert(mm.name.clone()) {
            r.error(mm.span, format!("duplicate metamodel `{}`", mm.name));
        }
    }

    let mut infos: BTreeMap<String, MetamodelInfo> = BTreeMap::new();
    for mm in &spec.metamodels {
        if check_metamodel(&mut r, mm, &all_enums) {
            let foreign: Vec<EnumDecl> = all_enums
                .iter()
                .filter(|e| !mm.enums.iter().any(|o| o.name == e.name))
                .cloned()
                .collect();
            match MetamodelInfo::build(mm, &foreign) {
                Ok(info) => {
                    infos.insert(mm.name.clone(), info);
                }
                Err(e) => r.error(mm.span, e.to_string()),
            }
        }
    }

    let mut pairs = BTreeSet::new();
    let mut t_names = BTreeSet::new();
    for t in &mut spec.transformations {
        if !t_names.insert(t.name.clone()) {
            r.error(t.span, format!("duplicate transformation `{}`", t.name));
        }
        if !pairs.insert((t.source.clone(), t.target.clone())) {
            r.error(
                t.span,
                format!(
                    "more than one transformation from `{}` to `{}`",
                    t.source, t.target
                ),
            );
        }
        let (Some(src), Some(tgt)) = (infos.get(&t.source), infos.get(&t.target)) else {
            for (role, n) in [("source", &t.source), ("target", &t.target)] {
                if !mm_names.contains(n) {
                    r.error(t.span, format!("unresolved {role} metamodel `{n}`"));
                }
            }
            continue;
        };
        check_transformation(&mut r, t, src, tgt);
    }

    let single = if spec.transformations.len() == 1 {
        Some(spec.transformations[0].name.clone())
    } else {
        None
    };
    let mut p_names = BTreeSet::new();
    let transformations = spec.transformations.clone();
    for p in &mut spec.properties {
        if !p_names.insert(p.name.clone()) {
            r.error(p.span, format!("duplicate property `{}`", p.name));
        }
        if !p.explicit_transformation {
            match &single {
                Some(t) => p.transformation = t.clone(),
                None => {
                    r.error(
                        p.span,
                        format!(
                            "property `{}` needs `for <transformation>` (file declares {} transformations)",
                            p.name,
                            transformations.len()
                        ),
                    );
                    continue;
                }
            }
        }
        let Some(t) = transformations.iter().find(|t| t.name == p.transformation) else {
            r.error(
                p.span,
                format!("unresolved transformation `{}`", p.transformation),
            );
            continue;
        };
        let (Some(src), Some(tgt)) = (infos.get(&t.source), infos.get(&t.target)) else {
            continue;
        };
        check_property(&mut r, p, src, tgt);
    }

    if r.diags.is_empty() {
        Ok(spec)
    } else {
        r.diags.sort_by_key(|d| (d.line, d.col));
        Err(r.diags)
    }
}

fn check_metamodel(r: &mut Resolver, mm: &Metamodel, all_enums: &[EnumDecl]) -> bool {
    let before = r.diags.len();
    let mut names = BTreeSet::new();
    for e in &mm.enums {
        if !names.insert(e.name.clone()) {
            r.error(mm.span, format!("duplicate enum `{}` in `{}`", e.name, mm.name));
        }
        let mut lits = BTreeSet::new();
        for l in &e.literals {
            if !lits.insert(l) {
                r.error(mm.span, format!("duplicate literal `{l}` in enum `{}`", e.name));
            }
        }
        if e.literals.is_empty() {
            r.error(mm.span, format!("enum `{}` has no literals", e.name));
        }
    }
    let mut classes = BTreeSet::new();
    for c in &mm.classes {
        if !classes.insert(c.name.clone()) {
            r.error(c.span, format!("duplicate class `{}` in `{}`", c.name, mm.name));
        }
        if names.contains(&c.name) {
            r.error(c.span, format!("class `{}` clashes with an enum", c.name));
        }
    }
    for c in &mm.classes {
        if let Some(p) = &c.parent {
            if !classes.contains(p) {
                r.error(c.span, format!("unresolved parent class `{p}` of `{}`", c.name));
            }
        }
        for a in &c.attributes {
            if let Domain::Enum(en) = &a.domain {
                let hits = all_enums.iter().filter(|e| &e.name == en).count();
                let local = mm.enums.iter().any(|e| &e.name == en);
                if hits == 0 {
                    r.error(
                        c.span,
                        format!("unresolved attribute type `{en}` for `{}.{}`", c.name, a.name),
                    );
                } else if hits > 1 && !local {
                    r.error(c.span, format!("ambiguous enum reference `{en}`"));
                }
            }
        }
    }
    // Inheritance cycles.
    let parents: BTreeMap<&str, Option<&str>> = mm
        .classes
        .iter()
        .map(|c| (c.name.as_str(), c.parent.as_deref()))
        .collect();
    for c in &mm.classes {
        let mut seen = BTreeSet::new();
        let mut cur = Some(c.name.as_str());
        while let Some(n) = cur {
            if !seen.insert(n) {
                r.error(c.span, format!("inheritance cycle through `{}`", c.name));
                break;
            }
            cur = parents.get(n).copied().flatten();
        }
    }
    let mut assocs = BTreeSet::new();
    for a in &mm.associations {
        if !assocs.insert(a.name.clone()) {
            r.error(mm.span, format!("duplicate association `{}`", a.name));
        }
        for end in [&a.source, &a.target] {
            if !classes.contains(end) {
                r.error(
                    mm.span,
                    format!("unresolved class `{end}` in association `{}`", a.name),
                );
            }
        }
    }
    r.diags.len() == before
}

/// Resolve bare or qualified enum literals against `domain`.
fn resolve_literal(
    r: &mut Resolver,
    span: Span,
    lit: &mut Literal,
    domain: &Domain,
    info: &MetamodelInfo,
    what: &str,
) {
    let ok = match (&mut *lit, domain) {
        (Literal::Bool(_), Domain::Bool) => true,
        (Literal::Int(_), d) if d.is_int() => true,
        (Literal::Str(_), d) if d.is_string() => true,
        (Literal::EnumLit { enum_name, literal }, Domain::Enum(en)) => {
            if enum_name.is_empty() {
                *enum_name = en.clone();
            }
            if enum_name != en {
                false
            } else {
                let found = info
                    .enums
                    .iter()
                    .find(|e| &e.name == en)
                    .is_some_and(|e| e.literals.contains(literal));
                if !found {
                    r.error(span, format!("unknown literal `{literal}` of enum `{en}` in {what}"));
                    return;
                }
                true
            }
        }
        _ => false,
    };
    if !ok {
        r.error(span, format!("literal `{lit}` does not fit domain {domain:?} in {what}"));
    }
}

fn check_pattern(
    r: &mut Resolver,
    g: &mut PatternGraph,
    info: &MetamodelInfo,
    names: &mut BTreeSet<String>,
    ctx: &str,
) {
    for e in &mut g.elements {
        if !names.insert(e.name.clone()) {
            r.error(e.span, format!("duplicate element name `{}` in {ctx}", e.name));
        }
        if !info.has_class(&e.class) {
            r.error(
                e.span,
                format!("unresolved class `{}` in {ctx} (metamodel `{}`)", e.class, info.name),
            );
            continue;
        }
        for gd in &mut e.guards {
            let Some(domain) = info.attribute(&e.class, &gd.attr).cloned() else {
                r.error(
                    e.span,
                    format!("unresolved attribute `{}.{}` in {ctx}", e.class, gd.attr),
                );
                continue;
            };
            if gd.op.is_ordering() && !domain.is_int() {
                r.error(
                    e.span,
                    format!("ordering comparison on non-integer attribute `{}` in {ctx}", gd.attr),
                );
            }
            let what = format!("{ctx} guard on `{}`", e.name);
            resolve_literal(r, e.span, &mut gd.value, &domain, info, &what);
        }
    }
    let mut link_names = BTreeSet::new();
    for l in &g.links {
        if !link_names.insert(l.name.clone()) {
            r.error(l.span, format!("duplicate link name `{}` in {ctx}", l.name));
        }
        check_link(r, l, &g.elements.iter().map(|e| (e.name.clone(), e.class.clone())).collect(), info, ctx);
    }
}

fn check_link(
    r: &mut Resolver,
    l: &PatternLink,
    elems: &BTreeMap<String, String>,
    info: &MetamodelInfo,
    ctx: &str,
) {
    let Some(assoc) = info.association(&l.assoc) else {
        r.error(l.span, format!("unresolved association `{}` in {ctx}", l.assoc));
        return;
    };
    for (end, want) in [(&l.from, &assoc.source), (&l.to, &assoc.target)] {
        match elems.get(end) {
            None => r.error(l.span, format!("unresolved element `{end}` in link `{}`", l.name)),
            Some(cls) => {
                if !info.overlaps(cls, want) {
                    r.error(
                        l.span,
                        format!(
                            "link `{}`: element `{end}` of type `{cls}` is incompatible with association end `{want}`",
                            l.name
                        ),
                    );
                }
            }
        }
    }
}

fn check_transformation(
    r: &mut Resolver,
    t: &mut Transformation,
    src: &MetamodelInfo,
    tgt: &MetamodelInfo,
) {
    let mut rule_names = BTreeSet::new();
    let mut layer_names = BTreeSet::new();
    for layer in &mut t.layers {
        if !layer_names.insert(layer.name.clone()) {
            r.error(t.span, format!("duplicate layer `{}`", layer.name));
        }
        for rule in &mut layer.rules {
            if !rule_names.insert(rule.name.clone()) {
                r.error(rule.span, format!("duplicate rule `{}`", rule.name));
            }
            let ctx = format!("rule `{}`", rule.name);
            let mut names = BTreeSet::new();
            check_pattern(r, &mut rule.matcher, src, &mut names, &ctx);
            let match_types: BTreeMap<String, String> = rule
                .matcher
                .elements
                .iter()
                .map(|e| (e.name.clone(), e.class.clone()))
                .collect();
            let backward_apply: BTreeSet<String> =
                rule.backward.iter().map(|b| b.apply.clone()).collect();
            for b in &rule.backward {
                if !match_types.contains_key(&b.matched) {
                    r.error(
                        rule.span,
                        format!("backward link references unknown match element `{}`", b.matched),
                    );
                }
                if !rule.apply.elements.iter().any(|e| e.name == b.apply) {
                    r.error(
                        rule.span,
                        format!("backward link references unknown apply element `{}`", b.apply),
                    );
                }
            }
            let mut seen_bw = BTreeSet::new();
            for b in &rule.backward {
                if !seen_bw.insert((b.apply.clone(), b.matched.clone())) {
                    r.error(rule.span, format!("duplicate backward link for `{}`", b.apply));
                }
            }
            for ae in &mut rule.apply.elements {
                if !names.insert(ae.name.clone()) {
                    r.error(ae.span, format!("duplicate element name `{}` in {ctx}", ae.name));
                }
                let Some(ci) = tgt.class(&ae.class) else {
                    r.error(
                        ae.span,
                        format!("unresolved class `{}` in {ctx} (metamodel `{}`)", ae.class, tgt.name),
                    );
                    continue;
                };
                let fresh = !backward_apply.contains(&ae.name);
                if fresh && ci.is_abstract {
                    r.error(
                        ae.span,
                        format!("apply element `{}` instantiates abstract class `{}`", ae.name, ae.class),
                    );
                }
                if !fresh && !ae.bindings.is_empty() {
                    r.error(
                        ae.span,
                        format!("backward-bound element `{}` cannot carry attribute bindings", ae.name),
                    );
                }
                let mut bound = BTreeSet::new();
                for b in &mut ae.bindings {
                    if !bound.insert(b.attr.clone()) {
                        r.error(ae.span, format!("attribute `{}` bound twice", b.attr));
                    }
                    let Some(domain) = tgt.attribute(&ae.class, &b.attr).cloned() else {
                        r.error(
                            ae.span,
                            format!("unresolved attribute `{}.{}` in {ctx}", ae.class, b.attr),
                        );
                        continue;
                    };
                    // `X.y` parses as a copy; it is an enum literal when `X` is no match element.
                    if let BindExpr::Copy { element, attr } = &b.expr {
                        if !match_types.contains_key(element)
                            && tgt.enums.iter().any(|e| &e.name == element)
                        {
                            b.expr = BindExpr::Literal(Literal::EnumLit {
                                enum_name: element.clone(),
                                literal: attr.clone(),
                            });
                        }
                    }
                    match &mut b.expr {
                        BindExpr::Literal(lit) => {
                            let what = format!("{ctx} binding `{}.{}`", ae.name, b.attr);
                            resolve_literal(r, ae.span, lit, &domain, tgt, &what)
                        }
                        BindExpr::Copy { element, attr } => {
                            let Some(mcls) = match_types.get(element) else {
                                r.error(
                                    ae.span,
                                    format!("binding copies from unknown match element `{element}`"),
                                );
                                continue;
                            };
                            match src.attribute(mcls, attr) {
                                None => r.error(
                                    ae.span,
                                    format!("unresolved attribute `{mcls}.{attr}` in {ctx}"),
                                ),
                                Some(sd) => {
                                    if !same_kind(sd, &domain) {
                                        r.error(
                                            ae.span,
                                            format!(
                                                "binding `{}.{}` copies `{element}.{attr}` of incompatible kind",
                                                ae.name, b.attr
                                            ),
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let apply_types: BTreeMap<String, String> = rule
                .apply
                .elements
                .iter()
                .map(|e| (e.name.clone(), e.class.clone()))
                .collect();
            let mut link_names = BTreeSet::new();
            for l in &rule.apply.links {
                if !link_names.insert(l.name.clone()) {
                    r.error(l.span, format!("duplicate link name `{}` in {ctx}", l.name));
                }
                check_link(r, l, &apply_types, tgt, &ctx);
            }
        }
    }
}

fn same_kind(a: &Domain, b: &Domain) -> bool {
    match (a, b) {
        (Domain::Bool, Domain::Bool) => true,
        (Domain::Enum(x), Domain::Enum(y)) => x == y,
        _ => (a.is_int() && b.is_int()) || (a.is_string() && b.is_string()),
    }
}

fn check_property(r: &mut Resolver, p: &mut PropertyDecl, src: &MetamodelInfo, tgt: &MetamodelInfo) {
    let ctx = format!("property `{}`", p.name);
    let mut names = BTreeSet::new();
    check_pattern(r, &mut p.precondition, src, &mut names, &format!("{ctx} precondition"));
    let mut post_names = BTreeSet::new();
    check_pattern(r, &mut p.postcondition, tgt, &mut post_names, &format!("{ctx} postcondition"));
    for t in &p.traces {
        if p.postcondition.element(&t.post).is_none() {
            r.error(p.span, format!("trace constraint references unknown postcondition element `{}`", t.post));
        }
        if p.precondition.element(&t.pre).is_none() {
            r.error(p.span, format!("trace constraint references unknown precondition element `{}`", t.pre));
        }
    }
}
