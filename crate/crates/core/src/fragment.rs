//! Membership checks for the local, non-recursive transformation fragment
//! (R1-R6) and the bounded positive property fragment (P1-P4).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::lang::{BackwardLink, PropertyDecl, RuleRef, TransformationView};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Restriction {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    P1,
    P2,
    P3,
    P4,
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FragmentViolation {
    pub restriction: Restriction,
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FragmentReport {
    pub violations: Vec<FragmentViolation>,
    /// Restrictions checked and found to hold.
    pub satisfied: Vec<Restriction>,
    /// Maximum match arity.
    pub m: usize,
    /// Exact maximum pattern size.
    pub p: usize,
}

impl FragmentReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, r: Restriction) -> bool {
        self.violations.iter().any(|v| v.restriction == r)
    }

    fn push(&mut self, restriction: Restriction, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(FragmentViolation {
            restriction,
            location: location.into(),
            message: message.into(),
        });
    }

    fn finish(&mut self, checked: &[Restriction]) {
        self.satisfied = checked.iter().copied().filter(|r| !self.violates(*r)).collect();
    }
}

/// Rules (in any layer) that may create the element a backward link resolves
/// to: a fresh apply element typed below the link's apply class, created from
/// a match element whose type overlaps the matched class.
pub fn backward_producers(view: &TransformationView, rule: RuleRef, b: &BackwardLink) -> Vec<(RuleRef, String)> {
    let r = view.t.rule(rule);
    let (Some(ae), Some(me)) = (r.apply_element(&b.apply), r.matcher.element(&b.matched)) else {
        return vec![];
    };
    let mut out = Vec::new();
    for rr in view.t.rule_refs() {
        let other = view.t.rule(rr);
        if !other
            .matcher
            .elements
            .iter()
            .any(|m| view.src.overlaps(&m.class, &me.class))
        {
            continue;
        }
        for fe in other.fresh_elements() {
            if view.tgt.is_subtype(&fe.class, &ae.class) {
                out.push((rr, fe.name.clone()));
            }
        }
    }
    out
}

pub fn check_flnr(view: &TransformationView) -> FragmentReport {
    let mut rep = FragmentReport::default();
    let t = view.t;
    let mut deps: BTreeMap<RuleRef, BTreeSet<RuleRef>> = BTreeMap::new();
    for rr in t.rule_refs() {
        let r = t.rule(rr);
        let loc = format!("{}/{}", t.layers[rr.layer].name, r.name);
        rep.m = rep.m.max(r.arity());
        for l in &r.matcher.links {
            if !l.direct {
                rep.push(Restriction::R1, &loc, format!("indirect link `{}` in match pattern", l.name));
            }
        }
        for b in &r.backward {
            let prods = backward_producers(view, rr, b);
            deps.entry(rr).or_default().extend(prods.iter().map(|(p, _)| *p));
            if !prods.iter().any(|(p, _)| p.layer < rr.layer) {
                let msg = if prods.is_empty() {
                    format!(
                        "backward link `{} <--trace-- {}` has no producing rule",
                        b.apply, b.matched
                    )
                } else {
                    format!(
                        "backward link `{} <--trace-- {}` resolves only to rules in the same or a later layer",
                        b.apply, b.matched
                    )
                };
                rep.push(Restriction::R3, &loc, msg);
            }
        }
    }
    if let Some(cyc) = find_cycle(&deps) {
        let names: Vec<&str> = cyc.iter().map(|r| t.rule(*r).name.as_str()).collect();
        rep.push(
            Restriction::R4,
            t.name.clone(),
            format!("backward dependencies form a cycle: {}", names.join(" -> ")),
        );
    }
    for info in [&view.src, &view.tgt] {
        for cname in &info.order {
            let c = &info.classes[cname];
            for (a, d) in &c.attributes {
                if info.attribute_owner(cname, a) == Some(cname.as_str()) && !d.is_finite() {
                    rep.push(
                        Restriction::R5,
                        format!("{}.{cname}.{a}", info.name),
                        format!("attribute `{cname}.{a}` has an unbounded domain"),
                    );
                }
            }
        }
    }
    rep.finish(&[
        Restriction::R1,
        Restriction::R2,
        Restriction::R3,
        Restriction::R4,
        Restriction::R5,
        Restriction::R6,
    ]);
    rep
}

fn find_cycle(deps: &BTreeMap<RuleRef, BTreeSet<RuleRef>>) -> Option<Vec<RuleRef>> {
    fn dfs(
        n: RuleRef,
        deps: &BTreeMap<RuleRef, BTreeSet<RuleRef>>,
        state: &mut BTreeMap<RuleRef, u8>,
        path: &mut Vec<RuleRef>,
    ) -> Option<Vec<RuleRef>> {
        state.insert(n, 1);
        path.push(n);
        for &m in deps.get(&n).into_iter().flatten() {
            match state.get(&m).copied().unwrap_or(0) {
                1 => {
                    let start = path.iter().position(|x| *x == m).unwrap_or(0);
                    let mut c = path[start..].to_vec();
                    c.push(m);
                    return Some(c);
                }
                0 => {
                    if let Some(c) = dfs(m, deps, state, path) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        path.pop();
        state.insert(n, 2);
        None
    }
    let mut state = BTreeMap::new();
    for &n in deps.keys() {
        if state.get(&n).copied().unwrap_or(0) == 0 {
            if let Some(c) = dfs(n, deps, &mut state, &mut vec![]) {
                return Some(c);
            }
        }
    }
    None
}

pub fn check_gbpp(prop: &PropertyDecl) -> FragmentReport {
    let mut rep = FragmentReport {
        p: prop.precondition.elements.len().max(prop.postcondition.elements.len()),
        ..Default::default()
    };
    for (side, g) in [("precondition", &prop.precondition), ("postcondition", &prop.postcondition)] {
        for l in &g.links {
            if !l.direct {
                rep.push(
                    Restriction::P2,
                    format!("{}/{side}", prop.name),
                    format!("indirect link `{}`", l.name),
                );
            }
        }
    }
    for t in &prop.traces {
        for (name, g, side) in [
            (&t.post, &prop.postcondition, "postcondition"),
            (&t.pre, &prop.precondition, "precondition"),
        ] {
            if g.element(name).is_none() {
                rep.push(
                    Restriction::P3,
                    format!("{}/traces", prop.name),
                    format!("trace constraint names `{name}`, which is not a declared {side} element"),
                );
            }
        }
    }
    rep.finish(&[Restriction::P1, Restriction::P2, Restriction::P3, Restriction::P4]);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_spec, TraceConstraint};

    const SPEC: &str = r#"
metamodel S { class A { n: Int[0..3] } class B assoc ab : A -> B }
metamodel T { class X class Y }
transformation t : S -> T {
  layer one { rule a2x { match { any a : A } apply { x : X } } }
  layer two {
    rule b2y { match { any a : A any b : B direct l : ab -- a.b }
               apply { x : X y : Y } backward { x <--trace-- a } }
  }
}
property P { precondition { any a : A } postcondition { x : X x <--trace-- a } }
"#;

    #[test]
    fn clean_spec_has_no_violations() {
        let spec = parse_spec(SPEC).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        let rep = check_flnr(&view);
        assert!(rep.holds(), "{:?}", rep.violations);
        assert_eq!(rep.m, 2);
        assert!(rep.satisfied.contains(&Restriction::R6));
        let g = check_gbpp(&spec.properties[0]);
        assert!(g.holds());
        assert_eq!(g.p, 1);
    }

    #[test]
    fn same_layer_backward_is_r3() {
        let text = SPEC.replace(
            "layer two {",
            "layer two { rule a2x2 { match { any a : A } apply { x : X } }",
        );
        let text = text.replace("layer one { rule a2x { match { any a : A } apply { x : X } } }", "layer one { }");
        let spec = parse_spec(&text).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        let rep = check_flnr(&view);
        assert!(rep.violates(Restriction::R3));
    }

    #[test]
    fn unbounded_string_is_r5() {
        let text = SPEC.replace("class B", "class B { s: String }");
        let spec = parse_spec(&text).unwrap();
        let view = TransformationView::new(&spec, &spec.transformations[0]).unwrap();
        assert!(check_flnr(&view).violates(Restriction::R5));
    }

    #[test]
    fn dangling_trace_is_p3() {
        let spec = parse_spec(SPEC).unwrap();
        let mut p = spec.properties[0].clone();
        p.traces.push(TraceConstraint {
            post: "ghost".into(),
            pre: "a".into(),
        });
        assert!(check_gbpp(&p).violates(Restriction::P3));
    }
}
