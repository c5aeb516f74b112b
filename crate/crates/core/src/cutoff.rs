//! Relevance analysis, cutoff formulas, per-class bounds and fragment selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::fragment::check_gbpp;
use crate::lang::{
    ApplyElement, BindExpr, MetamodelInfo, PatternElement, PropertyDecl, Rule, RuleRef,
    TransformationView,
};
use crate::model::{closure_with_info, mandatory_edges, ClosureInfo, ModelError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub enum RelevanceMode {
    Legacy,
    TraceAware,
    #[default]
    TraceAttributeAware,
}

impl FromStr for RelevanceMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "legacy" => Ok(Self::Legacy),
            "trace" => Ok(Self::TraceAware),
            "trace-attr" => Ok(Self::TraceAttributeAware),
            other => Err(format!("unknown dependency mode `{other}`")),
        }
    }
}

/// One structural demand of the postcondition with the rules able to meet it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Requirement {
    pub what: String,
    pub creators: BTreeSet<RuleRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelevanceResult {
    pub mode: RelevanceMode,
    pub rules: BTreeSet<RuleRef>,
    pub requirements: Vec<Requirement>,
    /// Backward-dependency edges among relevant rules (rule to producer).
    pub deps: BTreeMap<RuleRef, BTreeSet<RuleRef>>,
    pub d: usize,
    pub c: usize,
    pub source_classes: BTreeSet<String>,
}

impl RelevanceResult {
    pub fn r(&self) -> usize {
        self.rules.len()
    }

    pub fn rule_names(&self, view: &TransformationView) -> Vec<String> {
        self.rules.iter().map(|r| view.t.rule(*r).name.clone()).collect()
    }
}

fn literal_contradicts(view: &TransformationView, ae: &ApplyElement, pe: &PatternElement) -> bool {
    pe.guards.iter().any(|g| {
        let bound = ae.bindings.iter().find(|b| b.attr == g.attr);
        let v = match bound.map(|b| &b.expr) {
            Some(BindExpr::Copy { .. }) => return false,
            Some(BindExpr::Literal(l)) => l.to_value(),
            None => match view.tgt.attribute(&ae.class, &g.attr) {
                Some(d) => view.tgt.default_value(d),
                None => return false,
            },
        };
        !g.op.eval(&v, &g.value.to_value())
    })
}

fn creates_traced(view: &TransformationView, rule: &Rule, pe: &PatternElement, from: &[&str], mode: RelevanceMode) -> bool {
    if mode != RelevanceMode::Legacy
        && !from
            .iter()
            .all(|s| rule.matcher.elements.iter().any(|m| view.src.overlaps(&m.class, s)))
    {
        return false;
    }
    rule.fresh_elements().any(|ae| {
        view.tgt.is_subtype(&ae.class, &pe.class)
            && !(mode == RelevanceMode::TraceAttributeAware && literal_contradicts(view, ae, pe))
    })
}

/// Earlier-layer rules a rule depends on through its backward links.
fn producers(view: &TransformationView, rr: RuleRef, mode: RelevanceMode) -> BTreeSet<RuleRef> {
    let rule = view.t.rule(rr);
    let mut out = BTreeSet::new();
    for b in &rule.backward {
        let ae = rule.apply_element(&b.apply).expect("resolved");
        let me = rule.matcher.element(&b.matched).expect("resolved");
        for other in view.t.rule_refs().into_iter().filter(|o| o.layer < rr.layer) {
            let o = view.t.rule(other);
            let type_ok = o.fresh_elements().any(|f| view.tgt.is_subtype(&f.class, &ae.class));
            let trace_ok = mode == RelevanceMode::Legacy
                || o.matcher.elements.iter().any(|m| view.src.overlaps(&m.class, &me.class));
            if type_ok && trace_ok {
                out.insert(other);
            }
        }
    }
    out
}

pub fn relevant_rules(view: &TransformationView, prop: &PropertyDecl, mode: RelevanceMode) -> RelevanceResult {
    let mut requirements = Vec::new();
    for pe in &prop.postcondition.elements {
        let from: Vec<&str> = prop
            .traces
            .iter()
            .filter(|t| t.post == pe.name)
            .filter_map(|t| prop.precondition.element(&t.pre).map(|e| e.class.as_str()))
            .collect();
        let creators = view
            .t
            .rule_refs()
            .into_iter()
            .filter(|rr| creates_traced(view, view.t.rule(*rr), pe, &from, mode))
            .collect();
        let what = if from.is_empty() {
            format!("{} : {}", pe.name, pe.class)
        } else {
            format!("{} : {} traced from {}", pe.name, pe.class, from.join(", "))
        };
        requirements.push(Requirement { what, creators });
    }
    for l in &prop.postcondition.links {
        let (Some(f), Some(t)) = (prop.postcondition.element(&l.from), prop.postcondition.element(&l.to)) else {
            continue;
        };
        let creators = view
            .t
            .rule_refs()
            .into_iter()
            .filter(|rr| {
                let r = view.t.rule(*rr);
                r.apply.links.iter().any(|al| {
                    let cls = |n: &str| r.apply_element(n).map(|e| e.class.clone()).unwrap_or_default();
                    al.assoc == l.assoc
                        && view.tgt.overlaps(&cls(&al.from), &f.class)
                        && view.tgt.overlaps(&cls(&al.to), &t.class)
                })
            })
            .collect();
        requirements.push(Requirement {
            what: format!("{} : {} -- {}.{}", l.name, l.assoc, l.from, l.to),
            creators,
        });
    }
    let mut rules: BTreeSet<RuleRef> = requirements.iter().flat_map(|r| r.creators.iter().copied()).collect();
    let mut deps: BTreeMap<RuleRef, BTreeSet<RuleRef>> = BTreeMap::new();
    let mut work: Vec<RuleRef> = rules.iter().copied().collect();
    while let Some(rr) = work.pop() {
        let ps = producers(view, rr, mode);
        for p in &ps {
            if rules.insert(*p) {
                work.push(*p);
            }
        }
        deps.insert(rr, ps);
    }
    let d = longest_path(&rules, &deps);
    let mut classes: BTreeSet<String> = prop.precondition.elements.iter().map(|e| e.class.clone()).collect();
    for rr in &rules {
        classes.extend(view.t.rule(*rr).matcher.elements.iter().map(|e| e.class.clone()));
    }
    let source_classes = close_classes(&view.src, classes);
    RelevanceResult {
        mode,
        c: source_classes.len().max(1),
        rules,
        requirements,
        deps,
        d,
        source_classes,
    }
}

/// Relevance restricted to the rules of a layer subset.
pub fn restrict_relevance(
    view: &TransformationView,
    prop: &PropertyDecl,
    rel: &RelevanceResult,
    layers: &BTreeSet<usize>,
) -> RelevanceResult {
    let rules: BTreeSet<RuleRef> = rel.rules.iter().filter(|r| layers.contains(&r.layer)).copied().collect();
    let deps: BTreeMap<RuleRef, BTreeSet<RuleRef>> = rel
        .deps
        .iter()
        .filter(|(r, _)| rules.contains(r))
        .map(|(r, ps)| (*r, ps.intersection(&rules).copied().collect()))
        .collect();
    let mut classes: BTreeSet<String> = prop.precondition.elements.iter().map(|e| e.class.clone()).collect();
    for rr in &rules {
        classes.extend(view.t.rule(*rr).matcher.elements.iter().map(|e| e.class.clone()));
    }
    let source_classes = close_classes(&view.src, classes);
    RelevanceResult {
        mode: rel.mode,
        c: source_classes.len().max(1),
        d: longest_path(&rules, &deps),
        requirements: rel
            .requirements
            .iter()
            .map(|q| Requirement {
                what: q.what.clone(),
                creators: q.creators.intersection(&rules).copied().collect(),
            })
            .collect(),
        rules,
        deps,
        source_classes,
    }
}

fn longest_path(rules: &BTreeSet<RuleRef>, deps: &BTreeMap<RuleRef, BTreeSet<RuleRef>>) -> usize {
    fn depth(r: RuleRef, deps: &BTreeMap<RuleRef, BTreeSet<RuleRef>>, memo: &mut BTreeMap<RuleRef, usize>) -> usize {
        if let Some(d) = memo.get(&r) {
            return *d;
        }
        // Producers sit in strictly earlier layers, so recursion terminates.
        let d = deps
            .get(&r)
            .into_iter()
            .flatten()
            .map(|p| 1 + depth(*p, deps, memo))
            .max()
            .unwrap_or(0);
        memo.insert(r, d);
        d
    }
    let mut memo = BTreeMap::new();
    rules.iter().map(|r| depth(*r, deps, &mut memo)).max().unwrap_or(0)
}

/// Close a class set under mandatory associations.
fn close_classes(info: &MetamodelInfo, mut set: BTreeSet<String>) -> BTreeSet<String> {
    let edges = mandatory_edges(info);
    loop {
        let add: Vec<String> = edges
            .iter()
            .filter(|e| set.iter().any(|c| info.overlaps(c, &e.from)) && !set.contains(&e.to))
            .map(|e| e.to.clone())
            .collect();
        if add.is_empty() {
            return set;
        }
        set.extend(add);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CutoffParams {
    pub c: u64,
    pub m: u64,
    pub p: u64,
    pub d: u64,
    pub a: u64,
    pub r: u64,
}

impl CutoffParams {
    pub fn d_prime(&self) -> u64 {
        self.d.max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutoffBounds {
    pub coarse: u64,
    pub sharp: u64,
    pub tight: u64,
    pub k: u64,
    /// Formulas attaining the minimum.
    pub dominant: Vec<String>,
}

impl CutoffBounds {
    pub fn dominant_label(&self) -> String {
        self.dominant.join("/")
    }
}

pub fn compute_cutoff(p: &CutoffParams) -> CutoffBounds {
    let dp = p.d_prime();
    let a1 = p.a.saturating_add(1);
    let mul = |xs: &[u64]| xs.iter().fold(1u64, |acc, x| acc.saturating_mul(*x));
    let coarse = mul(&[p.c, p.m.saturating_add(p.p), dp, a1]);
    let sharp = mul(&[p.p, 1u64.saturating_add(mul(&[p.m, p.r])), dp, a1]);
    let tight = mul(&[
        p.p,
        1u64.saturating_add(mul(&[p.m.saturating_sub(1), p.r, p.d])),
        a1,
    ]);
    let k = coarse.min(sharp).min(tight);
    let dominant = [("coarse", coarse), ("sharp", sharp), ("tight", tight)]
        .into_iter()
        .filter(|(_, v)| *v == k)
        .map(|(n, _)| n.to_string())
        .collect();
    CutoffBounds {
        coarse,
        sharp,
        tight,
        k,
        dominant,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PerClassBounds {
    pub source: BTreeMap<String, u64>,
    pub target: BTreeMap<String, u64>,
}

impl PerClassBounds {
    pub fn max(&self) -> u64 {
        self.source.values().chain(self.target.values()).copied().max().unwrap_or(0)
    }

    pub fn source_of(&self, c: &str) -> u64 {
        self.source.get(c).copied().unwrap_or(0)
    }

    pub fn target_of(&self, c: &str) -> u64 {
        self.target.get(c).copied().unwrap_or(0)
    }

    /// Every component equal to `k`, for runs without per-class reduction.
    pub fn uniform(view: &TransformationView, k: u64) -> Self {
        PerClassBounds {
            source: view.src.concrete_classes().map(|c| (c.clone(), k)).collect(),
            target: view.tgt.concrete_classes().map(|c| (c.clone(), k)).collect(),
        }
    }
}

/// Number of candidate bindings of a rule under source bounds.
pub fn binding_bound(view: &TransformationView, rule: &Rule, source: &BTreeMap<String, u64>) -> u64 {
    rule.matcher.elements.iter().fold(1u64, |acc, e| {
        let n: u64 = view
            .src
            .concrete_subtypes(&e.class)
            .iter()
            .map(|d| source.get(d).copied().unwrap_or(0))
            .sum();
        acc.saturating_mul(n)
    })
}

/// Least fixed point of seeds, source closure, target production and target
/// closure. Source components are capped at `k`.
pub fn per_class_bounds(
    view: &TransformationView,
    prop: &PropertyDecl,
    rules: &BTreeSet<RuleRef>,
    closure: &ClosureInfo,
    k: u64,
) -> Result<PerClassBounds, ModelError> {
    let mut seeds: BTreeMap<String, u64> = BTreeMap::new();
    for e in &prop.precondition.elements {
        for d in view.src.concrete_subtypes(&e.class) {
            *seeds.entry(d.clone()).or_default() += 1;
        }
    }
    Ok(bounds_from_seeds(view, prop, rules, closure, &closure_with_info(&view.tgt)?, &seeds, k))
}

pub fn bounds_from_seeds(
    view: &TransformationView,
    prop: &PropertyDecl,
    rules: &BTreeSet<RuleRef>,
    src_closure: &ClosureInfo,
    tgt_closure: &ClosureInfo,
    seeds: &BTreeMap<String, u64>,
    k: u64,
) -> PerClassBounds {
    let mut out = PerClassBounds::default();
    for c in view.src.concrete_classes() {
        out.source.insert(c.clone(), 0);
    }
    for c in view.tgt.concrete_classes() {
        out.target.insert(c.clone(), 0);
    }
    for (c, n) in seeds {
        *out.source.entry(c.clone()).or_default() += n;
        for (d, f) in src_closure.forced_by_class.get(c).into_iter().flatten() {
            *out.source.entry(d.clone()).or_default() += n.saturating_mul(*f);
        }
    }
    for v in out.source.values_mut() {
        *v = (*v).min(k);
    }
    let mut produced: BTreeMap<String, u64> = BTreeMap::new();
    for e in &prop.postcondition.elements {
        for d in view.tgt.concrete_subtypes(&e.class) {
            *produced.entry(d.clone()).or_default() += 1;
        }
    }
    for rr in rules {
        let rule = view.t.rule(*rr);
        let n = binding_bound(view, rule, &out.source);
        for ae in rule.fresh_elements() {
            *produced.entry(ae.class.clone()).or_default() += n;
        }
    }
    for (c, n) in &produced {
        *out.target.entry(c.clone()).or_default() += n;
        for (d, f) in tgt_closure.forced_by_class.get(c).into_iter().flatten() {
            *out.target.entry(d.clone()).or_default() += n.saturating_mul(*f);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub enum FragmentKind {
    #[default]
    Minimal,
    Baseline,
    Full,
}

impl FromStr for FragmentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "minimal" => Ok(Self::Minimal),
            "baseline" => Ok(Self::Baseline),
            "full" => Ok(Self::Full),
            other => Err(format!("unknown fragment `{other}`")),
        }
    }
}

impl fmt::Display for FragmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Minimal => "minimal",
            Self::Baseline => "baseline",
            Self::Full => "full",
        })
    }
}

/// Close a layer set under backward dependencies of the relevant rules it holds.
pub fn close_layers(rel: &RelevanceResult, mut layers: BTreeSet<usize>) -> BTreeSet<usize> {
    loop {
        let add: Vec<usize> = rel
            .rules
            .iter()
            .filter(|r| layers.contains(&r.layer))
            .flat_map(|r| rel.deps.get(r).into_iter().flatten())
            .map(|p| p.layer)
            .filter(|l| !layers.contains(l))
            .collect();
        if add.is_empty() {
            return layers;
        }
        layers.extend(add);
    }
}

pub fn select_fragment(view: &TransformationView, rel: &RelevanceResult, kind: FragmentKind) -> Vec<usize> {
    let layers: BTreeSet<usize> = match kind {
        FragmentKind::Full => (0..view.t.layers.len()).collect(),
        FragmentKind::Baseline => close_layers(rel, rel.rules.iter().map(|r| r.layer).collect()),
        FragmentKind::Minimal => close_layers(
            rel,
            rel.requirements
                .iter()
                .filter_map(|req| req.creators.iter().map(|r| r.layer).min())
                .collect(),
        ),
    };
    layers.into_iter().collect()
}

/// Everything the cutoff command reports for one property.
#[derive(Clone, Debug, Serialize)]
pub struct CutoffReport {
    pub property: String,
    pub mode: RelevanceMode,
    pub relevant_rules: Vec<String>,
    pub params: CutoffParams,
    pub bounds: CutoffBounds,
    pub per_class: PerClassBounds,
}

impl CutoffReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "property": self.property,
            "relevantRules": self.relevant_rules,
            "params": {
                "c": self.params.c, "m": self.params.m, "p": self.params.p,
                "d": self.params.d, "dPrime": self.params.d_prime(),
                "a": self.params.a, "r": self.params.r,
            },
            "bounds": {
                "coarse": self.bounds.coarse, "sharp": self.bounds.sharp,
                "tight": self.bounds.tight, "k": self.bounds.k,
            },
            "perClass": { "source": self.per_class.source, "target": self.per_class.target },
            "perClassMax": self.per_class.max(),
            "dominant": self.bounds.dominant,
        })
    }
}

/// Parameters for a property given a set of relevant rules.
pub fn cutoff_params(view: &TransformationView, prop: &PropertyDecl, rel: &RelevanceResult, closure: &ClosureInfo) -> CutoffParams {
    let m = view
        .t
        .rule_refs()
        .into_iter()
        .map(|r| view.t.rule(r).arity())
        .max()
        .unwrap_or(0)
        .max(1);
    CutoffParams {
        c: rel.c as u64,
        m: m as u64,
        p: check_gbpp(prop).p.max(1) as u64,
        d: rel.d as u64,
        a: closure.a,
        r: rel.r() as u64,
    }
}

pub fn cutoff_report(view: &TransformationView, prop: &PropertyDecl, mode: RelevanceMode) -> Result<CutoffReport, ModelError> {
    let rel = relevant_rules(view, prop, mode);
    let closure = closure_with_info(&view.src)?;
    let params = cutoff_params(view, prop, &rel, &closure);
    let bounds = compute_cutoff(&params);
    let per_class = per_class_bounds(view, prop, &rel.rules, &closure, bounds.k)?;
    Ok(CutoffReport {
        property: prop.name.clone(),
        mode,
        relevant_rules: rel.rule_names(view),
        params,
        bounds,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: u64, m: u64, p: u64, d: u64, a: u64, r: u64) -> CutoffParams {
        CutoffParams { c, m, p, d, a, r }
    }

    #[test]
    fn identity_like_transformation() {
        let b = compute_cutoff(&params(1, 1, 1, 0, 0, 1));
        assert_eq!(b.tight, 1);
        assert_eq!(b.k, 1);
    }

    #[test]
    fn ties_report_every_minimum() {
        let b = compute_cutoff(&params(1, 1, 1, 0, 0, 0));
        assert_eq!((b.coarse, b.sharp, b.tight), (2, 1, 1));
        assert_eq!(b.dominant_label(), "sharp/tight");
    }

    #[test]
    fn modes_parse() {
        assert_eq!("trace-attr".parse::<RelevanceMode>().unwrap(), RelevanceMode::TraceAttributeAware);
        assert!("x".parse::<RelevanceMode>().is_err());
        assert_eq!("full".parse::<FragmentKind>().unwrap(), FragmentKind::Full);
    }
}
