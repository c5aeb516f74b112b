//! Attribute abstraction to finite domains and inheritance flattening.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lang::{
    BindExpr, CmpOp, Domain, Guard, LangError, MetamodelInfo, PropertyDecl, Specification, TransformationView,
    Value,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("unsupported predicate `{0}`")]
    Unsupported(String),
    #[error("pattern element `{element}` has abstract type `{class}` with no concrete subtypes")]
    Vacuous { element: String, class: String },
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// Attribute identity: metamodel, declaring class, attribute name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AttrKey {
    pub metamodel: String,
    pub class: String,
    pub attr: String,
}

impl fmt::Display for AttrKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.metamodel, self.class, self.attr)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Observable {
    pub key: AttrKey,
    /// Rendered predicates and bindings that mention the attribute.
    pub references: Vec<String>,
}

/// Comparison of an attribute against a constant.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Predicate {
    location: String,
    op: CmpOp,
    value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BlockSet {
    /// Union of inclusive integer intervals; `None` is unbounded.
    Ints { ranges: Vec<(Option<i64>, Option<i64>)> },
    /// The listed strings.
    Strings { values: Vec<String> },
    /// Every string not listed elsewhere in the partition.
    OtherStrings,
}

impl BlockSet {
    fn contains(&self, v: &Value, others: &BTreeSet<String>) -> bool {
        match (self, v) {
            (BlockSet::Ints { ranges }, Value::Int(n)) => ranges
                .iter()
                .any(|(lo, hi)| lo.is_none_or(|l| l <= *n) && hi.is_none_or(|h| *n <= h)),
            (BlockSet::Strings { values }, Value::Str(s)) => values.contains(s),
            (BlockSet::OtherStrings, Value::Str(s)) => !others.contains(s),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub label: String,
    pub members: BlockSet,
    pub representative: Value,
}

/// Partition of one attribute's concrete domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub blocks: Vec<Block>,
}

impl Partition {
    fn listed(&self) -> BTreeSet<String> {
        self.blocks
            .iter()
            .flat_map(|b| match &b.members {
                BlockSet::Strings { values } => values.clone(),
                _ => vec![],
            })
            .collect()
    }

    pub fn block_of(&self, v: &Value) -> Option<&Block> {
        let listed = self.listed();
        self.blocks.iter().find(|b| b.members.contains(v, &listed))
    }

    /// Representative of the block holding `v`.
    pub fn abstract_value(&self, v: &Value) -> Option<Value> {
        self.block_of(v).map(|b| b.representative.clone())
    }

    fn abstract_domain(&self, is_int: bool) -> Domain {
        if is_int {
            Domain::IntSet(
                self.blocks
                    .iter()
                    .filter_map(|b| match b.representative {
                        Value::Int(n) => Some(n),
                        _ => None,
                    })
                    .collect(),
            )
        } else {
            Domain::StringSet(
                self.blocks
                    .iter()
                    .filter_map(|b| match &b.representative {
                        Value::Str(s) => Some(s.clone()),
                        _ => None,
                    })
                    .collect(),
            )
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AbstractionMap {
    /// Attribute-only abstraction; structure is never changed.
    pub scope: &'static str,
    pub partitions: BTreeMap<String, Partition>,
    #[serde(skip)]
    keys: BTreeMap<String, AttrKey>,
}

impl AbstractionMap {
    pub fn partition(&self, key: &AttrKey) -> Option<&Partition> {
        self.partitions.get(&key.to_string())
    }

    pub fn insert(&mut self, key: AttrKey, p: Partition) {
        self.keys.insert(key.to_string(), key.clone());
        self.partitions.insert(key.to_string(), p);
    }

    pub fn is_identity(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

fn owner_key(info: &MetamodelInfo, class: &str, attr: &str) -> Option<AttrKey> {
    Some(AttrKey {
        metamodel: info.name.clone(),
        class: info.attribute_owner(class, attr)?.to_string(),
        attr: attr.to_string(),
    })
}

fn render_guard(elem: &str, g: &Guard) -> String {
    format!("{elem}.{} {} {}", g.attr, g.op.symbol(), g.value)
}

/// Everything the scan learns: predicates and copy edges per attribute.
#[derive(Default)]
struct Scan {
    refs: BTreeMap<AttrKey, Vec<String>>,
    preds: BTreeMap<AttrKey, Vec<Predicate>>,
    copies: Vec<(AttrKey, AttrKey)>,
}

fn scan(spec: &Specification) -> Result<Scan, AbstractionError> {
    let mut s = Scan::default();
    let note = |s: &mut Scan, key: AttrKey, text: String, pred: Option<Predicate>| {
        s.refs.entry(key.clone()).or_default().push(text);
        if let Some(p) = pred {
            s.preds.entry(key).or_default().push(p);
        }
    };
    for t in &spec.transformations {
        let view = TransformationView::new(spec, t)?;
        for rr in t.rule_refs() {
            let rule = t.rule(rr);
            for e in &rule.matcher.elements {
                for g in &e.guards {
                    if let Some(k) = owner_key(&view.src, &e.class, &g.attr) {
                        let text = format!("rule {}: {}", rule.name, render_guard(&e.name, g));
                        let p = Predicate { location: text.clone(), op: g.op, value: g.value.to_value() };
                        note(&mut s, k, text, Some(p));
                    }
                }
            }
            for ae in rule.fresh_elements() {
                for b in &ae.bindings {
                    let Some(tk) = owner_key(&view.tgt, &ae.class, &b.attr) else { continue };
                    match &b.expr {
                        BindExpr::Literal(l) => {
                            let text = format!("rule {}: {}.{} = {l}", rule.name, ae.name, b.attr);
                            let p = Predicate { location: text.clone(), op: CmpOp::Eq, value: l.to_value() };
                            note(&mut s, tk, text, Some(p));
                        }
                        BindExpr::Copy { element, attr } => {
                            let Some(me) = rule.matcher.element(element) else { continue };
                            let Some(sk) = owner_key(&view.src, &me.class, attr) else { continue };
                            let text = format!("rule {}: {}.{} = {element}.{attr}", rule.name, ae.name, b.attr);
                            note(&mut s, tk.clone(), text.clone(), None);
                            note(&mut s, sk.clone(), text, None);
                            s.copies.push((sk, tk));
                        }
                    }
                }
            }
        }
    }
    for prop in &spec.properties {
        let view = TransformationView::for_property(spec, prop)?;
        for (g, info) in [(&prop.precondition, &view.src), (&prop.postcondition, &view.tgt)] {
            for e in &g.elements {
                for gd in &e.guards {
                    if let Some(k) = owner_key(info, &e.class, &gd.attr) {
                        let text = format!("property {}: {}", prop.name, render_guard(&e.name, gd));
                        let p = Predicate { location: text.clone(), op: gd.op, value: gd.value.to_value() };
                        note(&mut s, k, text, Some(p));
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Attributes mentioned by guards, property constraints or copy bindings.
pub fn collect_observables(spec: &Specification) -> Result<Vec<Observable>, AbstractionError> {
    Ok(scan(spec)?
        .refs
        .into_iter()
        .map(|(key, references)| Observable { key, references })
        .collect())
}

/// Groups of attributes connected by copy bindings.
fn copy_groups(s: &Scan) -> Vec<BTreeSet<AttrKey>> {
    let mut groups: Vec<BTreeSet<AttrKey>> = s.refs.keys().map(|k| BTreeSet::from([k.clone()])).collect();
    for (a, b) in &s.copies {
        let ia = groups.iter().position(|g| g.contains(a)).expect("scanned");
        let ib = groups.iter().position(|g| g.contains(b)).expect("scanned");
        if ia != ib {
            let moved = groups.remove(ia.max(ib));
            groups[ia.min(ib)].extend(moved);
        }
    }
    groups
}

fn int_partition(preds: &[Predicate]) -> Partition {
    let mut cuts: BTreeSet<i64> = BTreeSet::new();
    for p in preds {
        let Value::Int(c) = p.value else { continue };
        match p.op {
            CmpOp::Lt | CmpOp::Ge => {
                cuts.insert(c);
            }
            CmpOp::Le | CmpOp::Gt => {
                cuts.insert(c.saturating_add(1));
            }
            CmpOp::Eq | CmpOp::Ne => {
                cuts.insert(c);
                cuts.insert(c.saturating_add(1));
            }
        }
    }
    let mut bounds: Vec<Option<i64>> = vec![None];
    bounds.extend(cuts.iter().map(|c| Some(*c)));
    let mut blocks = Vec::new();
    for (i, lo) in bounds.iter().enumerate() {
        let hi = bounds.get(i + 1).map(|n| n.map(|x| x - 1)).unwrap_or(None);
        let repr = match (lo, hi) {
            (lo, hi) if lo.is_none_or(|l| l <= 0) && hi.is_none_or(|h| 0 <= h) => 0,
            (Some(l), _) => *l,
            (None, Some(h)) => h,
            (None, None) => 0,
        };
        let show = |b: Option<i64>, inf: &str| b.map_or(inf.to_string(), |x| x.to_string());
        let label = if lo.is_some() && lo == &hi {
            format!("{{{}}}", lo.unwrap())
        } else {
            format!("[{}, {}]", show(*lo, "-inf"), show(hi, "+inf"))
        };
        blocks.push(Block {
            label,
            members: BlockSet::Ints { ranges: vec![(*lo, hi)] },
            representative: Value::Int(repr),
        });
    }
    default_first(blocks, &Value::Int(0))
}

fn string_partition(preds: &[Predicate]) -> Partition {
    let lits: BTreeSet<String> = preds
        .iter()
        .filter_map(|p| match &p.value {
            Value::Str(s) => Some(s.clone()),
            _ => None,
        })
        .collect();
    let mut blocks: Vec<Block> = lits
        .iter()
        .map(|s| Block {
            label: format!("{s:?}"),
            members: BlockSet::Strings { values: vec![s.clone()] },
            representative: Value::Str(s.clone()),
        })
        .collect();
    let mut other = String::new();
    while lits.contains(&other) {
        other.push('_');
    }
    blocks.push(Block {
        label: "OTHER".into(),
        members: BlockSet::OtherStrings,
        representative: Value::Str(other),
    });
    default_first(blocks, &Value::Str(String::new()))
}

/// Put the block of the concrete default value first so the abstract
/// default agrees with it.
fn default_first(mut blocks: Vec<Block>, default: &Value) -> Partition {
    let p = Partition { blocks: blocks.clone() };
    let label = p.block_of(default).map(|b| b.label.clone());
    if let Some(i) = blocks.iter().position(|b| Some(&b.label) == label.as_ref()) {
        let b = blocks.remove(i);
        blocks.insert(0, b);
    }
    Partition { blocks }
}

/// Build a finite-domain proof specification. Observed unbounded attributes
/// are partitioned by the constants they are compared with; unobserved ones
/// collapse to a single value.
pub fn synthesize_abstraction(spec: &Specification) -> Result<(Specification, AbstractionMap), AbstractionError> {
    let s = scan(spec)?;
    let mut map = AbstractionMap { scope: "attribute-only", ..Default::default() };
    let mut proof = spec.clone();
    let groups = copy_groups(&s);
    let domain_of = |k: &AttrKey| -> Option<Domain> {
        let mm = spec.metamodel(&k.metamodel)?;
        let c = mm.class(&k.class)?;
        c.attributes.iter().find(|a| a.name == k.attr).map(|a| a.domain.clone())
    };
    for group in &groups {
        let preds: Vec<Predicate> = group.iter().flat_map(|k| s.preds.get(k).cloned().unwrap_or_default()).collect();
        for k in group {
            let Some(d) = domain_of(k) else { continue };
            let part = match d {
                Domain::Int => int_partition(&preds),
                Domain::String => string_partition(&preds),
                _ => continue,
            };
            if preds.iter().any(|p| matches!((&d, &p.value), (Domain::Int, Value::Str(_)) | (Domain::String, Value::Int(_) | Value::Bool(_)))) {
                return Err(AbstractionError::Unsupported(format!("mixed-kind copy chain through {k}")));
            }
            map.insert(k.clone(), part);
        }
    }
    for mm in &spec.metamodels {
        for c in &mm.classes {
            for a in &c.attributes {
                let key = AttrKey { metamodel: mm.name.clone(), class: c.name.clone(), attr: a.name.clone() };
                if map.partition(&key).is_some() {
                    continue;
                }
                match a.domain {
                    Domain::Int => map.insert(key, int_partition(&[])),
                    Domain::String => map.insert(key, string_partition(&[])),
                    _ => {}
                }
            }
        }
    }
    for mm in &mut proof.metamodels {
        for c in &mut mm.classes {
            for a in &mut c.attributes {
                let key = AttrKey { metamodel: mm.name.clone(), class: c.name.clone(), attr: a.name.clone() };
                if let Some(p) = map.partition(&key) {
                    a.domain = p.abstract_domain(a.domain.is_int());
                }
            }
        }
    }
    Ok((proof, map))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredicateCheck {
    pub attribute: String,
    pub predicate: String,
    pub valid: bool,
    /// Block on which the predicate is not constant.
    pub offending_block: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AbstractionReport {
    pub observables: Vec<Observable>,
    pub checks: Vec<PredicateCheck>,
    pub valid: bool,
    /// Scope of the check.
    pub note: String,
}

fn constant_on(block: &Block, listed: &BTreeSet<String>, p: &Predicate) -> bool {
    let eval = |v: &Value| p.op.eval(v, &p.value);
    match (&block.members, &p.value) {
        (BlockSet::Ints { ranges }, Value::Int(c)) => {
            let mut samples = Vec::new();
            for (lo, hi) in ranges {
                let lo_v = lo.unwrap_or(i64::MIN);
                let hi_v = hi.unwrap_or(i64::MAX);
                samples.extend([lo_v, hi_v]);
                for x in [c.saturating_sub(1), *c, c.saturating_add(1)] {
                    if lo_v <= x && x <= hi_v {
                        samples.push(x);
                    }
                }
            }
            let vals: BTreeSet<bool> = samples.into_iter().map(|x| eval(&Value::Int(x))).collect();
            vals.len() <= 1
        }
        (BlockSet::Strings { values }, Value::Str(_)) => {
            values.iter().map(|s| eval(&Value::Str(s.clone()))).collect::<BTreeSet<_>>().len() <= 1
        }
        (BlockSet::OtherStrings, Value::Str(s)) => listed.contains(s),
        _ => false,
    }
}

/// Check every observed predicate is constant on every block of its
/// attribute's partition. Correlations between attributes are not checked.
pub fn validate_abstraction(spec: &Specification, map: &AbstractionMap) -> Result<AbstractionReport, AbstractionError> {
    let s = scan(spec)?;
    let groups = copy_groups(&s);
    let mut checks = Vec::new();
    for group in &groups {
        let preds: Vec<Predicate> = group.iter().flat_map(|k| s.preds.get(k).cloned().unwrap_or_default()).collect();
        for k in group {
            let Some(part) = map.partition(k) else { continue };
            let listed = part.listed();
            for p in &preds {
                let bad = part.blocks.iter().find(|b| !constant_on(b, &listed, p));
                checks.push(PredicateCheck {
                    attribute: k.to_string(),
                    predicate: p.location.clone(),
                    valid: bad.is_none(),
                    offending_block: bad.map(|b| b.label.clone()),
                });
            }
        }
    }
    Ok(AbstractionReport {
        observables: s.refs.into_iter().map(|(key, references)| Observable { key, references }).collect(),
        valid: checks.iter().all(|c| c.valid),
        checks,
        note: "validated per predicate; cross-attribute correlations are not checked".into(),
    })
}

/// What kind of claim a property makes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimKind {
    Structural,
    Traceability,
    AttributeExact,
}

pub fn claim_kind(prop: &PropertyDecl) -> ClaimKind {
    let guarded = prop
        .precondition
        .elements
        .iter()
        .chain(&prop.postcondition.elements)
        .any(|e| !e.guards.is_empty());
    if guarded {
        ClaimKind::AttributeExact
    } else if !prop.traces.is_empty() {
        ClaimKind::Traceability
    } else {
        ClaimKind::Structural
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlattenedVariant {
    pub original: String,
    /// Precondition element name to the concrete class substituted for it.
    pub substitution: BTreeMap<String, String>,
    pub property: PropertyDecl,
}

/// Expand abstract-typed precondition elements over their concrete
/// subtypes. Postcondition elements stay as written.
pub fn flatten_property(prop: &PropertyDecl, src: &MetamodelInfo) -> Result<Vec<FlattenedVariant>, AbstractionError> {
    let mut choices: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, e) in prop.precondition.elements.iter().enumerate() {
        let Some(ci) = src.class(&e.class) else { continue };
        if !ci.is_abstract {
            continue;
        }
        if ci.concrete_subtypes.is_empty() {
            return Err(AbstractionError::Vacuous { element: e.name.clone(), class: e.class.clone() });
        }
        choices.push((i, ci.concrete_subtypes.clone()));
    }
    let mut variants = vec![(prop.clone(), BTreeMap::new())];
    for (i, subs) in &choices {
        let mut next = Vec::new();
        for (p, sub) in &variants {
            for c in subs {
                let mut p = p.clone();
                let mut sub = sub.clone();
                p.precondition.elements[*i].class = c.clone();
                sub.insert(p.precondition.elements[*i].name.clone(), c.clone());
                next.push((p, sub));
            }
        }
        variants = next;
    }
    let many = !choices.is_empty();
    Ok(variants
        .into_iter()
        .map(|(mut p, sub)| {
            if many {
                let tag: Vec<String> = sub.iter().map(|(e, c)| format!("{e}={c}")).collect();
                p.name = format!("{}[{}]", prop.name, tag.join(","));
            }
            FlattenedVariant { original: prop.name.clone(), substitution: sub, property: p }
        })
        .collect())
}
