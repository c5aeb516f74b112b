//! Bounded-world encoding of "some precondition match lacks a postcondition
//! witness" as a QF_LIA problem.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::{EncodeError, EncodeOptions};
use crate::cutoff::PerClassBounds;
use crate::lang::{
    BindExpr, CmpOp, Domain, EnumDecl, Guard, MetamodelInfo, PatternGraph, PropertyDecl, RuleRef,
    TransformationView, Value,
};
use crate::model::End;

/// Index encoding of attribute values.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Codec {
    pub strings: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, i64>,
}

impl Codec {
    fn add(&mut self, s: &str) {
        if !self.index.contains_key(s) {
            self.index.insert(s.to_string(), self.strings.len() as i64);
            self.strings.push(s.to_string());
        }
    }

    pub fn code(&self, v: &Value, d: &Domain, enums: &[EnumDecl]) -> Option<i64> {
        match (v, d) {
            (Value::Bool(b), _) => Some(*b as i64),
            (Value::Int(i), _) => Some(*i),
            (Value::Str(s), Domain::Enum(e)) => enums
                .iter()
                .find(|x| &x.name == e)?
                .literals
                .iter()
                .position(|l| l == s)
                .map(|p| p as i64),
            (Value::Str(s), _) => self.index.get(s).copied(),
        }
    }

    pub fn decode(&self, n: i64, d: &Domain, enums: &[EnumDecl]) -> Value {
        match d {
            Domain::Bool => Value::Bool(n != 0),
            Domain::Int | Domain::IntRange(..) | Domain::IntSet(_) => Value::Int(n),
            Domain::Enum(e) => Value::Str(
                enums
                    .iter()
                    .find(|x| &x.name == e)
                    .and_then(|x| x.literals.get(n as usize).cloned())
                    .unwrap_or_default(),
            ),
            Domain::String | Domain::StringSet(_) => Value::Str(
                usize::try_from(n)
                    .ok()
                    .and_then(|i| self.strings.get(i).cloned())
                    .unwrap_or_else(|| format!("_v{n}")),
            ),
        }
    }

    /// SMT constraint keeping `var` inside the encoded domain.
    fn domain_constraint(&self, var: &str, d: &Domain, enums: &[EnumDecl]) -> Option<String> {
        match d {
            Domain::Bool => Some(format!("(and (<= 0 {var}) (<= {var} 1))")),
            Domain::Int => None,
            Domain::IntRange(lo, hi) => Some(format!("(and (<= {} {var}) (<= {var} {}))", int(*lo), int(*hi))),
            Domain::IntSet(v) => Some(or(v.iter().map(|x| format!("(= {var} {})", int(*x))).collect())),
            Domain::String => Some(format!("(<= 0 {var})")),
            Domain::StringSet(v) => Some(or(v
                .iter()
                .map(|s| format!("(= {var} {})", int(self.index[s.as_str()])))
                .collect())),
            Domain::Enum(e) => {
                let n = enums.iter().find(|x| &x.name == e).map_or(0, |x| x.literals.len());
                Some(format!("(and (<= 0 {var}) (< {var} {n}))"))
            }
        }
    }
}

pub(crate) fn int(i: i64) -> String {
    if i < 0 {
        format!("(- {})", -(i as i128))
    } else {
        i.to_string()
    }
}

pub(crate) fn and(mut xs: Vec<String>) -> String {
    xs.retain(|x| x != "true");
    if xs.iter().any(|x| x == "false") {
        return "false".into();
    }
    match xs.len() {
        0 => "true".into(),
        1 => xs.pop().unwrap(),
        _ => format!("(and {})", xs.join(" ")),
    }
}

pub(crate) fn or(mut xs: Vec<String>) -> String {
    xs.retain(|x| x != "false");
    if xs.iter().any(|x| x == "true") {
        return "true".into();
    }
    match xs.len() {
        0 => "false".into(),
        1 => xs.pop().unwrap(),
        _ => format!("(or {})", xs.join(" ")),
    }
}

pub(crate) fn count(xs: &[String]) -> String {
    match xs.len() {
        0 => "0".into(),
        1 => format!("(ite {} 1 0)", xs[0]),
        _ => format!(
            "(+ {})",
            xs.iter().map(|x| format!("(ite {x} 1 0)")).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn cmp(op: CmpOp, lhs: &str, rhs: i64) -> String {
    let r = int(rhs);
    match op {
        CmpOp::Eq => format!("(= {lhs} {r})"),
        CmpOp::Ne => format!("(not (= {lhs} {r}))"),
        CmpOp::Lt => format!("(< {lhs} {r})"),
        CmpOp::Le => format!("(<= {lhs} {r})"),
        CmpOp::Gt => format!("(> {lhs} {r})"),
        CmpOp::Ge => format!("(>= {lhs} {r})"),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Slot {
    pub class: String,
    pub index: usize,
    pub id: String,
    pub exists: String,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum VarRole {
    SourceExists { slot: String },
    SourceLink { assoc: String, src: String, tgt: String },
    SourceAttr { slot: String, attr: String },
    Fires { rule: String, binding: Vec<String> },
    Creator { rule: String, binding: Vec<String>, apply: String, slot: String },
    TargetExists { slot: String },
    TargetAttr { slot: String, attr: String },
    TargetLink { assoc: String, src: String, tgt: String },
    Trace { src: String, tgt: String },
    Violation { binding: Vec<String> },
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkVar {
    pub assoc: String,
    pub src: usize,
    pub tgt: usize,
    pub var: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttrVar {
    pub slot: usize,
    pub attr: String,
    pub var: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiringVar {
    pub rule: RuleRef,
    pub binding: Vec<usize>,
    pub var: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct CreatorVar {
    pub firing: usize,
    pub apply: String,
    pub slot: usize,
    pub var: String,
}

/// A lower-bound obligation held back for the lazy closure loop.
#[derive(Clone, Debug, Serialize)]
pub struct Withheld {
    pub slot: usize,
    pub assoc: String,
    pub end: End,
    pub lower: u32,
    pub links: Vec<String>,
    pub assertion: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreBinding {
    pub slots: Vec<usize>,
    pub var: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProblemMeta {
    pub property: String,
    pub fragment: Vec<String>,
    pub rules: Vec<String>,
    pub bounds: PerClassBounds,
    pub factored: bool,
    pub firing_vars: usize,
    pub enumerated: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EncodedProblem {
    pub decls: Vec<String>,
    pub asserts: Vec<String>,
    pub withheld: Vec<Withheld>,
    pub pre_bindings: Vec<PreBinding>,
    pub vars: BTreeMap<String, VarRole>,
    pub source_slots: Vec<Slot>,
    pub target_slots: Vec<Slot>,
    pub source_links: Vec<LinkVar>,
    pub source_attrs: Vec<AttrVar>,
    pub target_links: Vec<LinkVar>,
    pub target_attrs: Vec<AttrVar>,
    pub firings: Vec<FiringVar>,
    pub creators: Vec<CreatorVar>,
    pub codec: Codec,
    pub meta: ProblemMeta,
    pub pre_names: Vec<String>,
}

/// Which violation disjuncts a solve asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    Any,
    Binding(usize),
}

impl EncodedProblem {
    /// Full SMT-LIB script, with `extra` assertions appended before the goal.
    pub fn script(&self, extra: &[&str], goal: Goal) -> String {
        let mut s = String::with_capacity(64 * (self.decls.len() + self.asserts.len()));
        s.push_str("(set-option :produce-models true)\n(set-logic QF_LIA)\n");
        for d in &self.decls {
            s.push_str(d);
            s.push('\n');
        }
        for a in self.asserts.iter().map(String::as_str).chain(extra.iter().copied()) {
            s.push_str("(assert ");
            s.push_str(a);
            s.push_str(")\n");
        }
        let g = match goal {
            Goal::Any => or(self.pre_bindings.iter().map(|b| b.var.clone()).collect()),
            Goal::Binding(i) => self.pre_bindings[i].var.clone(),
        };
        s.push_str(&format!("(assert {g})\n(check-sat)\n(get-model)\n(exit)\n"));
        s
    }

    /// Script with every constraint asserted eagerly.
    pub fn smtlib(&self) -> String {
        let w: Vec<&str> = self.withheld.iter().map(|w| w.assertion.as_str()).collect();
        self.script(&w, Goal::Any)
    }
}

struct Enc<'a> {
    view: &'a TransformationView<'a>,
    opts: &'a EncodeOptions,
    codec: Codec,
    enums: Vec<EnumDecl>,
    p: EncodedProblem,
    counter: usize,
    src_link: HashMap<(String, usize, usize), String>,
    src_attr: HashMap<(usize, String), String>,
    tgt_link: HashMap<(String, usize, usize), String>,
    tgt_attr: HashMap<(usize, String), String>,
    trace_cache: HashMap<(usize, usize), String>,
    creators_at: Vec<Vec<usize>>,
    /// Per firing: apply element name to (creator ids per target slot).
    positions: Vec<HashMap<String, Vec<(usize, String)>>>,
    enumerated: usize,
}

fn collect_strings(codec: &mut Codec, view: &TransformationView, prop: &PropertyDecl) {
    codec.add("");
    let lits = |g: &PatternGraph| -> Vec<Value> {
        g.elements.iter().flat_map(|e| e.guards.iter().map(|gd| gd.value.to_value())).collect()
    };
    let mut vals = lits(&prop.precondition);
    vals.extend(lits(&prop.postcondition));
    for r in view.t.rule_refs() {
        let rule = view.t.rule(r);
        vals.extend(lits(&rule.matcher));
        for ae in &rule.apply.elements {
            for b in &ae.bindings {
                if let BindExpr::Literal(l) = &b.expr {
                    vals.push(l.to_value());
                }
            }
        }
    }
    for info in [&view.src, &view.tgt] {
        for c in info.classes.values() {
            for (_, d) in &c.attributes {
                if let Domain::StringSet(v) = d {
                    v.iter().for_each(|s| codec.add(s));
                }
            }
        }
    }
    for v in vals {
        if let Value::Str(s) = v {
            codec.add(&s);
        }
    }
}

impl<'a> Enc<'a> {
    fn fresh(&mut self, prefix: &str, sort: &str, role: VarRole) -> String {
        self.counter += 1;
        let name = format!("{prefix}_{}", self.counter);
        self.p.decls.push(format!("(declare-const {name} {sort})"));
        self.p.vars.insert(name.clone(), role);
        name
    }

    fn assert(&mut self, a: String) {
        if a != "true" {
            self.p.asserts.push(a);
        }
    }

    fn bump(&mut self, n: usize) -> Result<(), EncodeError> {
        self.enumerated += n;
        if self.enumerated > self.opts.ceiling {
            return Err(EncodeError::Ceiling {
                count: self.enumerated,
                ceiling: self.opts.ceiling,
            });
        }
        Ok(())
    }

    fn code_of(&self, info: &MetamodelInfo, class: &str, g: &Guard) -> Option<i64> {
        let d = info.attribute(class, &g.attr)?;
        self.codec.code(&g.value.to_value(), d, &self.enums)
    }

    fn default_code(&self, info: &MetamodelInfo, d: &Domain) -> i64 {
        self.codec.code(&info.default_value(d), d, &self.enums).unwrap_or(0)
    }

    /// Injective, type-compatible slot assignments for a pattern.
    fn assignments(&mut self, g: &PatternGraph, slots: &[Slot], info: &MetamodelInfo) -> Result<Vec<Vec<usize>>, EncodeError> {
        let cands: Vec<Vec<usize>> = g
            .elements
            .iter()
            .map(|e| {
                (0..slots.len())
                    .filter(|i| info.is_subtype(&slots[*i].class, &e.class))
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(c: &[Vec<usize>], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) -> bool {
            if cur.len() == c.len() {
                out.push(cur.clone());
                return out.len() <= limit;
            }
            for &s in &c[cur.len()] {
                if cur.contains(&s) {
                    continue;
                }
                cur.push(s);
                let ok = rec(c, cur, out, limit);
                cur.pop();
                if !ok {
                    return false;
                }
            }
            true
        }
        let limit = self.opts.ceiling.saturating_sub(self.enumerated);
        if !rec(&cands, &mut cur, &mut out, limit) {
            return Err(EncodeError::Ceiling {
                count: self.enumerated + out.len(),
                ceiling: self.opts.ceiling,
            });
        }
        self.bump(out.len())?;
        Ok(out)
    }

    /// Structural and guard conditions of a source pattern under an assignment;
    /// `None` when some required link cannot exist.
    fn source_pattern(&self, g: &PatternGraph, asg: &[usize]) -> Option<Vec<String>> {
        let mut parts = Vec::new();
        for (k, e) in g.elements.iter().enumerate() {
            let s = asg[k];
            parts.push(self.p.source_slots[s].exists.clone());
            for gd in &e.guards {
                let var = self.src_attr.get(&(s, gd.attr.clone()))?;
                let code = self.code_of(&self.view.src, &self.p.source_slots[s].class, gd)?;
                parts.push(cmp(gd.op, var, code));
            }
        }
        for l in &g.links {
            let (f, t) = (g.index_of(&l.from)?, g.index_of(&l.to)?);
            parts.push(self.src_link.get(&(l.assoc.clone(), asg[f], asg[t]))?.clone());
        }
        Some(parts)
    }

    fn trace(&mut self, s: usize, t: usize, table: &HashMap<(usize, usize), Vec<String>>) -> String {
        if let Some(v) = self.trace_cache.get(&(s, t)) {
            return v.clone();
        }
        let v = match table.get(&(s, t)) {
            None => "false".to_string(),
            Some(crs) => {
                let role = VarRole::Trace {
                    src: self.p.source_slots[s].id.clone(),
                    tgt: self.p.target_slots[t].id.clone(),
                };
                let var = self.fresh("tr", "Bool", role);
                let def = or(crs.clone());
                self.assert(format!("(= {var} {def})"));
                var
            }
        };
        self.trace_cache.insert((s, t), v.clone());
        v
    }
}

/// Encode the bounded violation problem for `prop` over the given rules.
pub fn encode(
    view: &TransformationView,
    prop: &PropertyDecl,
    rules: &[RuleRef],
    fragment: &[usize],
    bounds: &PerClassBounds,
    opts: &EncodeOptions,
) -> Result<EncodedProblem, EncodeError> {
    let mut codec = Codec::default();
    collect_strings(&mut codec, view, prop);
    let enums = view.src.enums.iter().chain(view.tgt.enums.iter()).cloned().collect::<Vec<_>>();
    let mut rules: Vec<RuleRef> = rules.to_vec();
    rules.sort();
    let meta = ProblemMeta {
        property: prop.name.clone(),
        fragment: fragment.iter().map(|l| view.t.layers[*l].name.clone()).collect(),
        rules: rules.iter().map(|r| view.t.rule(*r).name.clone()).collect(),
        bounds: bounds.clone(),
        factored: opts.factored,
        firing_vars: 0,
        enumerated: 0,
    };
    let mut e = Enc {
        view,
        opts,
        codec: codec.clone(),
        enums,
        p: EncodedProblem {
            decls: vec![],
            asserts: vec![],
            withheld: vec![],
            pre_bindings: vec![],
            vars: BTreeMap::new(),
            source_slots: vec![],
            target_slots: vec![],
            source_links: vec![],
            source_attrs: vec![],
            target_links: vec![],
            target_attrs: vec![],
            firings: vec![],
            creators: vec![],
            codec,
            meta,
            pre_names: prop.precondition.elements.iter().map(|e| e.name.clone()).collect(),
        },
        counter: 0,
        src_link: HashMap::new(),
        src_attr: HashMap::new(),
        tgt_link: HashMap::new(),
        tgt_attr: HashMap::new(),
        trace_cache: HashMap::new(),
        creators_at: vec![],
        positions: vec![],
        enumerated: 0,
    };

    // Source world.
    for c in view.src.concrete_classes() {
        for i in 0..bounds.source_of(c) as usize {
            let id = format!("{c}_{}", i + 1);
            let v = e.fresh("se", "Bool", VarRole::SourceExists { slot: id.clone() });
            e.p.source_slots.push(Slot {
                class: c.clone(),
                index: i,
                id,
                exists: v,
            });
        }
    }
    let src_slots = e.p.source_slots.clone();
    if opts.symmetry_break {
        for w in src_slots.windows(2) {
            if w[0].class == w[1].class {
                e.assert(format!("(=> {} {})", w[1].exists, w[0].exists));
            }
        }
    }
    let mut used_assocs: BTreeSet<String> = BTreeSet::new();
    for r in &rules {
        used_assocs.extend(view.t.rule(*r).matcher.links.iter().map(|l| l.assoc.clone()));
    }
    used_assocs.extend(prop.precondition.links.iter().map(|l| l.assoc.clone()));
    for name in &view.src.assoc_order {
        let a = view.src.associations[name].clone();
        if !used_assocs.contains(name) && a.source_mult.is_any() && a.target_mult.is_any() {
            continue;
        }
        for (i, si) in src_slots.iter().enumerate() {
            if !view.src.is_subtype(&si.class, &a.source) {
                continue;
            }
            for (j, sj) in src_slots.iter().enumerate() {
                if !view.src.is_subtype(&sj.class, &a.target) {
                    continue;
                }
                let role = VarRole::SourceLink {
                    assoc: name.clone(),
                    src: si.id.clone(),
                    tgt: sj.id.clone(),
                };
                let v = e.fresh("sl", "Bool", role);
                e.assert(format!("(=> {v} (and {} {}))", si.exists, sj.exists));
                e.src_link.insert((name.clone(), i, j), v.clone());
                e.p.source_links.push(LinkVar {
                    assoc: name.clone(),
                    src: i,
                    tgt: j,
                    var: v,
                });
            }
        }
        for (end, mult, end_class) in [(End::Source, a.target_mult, &a.source), (End::Target, a.source_mult, &a.target)] {
            if mult.is_any() {
                continue;
            }
            for (i, si) in src_slots.iter().enumerate() {
                if !view.src.is_subtype(&si.class, end_class) {
                    continue;
                }
                let links: Vec<String> = e
                    .p
                    .source_links
                    .iter()
                    .filter(|l| &l.assoc == name && if end == End::Source { l.src == i } else { l.tgt == i })
                    .map(|l| l.var.clone())
                    .collect();
                let cnt = count(&links);
                if mult.lower > 0 {
                    let assertion = format!("(=> {} (>= {cnt} {}))", si.exists, mult.lower);
                    if opts.lazy_closure {
                        e.p.withheld.push(Withheld {
                            slot: i,
                            assoc: name.clone(),
                            end,
                            lower: mult.lower,
                            links: links.clone(),
                            assertion,
                        });
                    } else {
                        e.assert(assertion);
                    }
                }
                if let Some(u) = mult.upper {
                    if (links.len() as u64) > u as u64 {
                        e.assert(format!("(<= {cnt} {u})"));
                    }
                }
            }
        }
    }

    // Attribute slicing.
    let post_attrs: BTreeSet<String> = prop
        .postcondition
        .elements
        .iter()
        .flat_map(|x| x.guards.iter().map(|g| g.attr.clone()))
        .collect();
    let mut src_attrs: BTreeSet<String> = prop
        .precondition
        .elements
        .iter()
        .flat_map(|x| x.guards.iter().map(|g| g.attr.clone()))
        .collect();
    for r in &rules {
        let rule = view.t.rule(*r);
        src_attrs.extend(rule.matcher.elements.iter().flat_map(|x| x.guards.iter().map(|g| g.attr.clone())));
        for ae in rule.fresh_elements() {
            for b in &ae.bindings {
                if let BindExpr::Copy { attr, .. } = &b.expr {
                    if post_attrs.contains(&b.attr) {
                        src_attrs.insert(attr.clone());
                    }
                }
            }
        }
    }
    for (i, s) in src_slots.iter().enumerate() {
        let ci = view.src.class(&s.class).expect("slot class");
        for (a, d) in &ci.attributes {
            if !src_attrs.contains(a) {
                continue;
            }
            let v = e.fresh(
                "sa",
                "Int",
                VarRole::SourceAttr {
                    slot: s.id.clone(),
                    attr: a.clone(),
                },
            );
            if let Some(c) = e.codec.domain_constraint(&v, d, &e.enums) {
                e.assert(c);
            }
            let dc = e.default_code(&view.src, d);
            e.assert(format!("(=> (not {}) (= {v} {}))", s.exists, int(dc)));
            e.src_attr.insert((i, a.clone()), v.clone());
            e.p.source_attrs.push(AttrVar {
                slot: i,
                attr: a.clone(),
                var: v,
            });
        }
    }

    // Target slots.
    for c in view.tgt.concrete_classes() {
        for i in 0..bounds.target_of(c) as usize {
            let id = format!("{c}_{}", i + 1);
            let v = e.fresh("te", "Bool", VarRole::TargetExists { slot: id.clone() });
            e.p.target_slots.push(Slot {
                class: c.clone(),
                index: i,
                id,
                exists: v,
            });
        }
    }
    let tgt_slots = e.p.target_slots.clone();
    e.creators_at = vec![vec![]; tgt_slots.len()];

    // Rule firings, in layer order so backward candidates already exist.
    let mut all_asgs = Vec::with_capacity(rules.len());
    let mut demand: BTreeMap<&str, usize> = BTreeMap::new();
    for rr in &rules {
        let rule = view.t.rule(*rr);
        let asgs = e.assignments(&rule.matcher, &src_slots, &view.src)?;
        for ae in rule.fresh_elements() {
            *demand.entry(ae.class.as_str()).or_default() += asgs.len();
        }
        all_asgs.push(asgs);
    }
    // Classes with a slot per potential creation get fixed slots.
    let mut cursor: BTreeMap<&str, usize> = BTreeMap::new();
    for (c, n) in &demand {
        let slots = tgt_slots.iter().filter(|s| s.class == *c).count();
        if *n <= slots {
            cursor.insert(c, 0);
        }
    }
    for (rr, asgs) in rules.iter().zip(all_asgs) {
        let rule = view.t.rule(*rr);
        for asg in asgs {
            let Some(mut parts) = e.source_pattern(&rule.matcher, &asg) else {
                continue;
            };
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for b in &rule.backward {
                let k = rule.matcher.index_of(&b.matched).expect("resolved");
                groups.entry(b.apply.as_str()).or_default().push(asg[k]);
            }
            let mut pos: HashMap<String, Vec<(usize, String)>> = HashMap::new();
            for (ae_name, srcs) in &groups {
                let ae = rule.apply_element(ae_name).expect("resolved");
                let mut cand_fires = Vec::new();
                let mut cand_pos: Vec<(usize, String)> = Vec::new();
                for (fi, f) in e.p.firings.iter().enumerate() {
                    if f.rule.layer >= rr.layer || !srcs.iter().all(|s| f.binding.contains(s)) {
                        continue;
                    }
                    let frule = view.t.rule(f.rule);
                    for fe in frule.fresh_elements() {
                        if view.tgt.is_subtype(&fe.class, &ae.class) {
                            cand_fires.push(f.var.clone());
                            if let Some(ps) = e.positions[fi].get(&fe.name) {
                                cand_pos.extend(ps.iter().cloned());
                            }
                        }
                    }
                }
                parts.push(format!("(= {} 1)", count(&cand_fires)));
                pos.insert(ae_name.to_string(), cand_pos);
            }
            let binding_ids: Vec<String> = asg.iter().map(|s| src_slots[*s].id.clone()).collect();
            let fv = e.fresh(
                "f",
                "Bool",
                VarRole::Fires {
                    rule: rule.name.clone(),
                    binding: binding_ids.clone(),
                },
            );
            let def = and(parts);
            e.assert(format!("(= {fv} {def})"));
            let fidx = e.p.firings.len();
            e.p.firings.push(FiringVar {
                rule: *rr,
                binding: asg.clone(),
                var: fv.clone(),
            });
            for ae in rule.fresh_elements() {
                let mut crs = Vec::new();
                let fixed = cursor.get_mut(ae.class.as_str()).map(|c| {
                    *c += 1;
                    *c - 1
                });
                for (t, ts) in tgt_slots.iter().enumerate() {
                    if ts.class != ae.class || fixed.is_some_and(|k| ts.index != k) {
                        continue;
                    }
                    let cv = e.fresh(
                        "cr",
                        "Bool",
                        VarRole::Creator {
                            rule: rule.name.clone(),
                            binding: binding_ids.clone(),
                            apply: ae.name.clone(),
                            slot: ts.id.clone(),
                        },
                    );
                    let cid = e.p.creators.len();
                    e.p.creators.push(CreatorVar {
                        firing: fidx,
                        apply: ae.name.clone(),
                        slot: t,
                        var: cv.clone(),
                    });
                    e.creators_at[t].push(cid);
                    crs.push((t, cv));
                }
                let names: Vec<String> = crs.iter().map(|(_, v)| v.clone()).collect();
                e.assert(format!("(= {} (ite {fv} 1 0))", count(&names)));
                pos.insert(ae.name.clone(), crs);
            }
            e.positions.push(pos);
        }
    }
    e.p.meta.firing_vars = e.p.firings.len();

    // Target existence and attributes.
    let mut trace_table: HashMap<(usize, usize), Vec<String>> = HashMap::new();
    for c in &e.p.creators {
        for s in &e.p.firings[c.firing].binding {
            trace_table.entry((*s, c.slot)).or_default().push(c.var.clone());
        }
    }
    for (t, ts) in tgt_slots.iter().enumerate() {
        let crs: Vec<String> = e.creators_at[t].iter().map(|c| e.p.creators[*c].var.clone()).collect();
        if crs.is_empty() {
            e.assert(format!("(not {})", ts.exists));
        } else {
            let cnt = count(&crs);
            e.assert(format!("(<= {cnt} 1)"));
            e.assert(format!("(= {} (= {cnt} 1))", ts.exists));
        }
        let ci = view.tgt.class(&ts.class).expect("slot class");
        for (a, d) in &ci.attributes {
            if !post_attrs.contains(a) {
                continue;
            }
            let v = e.fresh(
                "ta",
                "Int",
                VarRole::TargetAttr {
                    slot: ts.id.clone(),
                    attr: a.clone(),
                },
            );
            let dc = e.default_code(&view.tgt, d);
            e.assert(format!("(=> (not {}) (= {v} {}))", ts.exists, int(dc)));
            for cid in e.creators_at[t].clone() {
                let c = e.p.creators[cid].clone();
                let f = &e.p.firings[c.firing];
                let rule = view.t.rule(f.rule);
                let ae = rule.apply_element(&c.apply).expect("creator element");
                let val = match ae.bindings.iter().find(|b| &b.attr == a).map(|b| &b.expr) {
                    None => int(dc),
                    Some(BindExpr::Literal(l)) => int(e.codec.code(&l.to_value(), d, &e.enums).unwrap_or(dc)),
                    Some(BindExpr::Copy { element, attr }) => {
                        let k = rule.matcher.index_of(element).expect("resolved");
                        match e.src_attr.get(&(f.binding[k], attr.clone())) {
                            Some(sv) => sv.clone(),
                            None => int(dc),
                        }
                    }
                };
                e.assert(format!("(=> {} (= {v} {val}))", c.var));
            }
            e.tgt_attr.insert((t, a.clone()), v.clone());
            e.p.target_attrs.push(AttrVar {
                slot: t,
                attr: a.clone(),
                var: v,
            });
        }
    }

    // Target links for postcondition associations.
    let post_assocs: BTreeSet<String> = prop.postcondition.links.iter().map(|l| l.assoc.clone()).collect();
    let mut contribs: BTreeMap<(String, usize, usize), Vec<String>> = BTreeMap::new();
    for (fi, f) in e.p.firings.iter().enumerate() {
        let rule = view.t.rule(f.rule);
        for al in &rule.apply.links {
            if !post_assocs.contains(&al.assoc) {
                continue;
            }
            let (Some(from), Some(to)) = (e.positions[fi].get(&al.from), e.positions[fi].get(&al.to)) else {
                continue;
            };
            let group = |ps: &Vec<(usize, String)>| {
                let mut m: BTreeMap<usize, Vec<String>> = BTreeMap::new();
                for (t, v) in ps {
                    m.entry(*t).or_default().push(v.clone());
                }
                m
            };
            for (t1, v1) in group(from) {
                for (t2, v2) in group(to) {
                    contribs
                        .entry((al.assoc.clone(), t1, t2))
                        .or_default()
                        .push(and(vec![f.var.clone(), or(v1.clone()), or(v2)]));
                }
            }
        }
    }
    for ((assoc, t1, t2), cs) in contribs {
        let role = VarRole::TargetLink {
            assoc: assoc.clone(),
            src: tgt_slots[t1].id.clone(),
            tgt: tgt_slots[t2].id.clone(),
        };
        let v = e.fresh("tl", "Bool", role);
        let def = or(cs);
        e.assert(format!("(= {v} {def})"));
        e.tgt_link.insert((assoc.clone(), t1, t2), v.clone());
        e.p.target_links.push(LinkVar {
            assoc,
            src: t1,
            tgt: t2,
            var: v,
        });
    }

    // Property.
    let comps = components(view, &prop.postcondition, opts.factored);
    let pre_asgs = e.assignments(&prop.precondition, &src_slots, &view.src)?;
    let mut post_asgs: Vec<Vec<Vec<usize>>> = Vec::new();
    for comp in &comps {
        let g = sub_pattern(&prop.postcondition, comp);
        post_asgs.push(e.assignments(&g, &tgt_slots, &view.tgt)?);
    }
    e.bump(pre_asgs.len() * post_asgs.iter().map(Vec::len).sum::<usize>())?;
    for asg in pre_asgs {
        let Some(pre_parts) = e.source_pattern(&prop.precondition, &asg) else {
            continue;
        };
        let mut negs = Vec::new();
        for (ci, comp) in comps.iter().enumerate() {
            let g = sub_pattern(&prop.postcondition, comp);
            let mut witnesses = Vec::new();
            'gamma: for gam in &post_asgs[ci] {
                let mut parts = Vec::new();
                for (k, pe) in g.elements.iter().enumerate() {
                    let t = gam[k];
                    parts.push(tgt_slots[t].exists.clone());
                    for gd in &pe.guards {
                        let Some(var) = e.tgt_attr.get(&(t, gd.attr.clone())).cloned() else {
                            continue 'gamma;
                        };
                        let Some(code) = e.code_of(&view.tgt, &tgt_slots[t].class, gd) else {
                            continue 'gamma;
                        };
                        parts.push(cmp(gd.op, &var, code));
                    }
                    for tc in prop.traces.iter().filter(|tc| tc.post == pe.name) {
                        let Some(pi) = prop.precondition.index_of(&tc.pre) else {
                            continue 'gamma;
                        };
                        let tv = e.trace(asg[pi], t, &trace_table);
                        if tv == "false" {
                            continue 'gamma;
                        }
                        parts.push(tv);
                    }
                }
                for l in &g.links {
                    let (Some(f), Some(t)) = (g.index_of(&l.from), g.index_of(&l.to)) else {
                        continue 'gamma;
                    };
                    match e.tgt_link.get(&(l.assoc.clone(), gam[f], gam[t])) {
                        Some(v) => parts.push(v.clone()),
                        None => continue 'gamma,
                    }
                }
                witnesses.push(and(parts));
            }
            negs.push(format!("(not {})", or(witnesses)));
        }
        let ids: Vec<String> = asg.iter().map(|s| src_slots[*s].id.clone()).collect();
        let pv = e.fresh("pv", "Bool", VarRole::Violation { binding: ids });
        let body = and(vec![and(pre_parts), or(negs)]);
        e.assert(format!("(= {pv} {body})"));
        e.p.pre_bindings.push(PreBinding { slots: asg, var: pv });
    }
    e.p.meta.enumerated = e.enumerated;
    Ok(e.p)
}

/// Partition postcondition elements into independent groups. Links connect
/// elements; type-overlapping elements share a group so injectivity holds.
pub fn components(view: &TransformationView, g: &PatternGraph, factored: bool) -> Vec<Vec<usize>> {
    let n = g.elements.len();
    if !factored || n == 0 {
        return vec![(0..n).collect()];
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let union = |p: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(p, a), find(p, b));
        if ra != rb {
            p[ra.max(rb)] = ra.min(rb);
        }
    };
    for l in &g.links {
        if let (Some(a), Some(b)) = (g.index_of(&l.from), g.index_of(&l.to)) {
            union(&mut parent, a, b);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if view.tgt.overlaps(&g.elements[i].class, &g.elements[j].class) {
                union(&mut parent, i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn sub_pattern(g: &PatternGraph, comp: &[usize]) -> PatternGraph {
    let elements: Vec<_> = comp.iter().map(|i| g.elements[*i].clone()).collect();
    let names: BTreeSet<&str> = elements.iter().map(|e| e.name.as_str()).collect();
    PatternGraph {
        links: g
            .links
            .iter()
            .filter(|l| names.contains(l.from.as_str()) && names.contains(l.to.as_str()))
            .cloned()
            .collect(),
        elements,
    }
}
