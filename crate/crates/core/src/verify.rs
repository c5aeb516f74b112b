//! Per-property verification pipeline with counterexample-guided fragment
//! refinement.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::abstraction::{
    claim_kind, flatten_property, synthesize_abstraction, validate_abstraction, AbstractionError, ClaimKind,
};
use crate::cutoff::{
    bounds_from_seeds, close_layers, compute_cutoff, cutoff_params, per_class_bounds, relevant_rules,
    restrict_relevance, select_fragment, CutoffBounds, FragmentKind, PerClassBounds, RelevanceMode,
    RelevanceResult,
};
use crate::exec::{check_property_concrete, execute, ConcreteVerdict, ModelIndex};
use crate::fragment::{check_flnr, check_gbpp, Restriction};
use crate::lang::{PropertyDecl, Specification, TransformationView};
use crate::model::{closure_with_info, ClosureInfo};
use crate::smt::{
    decode_counterexample, encode, solve, Counterexample, EncodeError, EncodeOptions, SolverConfig, SolverStatus,
};

#[derive(Clone, Debug)]
pub struct VerificationConfig {
    pub timeout: Duration,
    pub mode: RelevanceMode,
    pub per_class: bool,
    pub fragment: FragmentKind,
    pub cegar: bool,
    pub encode: EncodeOptions,
    /// Largest cutoff accepted before giving up on a fragment.
    pub cutoff_budget: u64,
    pub solver: SolverConfig,
    pub dump_smt: Option<PathBuf>,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            timeout: Duration::from_secs(600),
            mode: RelevanceMode::default(),
            per_class: true,
            fragment: FragmentKind::Minimal,
            cegar: true,
            encode: EncodeOptions::default(),
            cutoff_budget: 1_000_000,
            solver: SolverConfig::default(),
            dump_smt: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("timeout must be positive")]
    Timeout,
    #[error("cutoff budget must be at least 1")]
    Budget,
    #[error("parallelism must be at least 1")]
    Parallelism,
}

impl VerificationConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.timeout.is_zero() {
            return Err(ConfigError::Timeout);
        }
        if self.cutoff_budget == 0 {
            return Err(ConfigError::Budget);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Holds,
    Violated,
    Unknown,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "HOLDS",
            Status::Violated => "VIOLATED",
            Status::Unknown => "UNKNOWN",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum UnknownReason {
    Timeout,
    Budget { k: u64, budget: u64 },
    Ceiling(String),
    SolverError(String),
    Fragment(Vec<String>),
    Model(String),
    Abstraction(String),
    ConfirmationFailed(String),
}

impl UnknownReason {
    pub fn kind(&self) -> &'static str {
        match self {
            UnknownReason::Timeout => "timeout",
            UnknownReason::Budget { .. } => "budget",
            UnknownReason::Ceiling(_) => "ceiling",
            UnknownReason::SolverError(_) => "solver-error",
            UnknownReason::Fragment(_) => "fragment",
            UnknownReason::Model(_) => "model",
            UnknownReason::Abstraction(_) => "abstraction",
            UnknownReason::ConfirmationFailed(_) => "confirmation-failed",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Provenance {
    pub fragment: Vec<String>,
    pub relevant_rules: Vec<String>,
    pub bounds: PerClassBounds,
    pub k: u64,
    pub per_class_max: u64,
    pub dominant: String,
    pub cegar_rounds: usize,
    pub solver_calls: usize,
    pub variants: usize,
    pub abstracted: bool,
    pub claim: Option<ClaimKind>,
    pub caveat: Option<String>,
    pub time_sec: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyVerdict {
    pub property: String,
    pub status: Status,
    pub counterexample: Option<Counterexample>,
    pub reason: Option<UnknownReason>,
    /// Concrete re-check of an unconfirmed counterexample.
    pub concrete: Option<ConcreteVerdict>,
    pub provenance: Provenance,
}

impl PropertyVerdict {
    fn unknown(property: &str, reason: UnknownReason) -> Self {
        PropertyVerdict {
            property: property.to_string(),
            status: Status::Unknown,
            counterexample: None,
            reason: Some(reason),
            concrete: None,
            provenance: Provenance::default(),
        }
    }

    pub fn event(&self) -> serde_json::Value {
        serde_json::json!({
            "event": "verdict",
            "property": self.property,
            "status": self.status,
            "k": self.provenance.k,
            "perClassMax": self.provenance.per_class_max,
            "dominant": self.provenance.dominant,
            "fragment": self.provenance.fragment,
            "timeSec": self.provenance.time_sec,
            "cegarRounds": self.provenance.cegar_rounds,
            "reason": self.reason.as_ref().map(UnknownReason::kind),
            "counterexample": self.counterexample.as_ref().map(|c| &c.binding),
        })
    }
}

/// Outcome of one refinement step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CegarStep {
    /// No omitted relevant rule matches the counterexample source.
    Confirmed,
    Refine(Vec<usize>),
    /// The enlarged fragment exceeded the budget; try the baseline once.
    Baseline(Vec<usize>),
}

/// Add the layers of omitted relevant rules that match the counterexample.
pub fn cegar_refine(
    view: &TransformationView,
    prop: &PropertyDecl,
    rel: &RelevanceResult,
    fragment: &[usize],
    cex: &Counterexample,
    closure: &ClosureInfo,
    cfg: &VerificationConfig,
) -> CegarStep {
    let current: BTreeSet<usize> = fragment.iter().copied().collect();
    let idx = ModelIndex::new(&cex.source, &view.src);
    let mut add = BTreeSet::new();
    for rr in rel.rules.iter().filter(|r| !current.contains(&r.layer)) {
        let mut found = false;
        idx.for_each_match(&view.t.rule(*rr).matcher, |_| {
            found = true;
            false
        });
        if found {
            add.insert(rr.layer);
        }
    }
    if add.is_empty() {
        return CegarStep::Confirmed;
    }
    let next = close_layers(rel, current.union(&add).copied().collect());
    let sub = restrict_relevance(view, prop, rel, &next);
    let k = compute_cutoff(&cutoff_params(view, prop, &sub, closure)).k;
    if k > cfg.cutoff_budget {
        CegarStep::Baseline(select_fragment(view, rel, FragmentKind::Baseline))
    } else {
        CegarStep::Refine(next.into_iter().collect())
    }
}

struct Attempt {
    status: Status,
    cex: Option<Counterexample>,
    reason: Option<UnknownReason>,
    concrete: Option<ConcreteVerdict>,
    prov: Provenance,
}

fn bounds_for(
    view: &TransformationView,
    prop: &PropertyDecl,
    rel: &RelevanceResult,
    closure: &ClosureInfo,
    k: u64,
    per_class: bool,
) -> Result<PerClassBounds, String> {
    if per_class {
        return per_class_bounds(view, prop, &rel.rules, closure, k).map_err(|e| e.to_string());
    }
    let tgt = closure_with_info(&view.tgt).map_err(|e| e.to_string())?;
    let seeds: BTreeMap<String, u64> = view.src.concrete_classes().map(|c| (c.clone(), k)).collect();
    Ok(bounds_from_seeds(view, prop, &rel.rules, closure, &tgt, &seeds, k))
}

fn dump(cfg: &VerificationConfig, name: &str, round: usize, text: &str) {
    if let Some(dir) = &cfg.dump_smt {
        let safe: String = name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect();
        if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(format!("{safe}-{round}.smt2")), text)) {
            log::warn!("cannot write SMT dump for {name}: {e}");
        }
    }
}

fn verify_variant(
    view: &TransformationView,
    prop: &PropertyDecl,
    closure: &ClosureInfo,
    cfg: &VerificationConfig,
    deadline: Instant,
) -> Attempt {
    let full = relevant_rules(view, prop, cfg.mode);
    let baseline = select_fragment(view, &full, FragmentKind::Baseline);
    let mut layers = select_fragment(view, &full, cfg.fragment);
    let mut final_try = cfg.fragment != FragmentKind::Minimal || !cfg.cegar;
    let mut prov = Provenance::default();
    let fail = |prov: Provenance, r: UnknownReason| Attempt {
        status: Status::Unknown,
        cex: None,
        reason: Some(r),
        concrete: None,
        prov,
    };
    loop {
        let set: BTreeSet<usize> = layers.iter().copied().collect();
        let rel = restrict_relevance(view, prop, &full, &set);
        let params = cutoff_params(view, prop, &rel, closure);
        let cb: CutoffBounds = compute_cutoff(&params);
        prov.fragment = layers.iter().map(|l| view.t.layers[*l].name.clone()).collect();
        prov.relevant_rules = rel.rule_names(view);
        prov.k = cb.k;
        prov.dominant = cb.dominant_label();
        if cb.k > cfg.cutoff_budget {
            if !final_try && layers != baseline {
                layers = baseline.clone();
                final_try = true;
                continue;
            }
            return fail(prov, UnknownReason::Budget { k: cb.k, budget: cfg.cutoff_budget });
        }
        let bounds = match bounds_for(view, prop, &rel, closure, cb.k, cfg.per_class) {
            Ok(b) => b,
            Err(e) => return fail(prov, UnknownReason::Model(e)),
        };
        prov.per_class_max = bounds.max();
        prov.bounds = bounds.clone();
        let rules: Vec<_> = rel.rules.iter().copied().collect();
        let pb = match encode(view, prop, &rules, &layers, &bounds, &cfg.encode) {
            Ok(p) => p,
            Err(e @ EncodeError::Ceiling { .. }) => return fail(prov, UnknownReason::Ceiling(e.to_string())),
        };
        dump(cfg, &prop.name, prov.cegar_rounds, &pb.smtlib());
        let left = deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return fail(prov, UnknownReason::Timeout);
        }
        let out = solve(&pb, &cfg.encode, &cfg.solver, left);
        prov.solver_calls += out.rounds;
        match out.verdict.status {
            SolverStatus::Unsat => {
                return Attempt { status: Status::Holds, cex: None, reason: None, concrete: None, prov };
            }
            SolverStatus::Timeout => return fail(prov, UnknownReason::Timeout),
            SolverStatus::Unknown => return fail(prov, UnknownReason::SolverError("solver answered unknown".into())),
            SolverStatus::SolverError => {
                return fail(prov, UnknownReason::SolverError(out.verdict.raw.unwrap_or_default()));
            }
            SolverStatus::Sat => {}
        }
        let model = out.verdict.model.unwrap_or_default();
        let cex = decode_counterexample(view, &pb, &model);
        if !final_try {
            match cegar_refine(view, prop, &full, &layers, &cex, closure, cfg) {
                CegarStep::Confirmed => {}
                CegarStep::Refine(next) => {
                    prov.cegar_rounds += 1;
                    layers = next;
                    continue;
                }
                CegarStep::Baseline(next) => {
                    prov.cegar_rounds += 1;
                    layers = next;
                    final_try = true;
                    continue;
                }
            }
        }
        return confirm(view, prop, cex, prov);
    }
}

fn confirm(view: &TransformationView, prop: &PropertyDecl, cex: Counterexample, prov: Provenance) -> Attempt {
    match execute(view, &cex.source) {
        Ok(r) => {
            let cv = check_property_concrete(view, prop, &cex.source, &r);
            if cv.holds {
                Attempt {
                    status: Status::Unknown,
                    reason: Some(UnknownReason::ConfirmationFailed(
                        "counterexample does not violate the property concretely".into(),
                    )),
                    cex: Some(cex),
                    concrete: Some(cv),
                    prov,
                }
            } else {
                Attempt { status: Status::Violated, cex: Some(cex), reason: None, concrete: Some(cv), prov }
            }
        }
        Err(e) => Attempt {
            status: Status::Unknown,
            reason: Some(UnknownReason::ConfirmationFailed(e.to_string())),
            cex: Some(cex),
            concrete: None,
            prov,
        },
    }
}

/// Run the full pipeline for one property.
pub fn verify_property(spec: &Specification, prop: &PropertyDecl, cfg: &VerificationConfig) -> PropertyVerdict {
    let start = Instant::now();
    let mut v = verify_inner(spec, prop, cfg, start);
    v.provenance.time_sec = start.elapsed().as_secs_f64();
    v
}

fn verify_inner(spec: &Specification, prop: &PropertyDecl, cfg: &VerificationConfig, start: Instant) -> PropertyVerdict {
    let name = prop.name.as_str();
    let deadline = start + cfg.timeout;
    let view = match TransformationView::for_property(spec, prop) {
        Ok(v) => v,
        Err(e) => return PropertyVerdict::unknown(name, UnknownReason::Model(e.to_string())),
    };
    let flnr = check_flnr(&view);
    let gbpp = check_gbpp(prop);
    let blocking: Vec<String> = flnr
        .violations
        .iter()
        .chain(&gbpp.violations)
        .filter(|v| v.restriction != Restriction::R5)
        .map(|v| format!("{}: {} ({})", v.restriction, v.message, v.location))
        .collect();
    if !blocking.is_empty() {
        return PropertyVerdict::unknown(name, UnknownReason::Fragment(blocking));
    }
    let needs_abstraction = flnr.violations.iter().any(|v| v.restriction == Restriction::R5);
    let proof = if needs_abstraction {
        let (proof, map) = match synthesize_abstraction(spec) {
            Ok(x) => x,
            Err(e) => return PropertyVerdict::unknown(name, UnknownReason::Abstraction(e.to_string())),
        };
        match validate_abstraction(spec, &map) {
            Ok(r) if r.valid => {}
            Ok(r) => {
                let bad: Vec<String> = r.checks.iter().filter(|c| !c.valid).map(|c| c.predicate.clone()).collect();
                return PropertyVerdict::unknown(name, UnknownReason::Abstraction(bad.join("; ")));
            }
            Err(e) => return PropertyVerdict::unknown(name, UnknownReason::Abstraction(e.to_string())),
        }
        Some(proof)
    } else {
        None
    };
    let work = proof.as_ref().unwrap_or(spec);
    let wprop = work.property(name).expect("same property set");
    let wview = match TransformationView::for_property(work, wprop) {
        Ok(v) => v,
        Err(e) => return PropertyVerdict::unknown(name, UnknownReason::Model(e.to_string())),
    };
    let closure = match closure_with_info(&wview.src) {
        Ok(c) => c,
        Err(e) => return PropertyVerdict::unknown(name, UnknownReason::Model(e.to_string())),
    };
    let claim = claim_kind(prop);
    let caveat = (needs_abstraction && claim == ClaimKind::AttributeExact)
        .then(|| "attribute-exact claim proved for the abstract model family".to_string());
    let variants = match flatten_property(wprop, &wview.src) {
        Ok(v) => v,
        Err(AbstractionError::Vacuous { element, class }) => {
            let mut v = PropertyVerdict::unknown(name, UnknownReason::Model(String::new()));
            v.status = Status::Holds;
            v.reason = None;
            v.provenance.caveat = Some(format!("vacuous: `{element}` has abstract type `{class}` with no concrete subtypes"));
            return v;
        }
        Err(e) => return PropertyVerdict::unknown(name, UnknownReason::Abstraction(e.to_string())),
    };
    let mut agg: Option<Attempt> = None;
    let mut k_max = Provenance::default();
    for var in &variants {
        let a = verify_variant(&wview, &var.property, &closure, cfg, deadline);
        if a.prov.k >= k_max.k {
            k_max = a.prov.clone();
        }
        let done = a.status == Status::Violated;
        let replace = match &agg {
            None => true,
            Some(prev) => a.status > prev.status && prev.status != Status::Violated,
        };
        if replace || done {
            agg = Some(a);
        }
        if done {
            break;
        }
    }
    let Some(mut a) = agg else {
        return PropertyVerdict::unknown(name, UnknownReason::Model("no variants".into()));
    };
    if a.status == Status::Holds {
        a.prov = Provenance { cegar_rounds: a.prov.cegar_rounds.max(k_max.cegar_rounds), ..k_max };
    }
    if a.status == Status::Violated && proof.is_some() {
        // The representative values are concrete, so the witness must also
        // violate the original specification.
        let orig = TransformationView::for_property(spec, prop).expect("resolved above");
        let cex = a.cex.take().expect("violations carry a counterexample");
        a = confirm(&orig, prop, cex, a.prov);
    }
    a.prov.variants = variants.len();
    a.prov.abstracted = needs_abstraction;
    a.prov.claim = Some(claim);
    a.prov.caveat = caveat;
    PropertyVerdict {
        property: name.to_string(),
        status: a.status,
        counterexample: a.cex,
        reason: a.reason,
        concrete: a.concrete,
        provenance: a.prov,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub holds: usize,
    pub violated: usize,
    pub unknown: usize,
    pub total: usize,
}

impl Summary {
    pub fn of(vs: &[PropertyVerdict]) -> Self {
        let count = |s: Status| vs.iter().filter(|v| v.status == s).count();
        Summary {
            holds: count(Status::Holds),
            violated: count(Status::Violated),
            unknown: count(Status::Unknown),
            total: vs.len(),
        }
    }

    pub fn event(&self, time_sec: f64) -> serde_json::Value {
        serde_json::json!({
            "event": "summary",
            "holds": self.holds,
            "violated": self.violated,
            "unknown": self.unknown,
            "total": self.total,
            "timeSec": time_sec,
        })
    }
}

/// Verify the selected properties (all when `only` is empty) on a bounded
/// worker pool. `sink` sees each verdict as it completes; the returned list
/// follows declaration order.
pub fn verify_all(
    spec: &Specification,
    cfg: &VerificationConfig,
    parallelism: usize,
    only: &[String],
    sink: &(dyn Fn(&PropertyVerdict) + Sync),
) -> Result<Vec<PropertyVerdict>, ConfigError> {
    cfg.validate()?;
    if parallelism == 0 {
        return Err(ConfigError::Parallelism);
    }
    let props: Vec<&PropertyDecl> = spec
        .properties
        .iter()
        .filter(|p| only.is_empty() || only.contains(&p.name))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("thread pool");
    Ok(pool.install(|| {
        props
            .par_iter()
            .map(|p| {
                let v = verify_property(spec, p, cfg);
                sink(&v);
                v
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_spec;

    const SPEC: &str = r#"
metamodel S { class A { } class B { } assoc ab : A -> B }
metamodel T { class X { } }
transformation t : S -> T {
    layer one {
        rule Pair {
            match { a : A  b : B  direct l : ab -- a.b }
            apply { x : X }
        }
    }
    layer two {
        rule Single {
            match { a : A }
            apply { x : X }
        }
    }
}
property AHasX {
    precondition { a : A }
    postcondition { x : X  x <--trace-- a }
}
property BHasX {
    precondition { b : B }
    postcondition { x : X  x <--trace-- b }
}
"#;

    fn cfg() -> VerificationConfig {
        VerificationConfig { timeout: Duration::from_secs(60), ..Default::default() }
    }

    #[test]
    fn refinement_adds_the_matching_layer() {
        let spec = parse_spec(SPEC).unwrap();
        let v = verify_property(&spec, &spec.properties[0], &cfg());
        assert_eq!(v.status, Status::Holds, "{v:?}");
        assert_eq!(v.provenance.cegar_rounds, 1);
        assert_eq!(v.provenance.fragment, vec!["one", "two"]);
    }

    #[test]
    fn unmatched_counterexample_is_confirmed() {
        let spec = parse_spec(SPEC).unwrap();
        let v = verify_property(&spec, &spec.properties[1], &cfg());
        assert_eq!(v.status, Status::Violated);
        assert_eq!(v.provenance.cegar_rounds, 0);
        assert!(!v.concrete.unwrap().holds);
    }

    #[test]
    fn zero_timeout_is_rejected() {
        let c = VerificationConfig { timeout: Duration::ZERO, ..Default::default() };
        assert_eq!(c.validate(), Err(ConfigError::Timeout));
    }

    #[test]
    fn parallel_runs_agree() {
        let spec = parse_spec(SPEC).unwrap();
        let one = verify_all(&spec, &cfg(), 1, &[], &|_| {}).unwrap();
        let four = verify_all(&spec, &cfg(), 4, &[], &|_| {}).unwrap();
        let st = |v: &[PropertyVerdict]| v.iter().map(|x| x.status).collect::<Vec<_>>();
        assert_eq!(st(&one), st(&four));
        assert_eq!(Summary::of(&one).total, 2);
    }
}
