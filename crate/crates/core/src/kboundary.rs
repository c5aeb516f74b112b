//! Empirical cutoff validation: uniform bound sweeps, single-class
//! decrements and concrete witnesses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::abstraction::synthesize_abstraction;
use crate::cutoff::{relevant_rules, restrict_relevance, PerClassBounds};
use crate::exec::{check_property_concrete, execute};
use crate::fragment::{check_flnr, Restriction};
use crate::lang::{PropertyDecl, RuleRef, Specification, TransformationView};
use crate::model::InstanceModel;
use crate::smt::{decode_counterexample, encode, solve, SolverStatus};
use crate::verify::{verify_property, PropertyVerdict, Status, VerificationConfig};

pub const OFFSETS: [i64; 7] = [-3, -2, -1, 0, 1, 2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    /// HOLDS below the base bounds, VIOLATED from the base upward.
    Negative,
    /// HOLDS at every offset.
    Positive,
}

impl Pattern {
    /// Negative tests are named with a `_ShouldFail` suffix.
    pub fn for_property(name: &str) -> Self {
        if name.ends_with("_ShouldFail") {
            Pattern::Negative
        } else {
            Pattern::Positive
        }
    }

    pub fn expected(self, delta: i64) -> Status {
        match self {
            Pattern::Negative if delta >= 0 => Status::Violated,
            _ => Status::Holds,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OffsetRun {
    pub delta: i64,
    pub status: Status,
    pub time_sec: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub property: String,
    pub base: PerClassBounds,
    pub runs: Vec<OffsetRun>,
    pub expected: Pattern,
    pub matched: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Source,
    Target,
}

#[derive(Clone, Debug, Serialize)]
pub struct Perturbation {
    pub class: String,
    pub side: Side,
    /// `None` when the class was already at 0 and skipped.
    pub status: Option<Status>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationResult {
    pub property: String,
    pub base_status: Status,
    pub runs: Vec<Perturbation>,
    pub binding_classes: Vec<(Side, String)>,
    pub expected: Pattern,
    pub matched: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessRow {
    pub delta: i64,
    pub support: usize,
    pub model: InstanceModel,
    pub executed: bool,
    pub error: Option<String>,
    pub observed: Option<Status>,
    pub predicted: Status,
    pub matched: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct WitnessResult {
    pub property: String,
    pub rows: Vec<WitnessRow>,
}

impl WitnessResult {
    pub fn matched(&self) -> bool {
        self.rows.iter().all(|r| r.matched)
    }
}

/// Source models indexed by support level.
pub struct WitnessFamily<'a> {
    pub name: String,
    pub generate: Box<dyn Fn(usize) -> InstanceModel + Sync + 'a>,
}

/// The base problem a sweep perturbs.
pub struct Base {
    spec: Specification,
    property: String,
    layers: Vec<usize>,
    rules: Vec<RuleRef>,
    pub bounds: PerClassBounds,
    pub verdict: PropertyVerdict,
}

impl Base {
    /// Verify at the theorem bound and keep the fragment and bounds it used.
    pub fn prepare(spec: &Specification, prop: &PropertyDecl, cfg: &VerificationConfig) -> Result<Base, String> {
        let verdict = verify_property(spec, prop, cfg);
        let view = TransformationView::for_property(spec, prop).map_err(|e| e.to_string())?;
        let work = if check_flnr(&view).violations.iter().any(|v| v.restriction == Restriction::R5) {
            synthesize_abstraction(spec).map_err(|e| e.to_string())?.0
        } else {
            spec.clone()
        };
        let wprop = work.property(&prop.name).ok_or("property vanished")?.clone();
        let wview = TransformationView::for_property(&work, &wprop).map_err(|e| e.to_string())?;
        let layers: Vec<usize> = wview
            .t
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| verdict.provenance.fragment.contains(&l.name))
            .map(|(i, _)| i)
            .collect();
        let full = relevant_rules(&wview, &wprop, cfg.mode);
        let rel = restrict_relevance(&wview, &wprop, &full, &layers.iter().copied().collect());
        let rules = rel.rules.into_iter().collect();
        drop(wview);
        Ok(Base {
            bounds: verdict.provenance.bounds.clone(),
            property: prop.name.clone(),
            spec: work,
            layers,
            rules,
            verdict,
        })
    }

    fn run(&self, bounds: &PerClassBounds, cfg: &VerificationConfig) -> (Status, f64) {
        let start = Instant::now();
        let prop = self.spec.property(&self.property).expect("kept");
        let view = TransformationView::for_property(&self.spec, prop).expect("resolved");
        let pb = match encode(&view, prop, &self.rules, &self.layers, bounds, &cfg.encode) {
            Ok(p) => p,
            Err(_) => return (Status::Unknown, start.elapsed().as_secs_f64()),
        };
        let out = solve(&pb, &cfg.encode, &cfg.solver, cfg.timeout);
        let status = match out.verdict.status {
            SolverStatus::Unsat => Status::Holds,
            SolverStatus::Sat => {
                let cex = decode_counterexample(&view, &pb, out.verdict.model.as_ref().expect("sat has model"));
                match execute(&view, &cex.source) {
                    Ok(r) if !check_property_concrete(&view, prop, &cex.source, &r).holds => Status::Violated,
                    _ => Status::Unknown,
                }
            }
            _ => Status::Unknown,
        };
        (status, start.elapsed().as_secs_f64())
    }

    fn seed_classes(&self) -> BTreeSet<String> {
        let prop = self.spec.property(&self.property).expect("kept");
        let view = TransformationView::for_property(&self.spec, prop).expect("resolved");
        prop.precondition
            .elements
            .iter()
            .flat_map(|e| view.src.concrete_subtypes(&e.class).to_vec())
            .collect()
    }
}

/// Shift every per-class bound by `delta`; seeded source classes stay at 1 or more.
pub fn shift_bounds(b: &PerClassBounds, delta: i64, seeds: &BTreeSet<String>) -> PerClassBounds {
    let f = |v: u64, floor: i64| (v as i64 + delta).max(floor) as u64;
    PerClassBounds {
        source: b
            .source
            .iter()
            .map(|(c, v)| {
                let floor = if seeds.contains(c) && *v > 0 { 1 } else { 0 };
                (c.clone(), f(*v, floor))
            })
            .collect(),
        target: b.target.iter().map(|(c, v)| (c.clone(), f(*v, 0))).collect(),
    }
}

pub fn uniform_sweep(base: &Base, cfg: &VerificationConfig) -> SweepResult {
    let seeds = base.seed_classes();
    let runs: Vec<OffsetRun> = OFFSETS
        .par_iter()
        .map(|d| {
            let (status, time_sec) = base.run(&shift_bounds(&base.bounds, *d, &seeds), cfg);
            OffsetRun { delta: *d, status, time_sec }
        })
        .collect();
    let expected = Pattern::for_property(&base.property);
    let matched = runs.iter().all(|r| r.status == expected.expected(r.delta));
    SweepResult { property: base.property.clone(), base: base.bounds.clone(), runs, expected, matched }
}

pub fn selective_minus_one(base: &Base, cfg: &VerificationConfig) -> PerturbationResult {
    let (base_status, _) = base.run(&base.bounds, cfg);
    let mut jobs: Vec<(Side, String, u64)> = Vec::new();
    jobs.extend(base.bounds.source.iter().map(|(c, v)| (Side::Source, c.clone(), *v)));
    jobs.extend(base.bounds.target.iter().map(|(c, v)| (Side::Target, c.clone(), *v)));
    let runs: Vec<Perturbation> = jobs
        .par_iter()
        .map(|(side, class, v)| {
            let status = (*v > 0).then(|| {
                let mut b = base.bounds.clone();
                let map = if *side == Side::Source { &mut b.source } else { &mut b.target };
                map.insert(class.clone(), v - 1);
                base.run(&b, cfg).0
            });
            Perturbation { class: class.clone(), side: *side, status }
        })
        .collect();
    let binding_classes: Vec<(Side, String)> = runs
        .iter()
        .filter(|r| r.status.is_some_and(|s| s != base_status))
        .map(|r| (r.side, r.class.clone()))
        .collect();
    let expected = Pattern::for_property(&base.property);
    let matched = match expected {
        Pattern::Negative => !binding_classes.is_empty(),
        Pattern::Positive => binding_classes.is_empty(),
    };
    PerturbationResult { property: base.property.clone(), base_status, runs, binding_classes, expected, matched }
}

/// Execute family members at support levels around `base_level` and compare
/// with the sweep prediction at the matching offset.
pub fn witness_validation(
    spec: &Specification,
    prop: &PropertyDecl,
    family: Option<&WitnessFamily>,
    base_level: usize,
    sweep: &SweepResult,
) -> WitnessResult {
    let mut out = WitnessResult { property: prop.name.clone(), rows: vec![] };
    let Some(family) = family else { return out };
    let Ok(view) = TransformationView::for_property(spec, prop) else { return out };
    for delta in [-1i64, 0, 1] {
        let level = base_level as i64 + delta;
        if level < 0 {
            continue;
        }
        let model = (family.generate)(level as usize);
        let predicted = sweep
            .runs
            .iter()
            .find(|r| r.delta == delta)
            .map_or(Status::Unknown, |r| r.status);
        let (executed, error, observed) = match execute(&view, &model) {
            Ok(r) => {
                let holds = check_property_concrete(&view, prop, &model, &r).holds;
                (true, None, Some(if holds { Status::Holds } else { Status::Violated }))
            }
            Err(e) => (false, Some(e.to_string()), None),
        };
        out.rows.push(WitnessRow {
            delta,
            support: level as usize,
            model,
            executed,
            error,
            matched: observed == Some(predicted),
            observed,
            predicted,
        });
    }
    out
}

/// One property's results across the three phases.
#[derive(Clone, Debug, Serialize)]
pub struct KBoundaryResult {
    pub spec: String,
    pub property: String,
    pub base_k: u64,
    pub dominant: String,
    pub sweep: Option<SweepResult>,
    pub perturbation: Option<PerturbationResult>,
    pub witness: Option<WitnessResult>,
}

/// Run all three phases for one property.
pub fn run_experiment(
    spec_name: &str,
    spec: &Specification,
    prop: &PropertyDecl,
    family: Option<&WitnessFamily>,
    cfg: &VerificationConfig,
) -> Result<KBoundaryResult, String> {
    let base = Base::prepare(spec, prop, cfg)?;
    let sweep = uniform_sweep(&base, cfg);
    let perturbation = selective_minus_one(&base, cfg);
    let level = base.bounds.source.values().sum::<u64>() as usize;
    let witness = witness_validation(spec, prop, family, level, &sweep);
    Ok(KBoundaryResult {
        spec: spec_name.to_string(),
        property: prop.name.clone(),
        base_k: base.verdict.provenance.k,
        dominant: base.verdict.provenance.dominant.clone(),
        sweep: Some(sweep),
        perturbation: Some(perturbation),
        witness: Some(witness),
    })
}

/// Family placing `n` copies of each precondition element's class.
pub fn seed_family<'a>(view: &'a TransformationView<'a>, prop: &'a PropertyDecl) -> WitnessFamily<'a> {
    WitnessFamily {
        name: format!("{}-seeds", prop.name),
        generate: Box::new(move |n| {
            let mut m = InstanceModel::default();
            for (k, e) in prop.precondition.elements.iter().enumerate() {
                let Some(class) = view.src.concrete_subtypes(&e.class).first() else { continue };
                for i in 0..n {
                    m.elements.push(crate::model::Element {
                        id: format!("{}_{k}_{i}", e.name),
                        class: class.clone(),
                        attrs: BTreeMap::new(),
                    });
                }
            }
            m.normalize();
            m
        }),
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "✓"
    } else {
        "✗"
    }
}

/// Markdown report with one table per phase.
pub fn emit_report(results: &[KBoundaryResult]) -> String {
    let mut s = String::from("# K-boundary validation\n");
    if results.is_empty() {
        return s;
    }
    let head = "| Spec | Property | Base K | Dominant formula |";
    let rule = "|---|---|---|---|";

    s.push_str("\n## Uniform sweep\n\n");
    let _ = writeln!(s, "{head} Uniform | {} |", OFFSETS.map(|d| format!("{d:+}")).join(" | "));
    let _ = writeln!(s, "{rule}---|{}", "---|".repeat(OFFSETS.len()));
    for r in results {
        let Some(sw) = &r.sweep else { continue };
        let cells: Vec<String> = OFFSETS
            .iter()
            .map(|d| {
                sw.runs
                    .iter()
                    .find(|x| x.delta == *d)
                    .map_or("-".into(), |x| format!("{} ({:.2}s)", x.status.as_str(), x.time_sec))
            })
            .collect();
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.spec,
            r.property,
            r.base_k,
            r.dominant,
            mark(sw.matched),
            cells.join(" | ")
        );
    }

    s.push_str("\n## Selective -1\n\n");
    let _ = writeln!(s, "{head} Sel. -1 | Binding classes |");
    let _ = writeln!(s, "{rule}---|---|");
    for r in results {
        let Some(p) = &r.perturbation else { continue };
        let cell = match p.expected {
            Pattern::Positive if p.matched => "n/a".to_string(),
            _ => mark(p.matched).to_string(),
        };
        let classes: Vec<String> = p
            .binding_classes
            .iter()
            .map(|(side, c)| format!("{c} ({})", if *side == Side::Source { "source" } else { "target" }))
            .collect();
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.spec,
            r.property,
            r.base_k,
            r.dominant,
            cell,
            if classes.is_empty() { "-".into() } else { classes.join(", ") }
        );
    }

    s.push_str("\n## Concrete witnesses\n\n");
    let _ = writeln!(s, "{head} Concrete | Levels |");
    let _ = writeln!(s, "{rule}---|---|");
    for r in results {
        let Some(w) = &r.witness else { continue };
        let levels: Vec<String> = w
            .rows
            .iter()
            .map(|row| {
                let obs = row.observed.map_or("error", Status::as_str);
                format!("{}: {} vs {}", row.support, obs, row.predicted.as_str())
            })
            .collect();
        let cell = if w.rows.is_empty() { "-" } else { mark(w.matched()) };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.spec,
            r.property,
            r.base_k,
            r.dominant,
            cell,
            if levels.is_empty() { "-".into() } else { levels.join("; ") }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_only_the_header() {
        assert_eq!(emit_report(&[]), "# K-boundary validation\n");
    }

    #[test]
    fn shifting_respects_floors() {
        let b = PerClassBounds {
            source: BTreeMap::from([("S".to_string(), 1), ("U".to_string(), 2)]),
            target: BTreeMap::from([("T".to_string(), 3)]),
        };
        let seeds = BTreeSet::from(["S".to_string()]);
        let s = shift_bounds(&b, -3, &seeds);
        assert_eq!(s.source["S"], 1);
        assert_eq!(s.source["U"], 0);
        assert_eq!(s.target["T"], 0);
        assert_eq!(shift_bounds(&b, 2, &seeds).target["T"], 5);
    }

    #[test]
    fn patterns() {
        assert_eq!(Pattern::for_property("X_ShouldFail"), Pattern::Negative);
        assert_eq!(Pattern::Negative.expected(-1), Status::Holds);
        assert_eq!(Pattern::Negative.expected(0), Status::Violated);
        assert_eq!(Pattern::Positive.expected(3), Status::Holds);
    }
}
