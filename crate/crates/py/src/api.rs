//! Interpreter-independent operations returning JSON text.

use std::time::Duration;

use dsltrans_core::abstraction::{synthesize_abstraction, validate_abstraction};
use dsltrans_core::cutoff::{cutoff_report, FragmentKind, RelevanceMode};
use dsltrans_core::exec::execute;
use dsltrans_core::fragment::{check_flnr, check_gbpp};
use dsltrans_core::lang::{parse_spec, Specification, TransformationView};
use dsltrans_core::model::InstanceModel;
use dsltrans_core::verify::{verify_all, VerificationConfig};

pub type ApiResult<T> = Result<T, String>;

pub fn parse(text: &str) -> ApiResult<Specification> {
    parse_spec(text).map_err(|d| d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\n"))
}

fn to_json<T: serde::Serialize>(v: &T) -> ApiResult<String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn check(spec: &Specification) -> ApiResult<String> {
    let mut ts = serde_json::Map::new();
    for t in &spec.transformations {
        let view = TransformationView::new(spec, t).map_err(|e| e.to_string())?;
        ts.insert(t.name.clone(), serde_json::to_value(check_flnr(&view)).map_err(|e| e.to_string())?);
    }
    let ps: serde_json::Map<String, serde_json::Value> = spec
        .properties
        .iter()
        .map(|p| (p.name.clone(), serde_json::to_value(check_gbpp(p)).unwrap_or_default()))
        .collect();
    to_json(&serde_json::json!({"transformations": ts, "properties": ps}))
}

pub fn cutoff(spec: &Specification, property: &str, mode: &str) -> ApiResult<String> {
    let mode: RelevanceMode = mode.parse()?;
    let prop = spec.property(property).ok_or_else(|| format!("no property named `{property}`"))?;
    let view = TransformationView::for_property(spec, prop).map_err(|e| e.to_string())?;
    let rep = cutoff_report(&view, prop, mode).map_err(|e| e.to_string())?;
    to_json(&rep.to_json())
}

pub struct VerifyOptions {
    pub properties: Vec<String>,
    pub timeout: f64,
    pub fragment: String,
    pub mode: String,
    pub per_class: bool,
    pub parallel: usize,
}

pub fn verify(spec: &Specification, o: &VerifyOptions) -> ApiResult<String> {
    if !(o.timeout.is_finite() && o.timeout > 0.0) {
        return Err("timeout must be a positive number of seconds".into());
    }
    for n in &o.properties {
        if spec.property(n).is_none() {
            return Err(format!("no property named `{n}`"));
        }
    }
    let cfg = VerificationConfig {
        timeout: Duration::from_secs_f64(o.timeout),
        fragment: o.fragment.parse::<FragmentKind>()?,
        mode: o.mode.parse::<RelevanceMode>()?,
        per_class: o.per_class,
        ..Default::default()
    };
    let verdicts = verify_all(spec, &cfg, o.parallel, &o.properties, &|_| {}).map_err(|e| e.to_string())?;
    to_json(&verdicts)
}

pub fn run(spec: &Specification, model_json: &str, transformation: Option<&str>) -> ApiResult<String> {
    let t = match transformation {
        Some(n) => spec.transformation(n).ok_or_else(|| format!("no transformation named `{n}`"))?,
        None => spec.transformations.first().ok_or("the specification declares no transformation")?,
    };
    let view = TransformationView::new(spec, t).map_err(|e| e.to_string())?;
    let source = InstanceModel::from_json(model_json).map_err(|e| e.to_string())?;
    let res = execute(&view, &source).map_err(|e| e.to_string())?;
    let mut target = res.target;
    target.traces = res.traces;
    to_json(&target)
}

pub fn abstract_spec(spec: &Specification) -> ApiResult<(String, String)> {
    let (proof, map) = synthesize_abstraction(spec).map_err(|e| e.to_string())?;
    let report = validate_abstraction(spec, &map).map_err(|e| e.to_string())?;
    let doc = serde_json::json!({"map": map.to_json(), "report": report});
    Ok((dsltrans_core::lang::print_spec(&proof), to_json(&doc)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"
metamodel S { class A { } }
metamodel T { class X { } }
transformation t : S -> T { layer l { rule R { match { a : A } apply { x : X } } } }
property AHasX { precondition { a : A } postcondition { x : X  x <--trace-- a } }
"#;

    #[test]
    fn cutoff_and_verify_round_trip_through_json() {
        let spec = parse(SPEC).unwrap();
        let c: serde_json::Value = serde_json::from_str(&cutoff(&spec, "AHasX", "trace-attr").unwrap()).unwrap();
        assert_eq!(c["bounds"]["k"], 1);
        let opts = VerifyOptions {
            properties: vec![],
            timeout: 30.0,
            fragment: "minimal".into(),
            mode: "trace-attr".into(),
            per_class: true,
            parallel: 1,
        };
        let v: serde_json::Value = serde_json::from_str(&verify(&spec, &opts).unwrap()).unwrap();
        assert_eq!(v[0]["status"], "HOLDS");
    }

    #[test]
    fn errors_are_messages() {
        assert!(parse("metamodel").is_err());
        let spec = parse(SPEC).unwrap();
        assert!(cutoff(&spec, "Nope", "trace-attr").is_err());
        assert!(cutoff(&spec, "AHasX", "psychic").is_err());
        assert!(run(&spec, "not json", None).is_err());
    }

    #[test]
    fn run_produces_traces() {
        let spec = parse(SPEC).unwrap();
        let out: serde_json::Value =
            serde_json::from_str(&run(&spec, r#"{"elements":[{"id":"a","type":"A"}]}"#, None).unwrap()).unwrap();
        assert_eq!(out["elements"].as_array().unwrap().len(), 1);
        assert_eq!(out["traces"][0]["src"], "a");
    }
}
