mod settings;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use dsltrans_core::abstraction::{synthesize_abstraction, validate_abstraction};
use dsltrans_core::cutoff::cutoff_report;
use dsltrans_core::exec::execute;
use dsltrans_core::fragment::{check_flnr, check_gbpp, FragmentReport};
use dsltrans_core::kboundary::{emit_report, run_experiment, seed_family};
use dsltrans_core::lang::{parse_spec, print_spec, PropertyDecl, Specification, TransformationView};
use dsltrans_core::model::InstanceModel;
use dsltrans_core::verify::{verify_all, PropertyVerdict, Status, Summary};

use settings::{Flags, Format, Settings};

const EXIT_OK: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 3;

/// Cutoff-based verification of layered model transformations.
#[derive(Parser, Debug)]
#[command(name = "dsltrans", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report fragment membership of transformations and properties.
    Check(Common),
    /// Print cutoff parameters, bounds and per-class slots.
    Cutoff(Common),
    /// Verify properties and stream verdicts.
    Verify(Common),
    /// Execute a transformation on a source model.
    Run {
        #[command(flatten)]
        common: Common,
        /// Source model in JSON.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Transformation to run when the spec declares several.
        #[arg(long, value_name = "NAME")]
        transformation: Option<String>,
    },
    /// Synthesize the finite-domain proof specification and its map.
    Abstract(Common),
    /// Run the bound sensitivity experiment.
    Kboundary(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Specification file.
    spec: PathBuf,
    #[command(flatten)]
    flags: Flags,
}

fn load_spec(path: &Path) -> Result<Specification> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_spec(&text).map_err(|diags| {
        let shown = path.display().to_string();
        anyhow!(diags.iter().map(|d| d.render(&shown)).collect::<Vec<_>>().join("\n"))
    })
}

fn selected<'s>(spec: &'s Specification, names: &[String]) -> Result<Vec<&'s PropertyDecl>> {
    for n in names {
        if spec.property(n).is_none() {
            bail!("no property named `{n}`");
        }
    }
    Ok(spec
        .properties
        .iter()
        .filter(|p| names.is_empty() || names.contains(&p.name))
        .collect())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
            Ok(())
        }
    }
}

fn fragment_text(label: &str, r: &FragmentReport) -> String {
    let mut s = if r.holds() {
        format!("{label}: ok (m={}, p={})\n", r.m, r.p)
    } else {
        format!("{label}: {} violation(s)\n", r.violations.len())
    };
    for v in &r.violations {
        s += &format!("  {} at {}: {}\n", v.restriction, v.location, v.message);
    }
    s
}

fn cmd_check(c: &Common) -> Result<u8> {
    let spec = load_spec(&c.spec)?;
    let st = Settings::resolve(&c.spec, &c.flags)?;
    let mut ts = Vec::new();
    for t in &spec.transformations {
        let view = TransformationView::new(&spec, t)?;
        ts.push((t.name.clone(), check_flnr(&view)));
    }
    let ps: Vec<(String, FragmentReport)> = selected(&spec, &st.properties)?
        .into_iter()
        .map(|p| (p.name.clone(), check_gbpp(p)))
        .collect();
    let text = match st.format {
        Format::Json => {
            let entry = |(n, r): &(String, FragmentReport)| serde_json::json!({"name": n, "holds": r.holds(), "report": r});
            let v = serde_json::json!({
                "transformations": ts.iter().map(entry).collect::<Vec<_>>(),
                "properties": ps.iter().map(entry).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        Format::Text => {
            let mut s = String::new();
            for (n, r) in &ts {
                s += &fragment_text(&format!("transformation {n}"), r);
            }
            for (n, r) in &ps {
                s += &fragment_text(&format!("property {n}"), r);
            }
            s
        }
    };
    emit(&st.out, &text)?;
    Ok(EXIT_OK)
}

fn cmd_cutoff(c: &Common) -> Result<u8> {
    let spec = load_spec(&c.spec)?;
    let st = Settings::resolve(&c.spec, &c.flags)?;
    let mut text = String::new();
    for p in selected(&spec, &st.properties)? {
        let view = TransformationView::for_property(&spec, p)?;
        let rep = cutoff_report(&view, p, st.verification.mode)?;
        match st.format {
            Format::Json => text += &format!("{}\n", rep.to_json()),
            Format::Text => {
                let b = &rep.bounds;
                text += &format!(
                    "{}: K={} (coarse {}, sharp {}, tight {}; dominant {}) per-class max {}\n  relevant: {}\n",
                    rep.property,
                    b.k,
                    b.coarse,
                    b.sharp,
                    b.tight,
                    b.dominant_label(),
                    rep.per_class.max(),
                    rep.relevant_rules.join(", ")
                );
            }
        }
    }
    emit(&st.out, &text)?;
    Ok(EXIT_OK)
}

fn verdict_line(v: &PropertyVerdict, format: Format) -> String {
    match format {
        Format::Json => v.event().to_string(),
        Format::Text => {
            let reason = v.reason.as_ref().map(|r| format!(" ({})", r.kind())).unwrap_or_default();
            format!(
                "{:<40} {}{} k={} max={} {:.2}s",
                v.property,
                v.status.as_str(),
                reason,
                v.provenance.k,
                v.provenance.per_class_max,
                v.provenance.time_sec
            )
        }
    }
}

fn exit_for(verdicts: &[PropertyVerdict]) -> u8 {
    let unexpected = verdicts
        .iter()
        .any(|v| v.status == Status::Violated && !v.property.ends_with("_ShouldFail"));
    if unexpected {
        EXIT_VIOLATED
    } else if verdicts.iter().any(|v| v.status == Status::Unknown) {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    }
}

fn cmd_verify(c: &Common) -> Result<u8> {
    let spec = load_spec(&c.spec)?;
    let st = Settings::resolve(&c.spec, &c.flags)?;
    selected(&spec, &st.properties)?;
    let start = Instant::now();
    let file = match &st.out {
        Some(p) => Some(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => None,
    };
    let sink_out = Mutex::new(file);
    let format = st.format;
    let sink = |v: &PropertyVerdict| {
        let line = format!("{}\n", verdict_line(v, format));
        let mut guard = sink_out.lock().expect("output lock");
        let res = match guard.as_mut() {
            Some(f) => f.write_all(line.as_bytes()),
            None => {
                let mut so = std::io::stdout().lock();
                so.write_all(line.as_bytes()).and_then(|_| so.flush())
            }
        };
        if let Err(e) = res {
            log::error!("writing verdict: {e}");
        }
    };
    let verdicts = verify_all(&spec, &st.verification, st.parallel, &st.properties, &sink)?;
    let summary = Summary::of(&verdicts);
    let line = match format {
        Format::Json => summary.event(start.elapsed().as_secs_f64()).to_string(),
        Format::Text => format!(
            "{} properties: {} holds, {} violated, {} unknown ({:.2}s)",
            summary.total,
            summary.holds,
            summary.violated,
            summary.unknown,
            start.elapsed().as_secs_f64()
        ),
    };
    match sink_out.into_inner().expect("output lock") {
        Some(mut f) => writeln!(f, "{line}")?,
        None => println!("{line}"),
    }
    Ok(exit_for(&verdicts))
}

fn cmd_run(c: &Common, model: &Path, transformation: Option<&str>) -> Result<u8> {
    let spec = load_spec(&c.spec)?;
    let st = Settings::resolve(&c.spec, &c.flags)?;
    let t = match transformation {
        Some(n) => spec.transformation(n).ok_or_else(|| anyhow!("no transformation named `{n}`"))?,
        None => match spec.transformations.as_slice() {
            [t] => t,
            [] => bail!("the specification declares no transformation"),
            _ => bail!("several transformations declared; pick one with --transformation"),
        },
    };
    let view = TransformationView::new(&spec, t)?;
    let text = std::fs::read_to_string(model).with_context(|| format!("reading {}", model.display()))?;
    let source = InstanceModel::from_json(&text).with_context(|| format!("parsing {}", model.display()))?;
    let res = execute(&view, &source)?;
    log::info!("{} firings, {} skipped", res.firings.len(), res.skipped.len());
    let mut target = res.target.clone();
    target.traces = res.traces.clone();
    emit(&st.out, &format!("{}\n", serde_json::to_string_pretty(&target)?))?;
    Ok(EXIT_OK)
}

fn cmd_abstract(c: &Common) -> Result<u8> {
    let spec = load_spec(&c.spec)?;
    let st = Settings::resolve(&c.spec, &c.flags)?;
    let (proof, map) = synthesize_abstraction(&spec)?;
    let report = validate_abstraction(&spec, &map)?;
    let printed = print_spec(&proof);
    if let Some(out) = &st.out {
        std::fs::write(out, &printed).with_context(|| format!("writing {}", out.display()))?;
        let mut map_path = out.clone().into_os_string();
        map_path.push(".map.json");
        let doc = serde_json::json!({"map": map.to_json(), "report": report});
        std::fs::write(&map_path, serde_json::to_string_pretty(&doc)?)?;
    } else {
        match st.format {
            Format::Json => {
                let doc = serde_json::json!({"spec": printed, "map": map.to_json(), "report": report});
                println!("{}", serde_json::to_string_pretty(&doc)?);
            }
            Format::Text => print!("{printed}"),
        }
    }
    Ok(if report.valid { EXIT_OK } else { EXIT_UNKNOWN })
}

fn cmd_kboundary(c: &Common) -> Result<u8> {
    let spec = load_spec(&c.spec)?;
    let st = Settings::resolve(&c.spec, &c.flags)?;
    let name = c.spec.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut results = Vec::new();
    for p in selected(&spec, &st.properties)? {
        let view = TransformationView::for_property(&spec, p)?;
        let family = seed_family(&view, p);
        let r = run_experiment(&name, &spec, p, Some(&family), &st.verification).map_err(|e| anyhow!(e))?;
        results.push(r);
    }
    let text = match st.format {
        Format::Text => emit_report(&results),
        Format::Json => results
            .iter()
            .map(|r| serde_json::to_string(r).map(|s| s + "\n"))
            .collect::<Result<String, _>>()?,
    };
    emit(&st.out, &text)?;
    let all_matched = results.iter().all(|r| {
        r.sweep.as_ref().is_none_or(|s| s.matched)
            && r.perturbation.as_ref().is_none_or(|p| p.matched)
            && r.witness.as_ref().is_none_or(|w| w.matched())
    });
    Ok(if all_matched { EXIT_OK } else { EXIT_VIOLATED })
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Check(c) => cmd_check(c),
        Command::Cutoff(c) => cmd_cutoff(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Run { common, model, transformation } => cmd_run(common, model, transformation.as_deref()),
        Command::Abstract(c) => cmd_abstract(c),
        Command::Kboundary(c) => cmd_kboundary(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
