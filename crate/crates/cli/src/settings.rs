//! Verification settings merged from an optional key=value sidecar and flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use dsltrans_core::cutoff::{FragmentKind, RelevanceMode};
use dsltrans_core::smt::SolverConfig;
use dsltrans_core::verify::VerificationConfig;

pub const SIDECAR: &str = "dsltrans.toml";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    #[default]
    Json,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Per-property wall-clock budget in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub timeout: Option<f64>,
    /// SMT solver executable.
    #[arg(long, value_name = "PATH")]
    pub solver: Option<PathBuf>,
    /// Rule relevance analysis: legacy, trace or trace-attr.
    #[arg(long, value_name = "MODE")]
    pub dependency_mode: Option<String>,
    /// Layer fragment to encode first: minimal, baseline or full.
    #[arg(long, value_name = "KIND")]
    pub fragment: Option<String>,
    #[arg(long, overrides_with = "no_per_class")]
    pub per_class: bool,
    #[arg(long)]
    pub no_per_class: bool,
    #[arg(long, overrides_with = "monolithic")]
    pub factored: bool,
    #[arg(long)]
    pub monolithic: bool,
    /// One solver call per precondition binding.
    #[arg(long)]
    pub incremental: bool,
    #[arg(long, overrides_with = "eager_closure")]
    pub lazy_closure: bool,
    #[arg(long)]
    pub eager_closure: bool,
    #[arg(long)]
    pub symmetry_break: bool,
    /// Directory receiving every generated SMT-LIB problem.
    #[arg(long, value_name = "DIR")]
    pub dump_smt: Option<PathBuf>,
    /// Restrict to the named property; repeatable.
    #[arg(long = "property", value_name = "NAME")]
    pub properties: Vec<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for independent properties.
    #[arg(long, value_name = "N")]
    pub parallel: Option<usize>,
    /// Output file.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Key=value settings file; defaults to a sidecar next to the spec.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub verification: VerificationConfig,
    pub properties: Vec<String>,
    pub format: Format,
    pub parallel: usize,
    pub out: Option<PathBuf>,
}

fn sidecar_for(spec: &Path, flags: &Flags) -> Option<PathBuf> {
    if let Some(p) = &flags.config {
        return Some(p.clone());
    }
    let p = spec.parent().unwrap_or(Path::new(".")).join(SIDECAR);
    p.is_file().then_some(p)
}

fn read_sidecar(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<toml::Table>().with_context(|| format!("parsing {}", path.display()))
}

fn bool_key(t: &toml::Table, k: &str) -> Result<Option<bool>> {
    match t.get(k) {
        None => Ok(None),
        Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
        Some(v) => bail!("`{k}` must be a boolean, found {v}"),
    }
}

fn str_key(t: &toml::Table, k: &str) -> Result<Option<String>> {
    match t.get(k) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s.clone())),
        Some(v) => bail!("`{k}` must be a string, found {v}"),
    }
}

fn num_key(t: &toml::Table, k: &str) -> Result<Option<f64>> {
    match t.get(k) {
        None => Ok(None),
        Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(toml::Value::Float(f)) => Ok(Some(*f)),
        Some(v) => bail!("`{k}` must be a number, found {v}"),
    }
}

const KNOWN: &[&str] = &[
    "timeout",
    "solver",
    "dependency-mode",
    "fragment",
    "per-class",
    "factored",
    "incremental",
    "lazy-closure",
    "symmetry-break",
    "dump-smt",
    "format",
    "parallel",
    "cegar",
    "ceiling",
    "cutoff-budget",
];

fn toggle(on: bool, off: bool) -> Option<bool> {
    match (on, off) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

impl Settings {
    pub fn resolve(spec: &Path, flags: &Flags) -> Result<Settings> {
        let table = match sidecar_for(spec, flags) {
            Some(p) => read_sidecar(&p)?,
            None => toml::Table::new(),
        };
        if let Some(k) = table.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            bail!("unknown setting `{k}`");
        }
        let mut cfg = VerificationConfig::default();

        let timeout = flags.timeout.or(num_key(&table, "timeout")?);
        if let Some(t) = timeout {
            if !(t.is_finite() && t > 0.0) {
                bail!("timeout must be a positive number of seconds");
            }
            cfg.timeout = Duration::from_secs_f64(t);
        }
        if let Some(p) = flags.solver.clone().or(str_key(&table, "solver")?.map(PathBuf::from)) {
            cfg.solver = SolverConfig { path: p, ..SolverConfig::default() };
        }
        if let Some(m) = flags.dependency_mode.clone().or(str_key(&table, "dependency-mode")?) {
            cfg.mode = m.parse::<RelevanceMode>().map_err(|e| anyhow!(e))?;
        }
        if let Some(f) = flags.fragment.clone().or(str_key(&table, "fragment")?) {
            cfg.fragment = f.parse::<FragmentKind>().map_err(|e| anyhow!(e))?;
        }
        if let Some(b) = toggle(flags.per_class, flags.no_per_class).or(bool_key(&table, "per-class")?) {
            cfg.per_class = b;
        }
        if let Some(b) = toggle(flags.factored, flags.monolithic).or(bool_key(&table, "factored")?) {
            cfg.encode.factored = b;
        }
        if let Some(b) = toggle(flags.incremental, false).or(bool_key(&table, "incremental")?) {
            cfg.encode.incremental = b;
        }
        if let Some(b) = toggle(flags.lazy_closure, flags.eager_closure).or(bool_key(&table, "lazy-closure")?) {
            cfg.encode.lazy_closure = b;
        }
        if let Some(b) = toggle(flags.symmetry_break, false).or(bool_key(&table, "symmetry-break")?) {
            cfg.encode.symmetry_break = b;
        }
        if let Some(b) = bool_key(&table, "cegar")? {
            cfg.cegar = b;
        }
        if let Some(c) = num_key(&table, "ceiling")? {
            cfg.encode.ceiling = c as usize;
        }
        if let Some(c) = num_key(&table, "cutoff-budget")? {
            cfg.cutoff_budget = c as u64;
        }
        cfg.dump_smt = flags.dump_smt.clone().or(str_key(&table, "dump-smt")?.map(PathBuf::from));
        cfg.validate()?;

        let format = match (flags.format, str_key(&table, "format")?) {
            (Some(f), _) => f,
            (None, Some(s)) => match s.as_str() {
                "text" => Format::Text,
                "json" => Format::Json,
                other => bail!("unknown format `{other}`"),
            },
            (None, None) => Format::Json,
        };
        let parallel = match flags.parallel.or(num_key(&table, "parallel")?.map(|n| n as usize)) {
            Some(0) => bail!("parallelism must be at least 1"),
            Some(n) => n,
            None => 1,
        };
        Ok(Settings {
            verification: cfg,
            properties: flags.properties.clone(),
            format,
            parallel,
            out: flags.out.clone(),
        })
    }
}
