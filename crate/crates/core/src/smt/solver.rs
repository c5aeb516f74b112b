//! External SMT solver driver over a child process.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use wait_timeout::ChildExt;

use super::sexpr::{parse_all, SExpr};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub path: PathBuf,
    pub args: Vec<String>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let path = std::env::var_os("DSLTRANS_SOLVER")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("z3"));
        SolverConfig {
            path,
            args: vec!["-in".into(), "-smt2".into()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    SolverError,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverVerdict {
    pub status: SolverStatus,
    /// Variable assignment; Booleans map to 0/1.
    pub model: Option<BTreeMap<String, i64>>,
    pub wall_time: f64,
    /// Raw output or failure description for errors.
    pub raw: Option<String>,
}

impl SolverVerdict {
    fn error(msg: String, start: Instant) -> Self {
        SolverVerdict {
            status: SolverStatus::SolverError,
            model: None,
            wall_time: start.elapsed().as_secs_f64(),
            raw: Some(msg),
        }
    }
}

/// Run `text` through the solver, killing and reaping it after `timeout`.
pub fn run_solver_text(text: &str, cfg: &SolverConfig, timeout: Duration) -> SolverVerdict {
    let start = Instant::now();
    let mut child = match Command::new(&cfg.path)
        .args(&cfg.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => {
            return SolverVerdict::error(format!("cannot start solver `{}`: {e}", cfg.path.display()), start)
        }
    };
    let mut stdin = child.stdin.take().expect("piped");
    let input = text.to_string();
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let mut stderr = child.stderr.take().expect("piped");
    let ereader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let waited = child.wait_timeout(timeout);
    let timed_out = !matches!(waited, Ok(Some(_)));
    if timed_out {
        let _ = child.kill();
        let _ = child.wait();
    }
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = ereader.join().unwrap_or_default();
    if timed_out {
        return SolverVerdict {
            status: SolverStatus::Timeout,
            model: None,
            wall_time: start.elapsed().as_secs_f64(),
            raw: None,
        };
    }
    let mut v = parse_response(&out).unwrap_or_else(|e| SolverVerdict::error(format!("{e}\n{out}{err}"), start));
    v.wall_time = start.elapsed().as_secs_f64();
    v
}

fn parse_response(out: &str) -> Result<SolverVerdict, String> {
    let items = parse_all(out)?;
    let mut it = items.iter();
    let status = match it.next().and_then(SExpr::atom) {
        Some("sat") => SolverStatus::Sat,
        Some("unsat") => SolverStatus::Unsat,
        Some("unknown") => SolverStatus::Unknown,
        _ => return Err("solver produced no check-sat answer".into()),
    };
    let mut model = None;
    if status == SolverStatus::Sat {
        let mut m = BTreeMap::new();
        let defs = it
            .find(|e| e.list().is_some_and(|l| l.is_empty() || l[0].list().is_some() || l[0].atom() == Some("model")))
            .and_then(SExpr::list)
            .ok_or("sat answer without a model")?;
        for d in defs {
            let Some(parts) = d.list() else { continue };
            if parts.len() == 5 && parts[0].atom() == Some("define-fun") {
                let name = parts[1].atom().ok_or("bad define-fun")?;
                let val = parts[4]
                    .int_value()
                    .ok_or_else(|| format!("unsupported model value for `{name}`"))?;
                m.insert(name.to_string(), val);
            }
        }
        model = Some(m);
    }
    Ok(SolverVerdict {
        status,
        model,
        wall_time: 0.0,
        raw: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_unsat_with_model_error() {
        let v = parse_response("unsat\n(error \"line 3 column 10: model is not available\")\n").unwrap();
        assert_eq!(v.status, SolverStatus::Unsat);
        assert!(v.model.is_none());
    }

    #[test]
    fn parses_sat_model() {
        let v = parse_response("sat\n(\n  (define-fun a () Bool\n    false)\n  (define-fun n () Int\n    4)\n)\n").unwrap();
        let m = v.model.unwrap();
        assert_eq!(m["a"], 0);
        assert_eq!(m["n"], 4);
    }

    #[test]
    fn missing_binary_is_solver_error() {
        let cfg = SolverConfig {
            path: "/nonexistent/solver".into(),
            args: vec![],
        };
        let v = run_solver_text("(check-sat)", &cfg, Duration::from_secs(1));
        assert_eq!(v.status, SolverStatus::SolverError);
    }
}
