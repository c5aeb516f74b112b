use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{EncodeOptions, EncodedProblem, Goal, SolverConfig, SolverStatus, SolverVerdict};
use super::solver::run_solver_text;

#[derive(Clone, Debug, Serialize)]
pub struct SolveOutcome {
    pub verdict: SolverVerdict,
    /// Solver invocations made.
    pub rounds: usize,
    /// Withheld lower-bound constraints that had to be added.
    pub added: usize,
}

/// Solve with lower bounds withheld, adding back exactly those a candidate
/// model violates until the answer no longer depends on them.
pub fn lazy_closure_loop(problem: &EncodedProblem, goal: Goal, cfg: &SolverConfig, timeout: Duration) -> SolveOutcome {
    let start = Instant::now();
    let mut added: BTreeSet<usize> = BTreeSet::new();
    let mut rounds = 0;
    loop {
        let extra: Vec<&str> = added.iter().map(|i| problem.withheld[*i].assertion.as_str()).collect();
        let left = timeout.saturating_sub(start.elapsed());
        let mut v = run_solver_text(&problem.script(&extra, goal), cfg, left);
        rounds += 1;
        v.wall_time = start.elapsed().as_secs_f64();
        let Some(model) = v.model.as_ref().filter(|_| v.status == SolverStatus::Sat) else {
            return SolveOutcome { verdict: v, rounds, added: added.len() };
        };
        let val = |n: &str| model.get(n).copied().unwrap_or(0) != 0;
        let violated: Vec<usize> = problem
            .withheld
            .iter()
            .enumerate()
            .filter(|(i, w)| {
                !added.contains(i)
                    && val(&problem.source_slots[w.slot].exists)
                    && (w.links.iter().filter(|l| val(l)).count() as u32) < w.lower
            })
            .map(|(i, _)| i)
            .collect();
        if violated.is_empty() {
            return SolveOutcome { verdict: v, rounds, added: added.len() };
        }
        added.extend(violated);
    }
}

/// Solve according to the options: one query, or one per precondition binding.
pub fn solve(problem: &EncodedProblem, opts: &EncodeOptions, cfg: &SolverConfig, timeout: Duration) -> SolveOutcome {
    if !opts.incremental || problem.pre_bindings.is_empty() {
        return lazy_closure_loop(problem, Goal::Any, cfg, timeout);
    }
    let start = Instant::now();
    let mut rounds = 0;
    let mut added = 0;
    let mut worst: Option<SolverVerdict> = None;
    for i in 0..problem.pre_bindings.len() {
        let left = timeout.saturating_sub(start.elapsed());
        if left.is_zero() {
            worst = Some(SolverVerdict {
                status: SolverStatus::Timeout,
                model: None,
                wall_time: start.elapsed().as_secs_f64(),
                raw: None,
            });
            break;
        }
        let o = lazy_closure_loop(problem, Goal::Binding(i), cfg, left);
        rounds += o.rounds;
        added += o.added;
        match o.verdict.status {
            SolverStatus::Sat => {
                let mut v = o.verdict;
                v.wall_time = start.elapsed().as_secs_f64();
                return SolveOutcome { verdict: v, rounds, added };
            }
            SolverStatus::Unsat => {}
            _ => {
                if worst.is_none() {
                    worst = Some(o.verdict);
                }
            }
        }
    }
    let mut v = worst.unwrap_or(SolverVerdict {
        status: SolverStatus::Unsat,
        model: None,
        wall_time: 0.0,
        raw: None,
    });
    v.wall_time = start.elapsed().as_secs_f64();
    SolveOutcome { verdict: v, rounds, added }
}
