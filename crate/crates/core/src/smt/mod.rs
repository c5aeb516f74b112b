//! Bounded SMT verification: encoding, solving, decoding.

mod decode;
mod encode;
mod lazy;
pub mod sexpr;
mod solver;

use std::time::Duration;

use thiserror::Error;

pub use decode::{decode_counterexample, Counterexample};
pub use encode::{
    components, encode, AttrVar, Codec, CreatorVar, EncodedProblem, FiringVar, Goal, LinkVar, PreBinding,
    ProblemMeta, Slot, VarRole, Withheld,
};
pub use lazy::{lazy_closure_loop, solve, SolveOutcome};
pub use solver::{run_solver_text, SolverConfig, SolverStatus, SolverVerdict};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodeOptions {
    /// Split the postcondition into independent components.
    pub factored: bool,
    /// One solver query per precondition binding.
    pub incremental: bool,
    /// Withhold mandatory lower bounds until a model violates them.
    pub lazy_closure: bool,
    pub symmetry_break: bool,
    /// Maximum enumerated bindings before giving up.
    pub ceiling: usize,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            factored: true,
            incremental: false,
            lazy_closure: true,
            symmetry_break: false,
            ceiling: 200_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("encoding exceeds the binding ceiling ({count} > {ceiling})")]
    Ceiling { count: usize, ceiling: usize },
}

/// Solve a problem with every constraint asserted at once.
pub fn run_solver(problem: &EncodedProblem, cfg: &SolverConfig, timeout: Duration) -> SolverVerdict {
    run_solver_text(&problem.smtlib(), cfg, timeout)
}
