//! Verification of layered, monotone model transformations via cutoff bounds
//! and bounded SMT encodings.

pub mod abstraction;
pub mod cutoff;
pub mod exec;
pub mod fragment;
pub mod kboundary;
pub mod lang;
pub mod model;
pub mod smt;
pub mod verify;
