//! The `.dslt` specification language: syntax tree, parser, resolver and printer.

pub mod ast;
pub mod info;
mod lexer;
mod parser;
mod printer;
mod resolve;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use info::{flatten_inheritance_info, ClassInfo, MetamodelInfo};
pub use printer::print_spec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// A positioned message produced while parsing or resolving.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: u32,
    pub col: u32,
    pub severity: Severity,
    pub message: String,
}

impl ParseDiagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        ParseDiagnostic {
            line: span.line,
            col: span.col,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    /// `file:line:col: severity: message`
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.severity, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("inheritance cycle through class `{0}`")]
    InheritanceCycle(String),
    #[error("unresolved reference: {0}")]
    Unresolved(String),
    #[error("duplicate {0}")]
    Duplicate(String),
}

/// Parse and resolve a specification.
pub fn parse_spec(text: &str) -> Result<Specification, Vec<ParseDiagnostic>> {
    let spec = parser::parse_unresolved(text).map_err(|d| vec![d])?;
    resolve::resolve(spec)
}

/// Flattened views of the two metamodels of one transformation.
#[derive(Clone, Debug)]
pub struct TransformationView<'a> {
    pub spec: &'a Specification,
    pub t: &'a Transformation,
    pub src: MetamodelInfo,
    pub tgt: MetamodelInfo,
}

impl<'a> TransformationView<'a> {
    pub fn new(spec: &'a Specification, t: &'a Transformation) -> Result<Self, LangError> {
        let enums = spec.all_enums();
        let mm = |n: &str| {
            spec.metamodel(n)
                .ok_or_else(|| LangError::Unresolved(format!("metamodel `{n}`")))
        };
        let s = mm(&t.source)?;
        let g = mm(&t.target)?;
        Ok(TransformationView {
            spec,
            t,
            src: MetamodelInfo::build(s, &enums)?,
            tgt: MetamodelInfo::build(g, &enums)?,
        })
    }

    /// View of the transformation a property is stated against.
    pub fn for_property(spec: &'a Specification, p: &PropertyDecl) -> Result<Self, LangError> {
        let t = spec
            .transformation(&p.transformation)
            .ok_or_else(|| LangError::Unresolved(format!("transformation `{}`", p.transformation)))?;
        Self::new(spec, t)
    }

    pub fn source_metamodel(&self) -> &'a Metamodel {
        self.spec.metamodel(&self.t.source).expect("resolved")
    }

    pub fn target_metamodel(&self) -> &'a Metamodel {
        self.spec.metamodel(&self.t.target).expect("resolved")
    }
}
