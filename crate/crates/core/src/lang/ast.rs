//! Resolved syntax tree for `.dslt` specifications.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Source position. Positions never participate in structural equality so
/// that `parse(print(s)) == s` holds.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specification {
    pub metamodels: Vec<Metamodel>,
    pub transformations: Vec<Transformation>,
    pub properties: Vec<PropertyDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metamodel {
    pub name: String,
    pub enums: Vec<EnumDecl>,
    pub classes: Vec<ClassDecl>,
    pub associations: Vec<AssociationDecl>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumDecl {
    pub name: String,
    pub literals: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub is_abstract: bool,
    pub parent: Option<String>,
    pub attributes: Vec<AttributeDecl>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDecl {
    pub name: String,
    pub domain: Domain,
}

/// Attribute value domain. Finite domains are required for proof use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    Bool,
    Int,
    IntRange(i64, i64),
    IntSet(Vec<i64>),
    String,
    StringSet(Vec<String>),
    Enum(String),
}

impl Domain {
    pub fn is_finite(&self) -> bool {
        !matches!(self, Domain::Int | Domain::String)
    }

    pub fn is_int(&self) -> bool {
        matches!(self, Domain::Int | Domain::IntRange(..) | Domain::IntSet(_))
    }

    pub fn is_string(&self) -> bool {
        matches!(self, Domain::String | Domain::StringSet(_))
    }

    /// Value used for unset attributes.
    pub fn default_value(&self, enums: &[EnumDecl]) -> Value {
        match self {
            Domain::Bool => Value::Bool(false),
            Domain::Int => Value::Int(0),
            Domain::IntRange(lo, _) => Value::Int(*lo),
            Domain::IntSet(v) => Value::Int(v.first().copied().unwrap_or(0)),
            Domain::String => Value::Str(String::new()),
            Domain::StringSet(v) => Value::Str(v.first().cloned().unwrap_or_default()),
            Domain::Enum(name) => Value::Str(
                enums
                    .iter()
                    .find(|e| &e.name == name)
                    .and_then(|e| e.literals.first().cloned())
                    .unwrap_or_default(),
            ),
        }
    }

    /// Whether `value` lies in this domain.
    pub fn contains(&self, value: &Value, enums: &[EnumDecl]) -> bool {
        match (self, value) {
            (Domain::Bool, Value::Bool(_)) => true,
            (Domain::Int, Value::Int(_)) => true,
            (Domain::IntRange(lo, hi), Value::Int(v)) => lo <= v && v <= hi,
            (Domain::IntSet(vs), Value::Int(v)) => vs.contains(v),
            (Domain::String, Value::Str(_)) => true,
            (Domain::StringSet(vs), Value::Str(s)) => vs.contains(s),
            (Domain::Enum(name), Value::Str(s)) => enums
                .iter()
                .find(|e| &e.name == name)
                .is_some_and(|e| e.literals.contains(s)),
            _ => false,
        }
    }

    /// All values of a finite domain, in canonical order.
    pub fn values(&self, enums: &[EnumDecl]) -> Option<Vec<Value>> {
        Some(match self {
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::IntRange(lo, hi) => (*lo..=*hi).map(Value::Int).collect(),
            Domain::IntSet(v) => v.iter().copied().map(Value::Int).collect(),
            Domain::StringSet(v) => v.iter().cloned().map(Value::Str).collect(),
            Domain::Enum(name) => enums
                .iter()
                .find(|e| &e.name == name)?
                .literals
                .iter()
                .cloned()
                .map(Value::Str)
                .collect(),
            Domain::Int | Domain::String => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationDecl {
    pub name: String,
    pub source: String,
    pub target: String,
    /// Multiplicity on the source end: how many sources each target links from.
    pub source_mult: Multiplicity,
    /// Multiplicity on the target end: how many targets each source links to.
    pub target_mult: Multiplicity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiplicity {
    pub lower: u32,
    pub upper: Option<u32>,
}

impl Multiplicity {
    pub const ANY: Multiplicity = Multiplicity {
        lower: 0,
        upper: None,
    };

    pub fn is_any(&self) -> bool {
        *self == Self::ANY
    }
}

impl Default for Multiplicity {
    fn default() -> Self {
        Self::ANY
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "[{}..{}]", self.lower, u),
            None => write!(f, "[{}..*]", self.lower),
        }
    }
}

/// Concrete attribute value as it appears in instance models. Enum literals
/// are carried as their literal name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Str(String),
    EnumLit { enum_name: String, literal: String },
}

impl Literal {
    pub fn to_value(&self) -> Value {
        match self {
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Int(i) => Value::Int(*i),
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::EnumLit { literal, .. } => Value::Str(literal.clone()),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Str(s) => write!(f, "{s:?}"),
            Literal::EnumLit { enum_name, literal } => write!(f, "{enum_name}.{literal}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub fn eval(self, lhs: &Value, rhs: &Value) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            _ => match (lhs, rhs) {
                (Value::Int(a), Value::Int(b)) => match self {
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                    _ => unreachable!(),
                },
                _ => false,
            },
        }
    }
}

/// `where <attr> <op> <literal>` clause on a pattern element.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guard {
    pub attr: String,
    pub op: CmpOp,
    pub value: Literal,
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.attr, self.op.symbol(), self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternElement {
    pub name: String,
    pub class: String,
    pub any: bool,
    pub guards: Vec<Guard>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternLink {
    pub name: String,
    pub assoc: String,
    pub from: String,
    pub to: String,
    pub direct: bool,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternGraph {
    pub elements: Vec<PatternElement>,
    pub links: Vec<PatternLink>,
}

impl PatternGraph {
    pub fn element(&self, name: &str) -> Option<&PatternElement> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindExpr {
    Literal(Literal),
    Copy { element: String, attr: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub attr: String,
    pub expr: BindExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyElement {
    pub name: String,
    pub class: String,
    pub bindings: Vec<Binding>,
    #[serde(skip)]
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyPattern {
    pub elements: Vec<ApplyElement>,
    pub links: Vec<PatternLink>,
}

/// `apply_element <--trace-- match_element`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackwardLink {
    pub apply: String,
    pub matched: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub name: String,
    pub matcher: PatternGraph,
    pub apply: ApplyPattern,
    pub backward: Vec<BackwardLink>,
    #[serde(skip)]
    pub span: Span,
}

impl Rule {
    /// Match arity: number of match elements.
    pub fn arity(&self) -> usize {
        self.matcher.elements.len()
    }

    pub fn is_backward_bound(&self, apply_element: &str) -> bool {
        self.backward.iter().any(|b| b.apply == apply_element)
    }

    /// Apply elements created fresh on each firing.
    pub fn fresh_elements(&self) -> impl Iterator<Item = &ApplyElement> {
        self.apply
            .elements
            .iter()
            .filter(|e| !self.is_backward_bound(&e.name))
    }

    pub fn apply_element(&self, name: &str) -> Option<&ApplyElement> {
        self.apply.elements.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub rules: Vec<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transformation {
    pub name: String,
    pub source: String,
    pub target: String,
    pub layers: Vec<Layer>,
    #[serde(skip)]
    pub span: Span,
}

impl Transformation {
    pub fn rule(&self, r: RuleRef) -> &Rule {
        &self.layers[r.layer].rules[r.rule]
    }

    pub fn rule_refs(&self) -> Vec<RuleRef> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(li, l)| (0..l.rules.len()).map(move |ri| RuleRef { layer: li, rule: ri }))
            .collect()
    }

    pub fn find_rule(&self, name: &str) -> Option<RuleRef> {
        self.rule_refs()
            .into_iter()
            .find(|r| self.rule(*r).name == name)
    }
}

/// Position of a rule inside a transformation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuleRef {
    pub layer: usize,
    pub rule: usize,
}

/// `post_element <--trace-- pre_element`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceConstraint {
    pub post: String,
    pub pre: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyDecl {
    pub name: String,
    pub doc: Option<String>,
    /// Transformation the property is stated against.
    pub transformation: String,
    /// Whether the `for` clause was written explicitly.
    pub explicit_transformation: bool,
    pub precondition: PatternGraph,
    pub postcondition: PatternGraph,
    pub traces: Vec<TraceConstraint>,
    #[serde(skip)]
    pub span: Span,
}

impl Specification {
    pub fn metamodel(&self, name: &str) -> Option<&Metamodel> {
        self.metamodels.iter().find(|m| m.name == name)
    }

    pub fn transformation(&self, name: &str) -> Option<&Transformation> {
        self.transformations.iter().find(|t| t.name == name)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyDecl> {
        self.properties.iter().find(|p| p.name == name)
    }

    /// Every enum declared anywhere in the file.
    pub fn all_enums(&self) -> Vec<EnumDecl> {
        self.metamodels
            .iter()
            .flat_map(|m| m.enums.iter().cloned())
            .collect()
    }
}

impl Metamodel {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn association(&self, name: &str) -> Option<&AssociationDecl> {
        self.associations.iter().find(|a| a.name == name)
    }
}
