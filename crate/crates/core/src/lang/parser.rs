//! Recursive-descent parser for the `.dslt` surface syntax. Produces an
//! unresolved tree; name resolution happens in [`super::resolve`].

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseDiagnostic;

type PResult<T> = Result<T, ParseDiagnostic>;

pub fn parse_unresolved(text: &str) -> PResult<Specification> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    p.file()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseDiagnostic::error(self.span(), msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            let wanted = tok.describe();
            self.unexpected(&wanted)
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => self.unexpected("identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(if neg { -v } else { v })
            }
            _ => self.unexpected("integer"),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(s)
            }
            _ => self.unexpected("string literal"),
        }
    }

    fn file(&mut self) -> PResult<Specification> {
        let mut spec = Specification::default();
        if *self.peek() == Tok::Eof {
            return Err(ParseDiagnostic::error(self.span(), "no declarations"));
        }
        while *self.peek() != Tok::Eof {
            if self.is_kw("metamodel") {
                spec.metamodels.push(self.metamodel()?);
            } else if self.is_kw("transformation") {
                spec.transformations.push(self.transformation()?);
            } else if self.is_kw("property") {
                spec.properties.push(self.property()?);
            } else {
                return self.unexpected("`metamodel`, `transformation` or `property`");
            }
        }
        Ok(spec)
    }

    fn metamodel(&mut self) -> PResult<Metamodel> {
        let span = self.span();
        self.expect_kw("metamodel")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut mm = Metamodel {
            name,
            enums: vec![],
            classes: vec![],
            associations: vec![],
            span,
        };
        while !self.eat(&Tok::RBrace) {
            if self.is_kw("enum") {
                mm.enums.push(self.enum_decl()?);
            } else if self.is_kw("class") || self.is_kw("abstract") {
                mm.classes.push(self.class_decl()?);
            } else if self.is_kw("assoc") {
                mm.associations.push(self.assoc_decl()?);
            } else {
                return self.unexpected("`enum`, `class`, `abstract class`, `assoc` or `}`");
            }
        }
        Ok(mm)
    }

    fn enum_decl(&mut self) -> PResult<EnumDecl> {
        self.expect_kw("enum")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut literals = Vec::new();
        while !self.eat(&Tok::RBrace) {
            literals.push(self.ident()?);
            self.eat(&Tok::Comma);
        }
        Ok(EnumDecl { name, literals })
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        let span = self.span();
        let is_abstract = self.eat_kw("abstract");
        self.expect_kw("class")?;
        let name = self.ident()?;
        let parent = if self.eat_kw("extends") {
            Some(self.ident()?)
        } else {
            None
        };
        let mut attributes = Vec::new();
        if self.eat(&Tok::LBrace) {
            while !self.eat(&Tok::RBrace) {
                let attr = self.ident()?;
                self.expect(Tok::Colon)?;
                let domain = self.domain()?;
                attributes.push(AttributeDecl { name: attr, domain });
                self.eat(&Tok::Comma);
            }
        }
        Ok(ClassDecl {
            name,
            is_abstract,
            parent,
            attributes,
            span,
        })
    }

    fn domain(&mut self) -> PResult<Domain> {
        let ty = self.ident()?;
        Ok(match ty.as_str() {
            "Bool" => Domain::Bool,
            "Int" => {
                if self.eat(&Tok::LBracket) {
                    let lo = self.int()?;
                    self.expect(Tok::DotDot)?;
                    let hi = self.int()?;
                    self.expect(Tok::RBracket)?;
                    if lo > hi {
                        return self.err(format!("empty integer range [{lo}..{hi}]"));
                    }
                    Domain::IntRange(lo, hi)
                } else if self.eat(&Tok::LBrace) {
                    let mut vals = Vec::new();
                    while !self.eat(&Tok::RBrace) {
                        vals.push(self.int()?);
                        self.eat(&Tok::Comma);
                    }
                    if vals.is_empty() {
                        return self.err("empty integer set");
                    }
                    Domain::IntSet(vals)
                } else {
                    Domain::Int
                }
            }
            "String" => {
                if self.eat(&Tok::LBrace) {
                    let mut vals = Vec::new();
                    while !self.eat(&Tok::RBrace) {
                        vals.push(self.string()?);
                        self.eat(&Tok::Comma);
                    }
                    if vals.is_empty() {
                        return self.err("empty string vocabulary");
                    }
                    Domain::StringSet(vals)
                } else {
                    Domain::String
                }
            }
            _ => Domain::Enum(ty),
        })
    }

    fn multiplicity(&mut self) -> PResult<Multiplicity> {
        self.expect(Tok::LBracket)?;
        let m = if self.eat(&Tok::Star) {
            Multiplicity::ANY
        } else {
            let lower = self.int()?;
            if lower < 0 {
                return self.err("negative multiplicity");
            }
            let upper = if self.eat(&Tok::DotDot) {
                if self.eat(&Tok::Star) {
                    None
                } else {
                    Some(self.int()?)
                }
            } else {
                Some(lower)
            };
            if let Some(u) = upper {
                if u < lower {
                    return self.err(format!("multiplicity upper bound {u} below lower bound {lower}"));
                }
            }
            Multiplicity {
                lower: lower as u32,
                upper: upper.map(|u| u as u32),
            }
        };
        self.expect(Tok::RBracket)?;
        Ok(m)
    }

    fn assoc_decl(&mut self) -> PResult<AssociationDecl> {
        self.expect_kw("assoc")?;
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let source = self.ident()?;
        let source_mult = if *self.peek() == Tok::LBracket {
            self.multiplicity()?
        } else {
            Multiplicity::ANY
        };
        self.expect(Tok::Arrow)?;
        let target = self.ident()?;
        let target_mult = if *self.peek() == Tok::LBracket {
            self.multiplicity()?
        } else {
            Multiplicity::ANY
        };
        Ok(AssociationDecl {
            name,
            source,
            target,
            source_mult,
            target_mult,
        })
    }

    fn transformation(&mut self) -> PResult<Transformation> {
        let span = self.span();
        self.expect_kw("transformation")?;
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let source = self.ident()?;
        self.expect(Tok::Arrow)?;
        let target = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut layers = Vec::new();
        while !self.eat(&Tok::RBrace) {
            self.expect_kw("layer")?;
            let lname = self.ident()?;
            self.expect(Tok::LBrace)?;
            let mut rules = Vec::new();
            while !self.eat(&Tok::RBrace) {
                rules.push(self.rule()?);
            }
            layers.push(Layer { name: lname, rules });
        }
        Ok(Transformation {
            name,
            source,
            target,
            layers,
            span,
        })
    }

    fn rule(&mut self) -> PResult<Rule> {
        let span = self.span();
        self.expect_kw("rule")?;
        let name = self.ident()?;
        self.expect(Tok::LBrace)?;
        self.expect_kw("match")?;
        let (matcher, traces) = self.pattern(false)?;
        debug_assert!(traces.is_empty());
        let mut apply = ApplyPattern::default();
        let mut backward = Vec::new();
        if self.eat_kw("apply") {
            apply = self.apply_pattern()?;
        }
        if self.eat_kw("backward") {
            self.expect(Tok::LBrace)?;
            while !self.eat(&Tok::RBrace) {
                let a = self.ident()?;
                self.expect(Tok::Trace)?;
                let m = self.ident()?;
                backward.push(BackwardLink { apply: a, matched: m });
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(Rule {
            name,
            matcher,
            apply,
            backward,
            span,
        })
    }

    /// Pattern block used by `match`, `precondition` and `postcondition`.
    fn pattern(&mut self, allow_traces: bool) -> PResult<(PatternGraph, Vec<TraceConstraint>)> {
        self.expect(Tok::LBrace)?;
        let mut g = PatternGraph::default();
        let mut traces = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let span = self.span();
            let any = self.eat_kw("any");
            let link_kw = if any {
                None
            } else if self.is_kw("direct") && matches!(self.peek_at(1), Tok::Ident(_)) {
                self.next();
                Some(true)
            } else if self.is_kw("indirect") && matches!(self.peek_at(1), Tok::Ident(_)) {
                self.next();
                Some(false)
            } else {
                None
            };
            let first = self.ident()?;
            if link_kw.is_none() && !any && *self.peek() == Tok::Trace {
                if !allow_traces {
                    return self.err("trace constraints are only allowed in postconditions");
                }
                self.next();
                let pre = self.ident()?;
                traces.push(TraceConstraint { post: first, pre });
                continue;
            }
            self.expect(Tok::Colon)?;
            let second = self.ident()?;
            if *self.peek() == Tok::DashDash {
                if any {
                    return self.err("`any` applies to elements, not links");
                }
                self.next();
                let from = self.ident()?;
                self.expect(Tok::Dot)?;
                let to = self.ident()?;
                g.links.push(PatternLink {
                    name: first,
                    assoc: second,
                    from,
                    to,
                    direct: link_kw.unwrap_or(true),
                    span,
                });
            } else {
                if link_kw.is_some() {
                    return self.unexpected("`--` in link declaration");
                }
                let guards = self.guards()?;
                g.elements.push(PatternElement {
                    name: first,
                    class: second,
                    any,
                    guards,
                    span,
                });
            }
        }
        Ok((g, traces))
    }

    fn guards(&mut self) -> PResult<Vec<Guard>> {
        let mut guards = Vec::new();
        while self.eat_kw("where") {
            loop {
                let attr = self.ident()?;
                let op = match self.next() {
                    Tok::EqEq => CmpOp::Eq,
                    Tok::Ne => CmpOp::Ne,
                    Tok::Lt => CmpOp::Lt,
                    Tok::Le => CmpOp::Le,
                    Tok::Gt => CmpOp::Gt,
                    Tok::Ge => CmpOp::Ge,
                    other => {
                        self.pos -= 1;
                        return self.err(format!(
                            "expected comparison operator, found {}",
                            other.describe()
                        ));
                    }
                };
                let value = self.literal()?;
                guards.push(Guard { attr, op, value });
                if !self.eat_kw("and") {
                    break;
                }
            }
        }
        Ok(guards)
    }

    fn literal(&mut self) -> PResult<Literal> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(Literal::Str(s))
            }
            Tok::Int(_) | Tok::Minus => Ok(Literal::Int(self.int()?)),
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(Literal::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                Ok(Literal::Bool(false))
            }
            Tok::Ident(first) => {
                self.next();
                if self.eat(&Tok::Dot) {
                    let lit = self.ident()?;
                    Ok(Literal::EnumLit {
                        enum_name: first,
                        literal: lit,
                    })
                } else {
                    Ok(Literal::EnumLit {
                        enum_name: String::new(),
                        literal: first,
                    })
                }
            }
            _ => self.unexpected("literal"),
        }
    }

    fn apply_pattern(&mut self) -> PResult<ApplyPattern> {
        self.expect(Tok::LBrace)?;
        let mut ap = ApplyPattern::default();
        while !self.eat(&Tok::RBrace) {
            let span = self.span();
            let direct_kw = self.is_kw("direct") && matches!(self.peek_at(1), Tok::Ident(_));
            if direct_kw {
                self.next();
            }
            let first = self.ident()?;
            self.expect(Tok::Colon)?;
            let second = self.ident()?;
            if self.eat(&Tok::DashDash) {
                let from = self.ident()?;
                self.expect(Tok::Dot)?;
                let to = self.ident()?;
                ap.links.push(PatternLink {
                    name: first,
                    assoc: second,
                    from,
                    to,
                    direct: true,
                    span,
                });
                continue;
            }
            if direct_kw {
                return self.unexpected("`--` in link declaration");
            }
            let mut bindings = Vec::new();
            if self.eat(&Tok::LBrace) {
                while !self.eat(&Tok::RBrace) {
                    let attr = self.ident()?;
                    self.expect(Tok::Assign)?;
                    let expr = match (self.peek().clone(), self.peek_at(1).clone()) {
                        (Tok::Ident(e), Tok::Dot) if e != "true" && e != "false" => {
                            self.next();
                            self.next();
                            let a = self.ident()?;
                            BindExpr::Copy { element: e, attr: a }
                        }
                        _ => BindExpr::Literal(self.literal()?),
                    };
                    bindings.push(Binding { attr, expr });
                    self.eat(&Tok::Comma);
                }
            }
            ap.elements.push(ApplyElement {
                name: first,
                class: second,
                bindings,
                span,
            });
        }
        Ok(ap)
    }

    fn property(&mut self) -> PResult<PropertyDecl> {
        let span = self.span();
        self.expect_kw("property")?;
        let name = self.ident()?;
        let doc = match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Some(s)
            }
            _ => None,
        };
        let (transformation, explicit) = if self.eat_kw("for") {
            (self.ident()?, true)
        } else {
            (String::new(), false)
        };
        self.expect(Tok::LBrace)?;
        self.expect_kw("precondition")?;
        let (precondition, _) = self.pattern(false)?;
        self.expect_kw("postcondition")?;
        let (postcondition, traces) = self.pattern(true)?;
        self.expect(Tok::RBrace)?;
        Ok(PropertyDecl {
            name,
            doc,
            transformation,
            explicit_transformation: explicit,
            precondition,
            postcondition,
            traces,
            span,
        })
    }
}
