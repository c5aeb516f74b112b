use std::fmt::Write;

use super::ast::*;

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn literal(l: &Literal) -> String {
    match l {
        Literal::Str(s) => quote(s),
        Literal::EnumLit { enum_name, literal } if enum_name.is_empty() => literal.clone(),
        other => other.to_string(),
    }
}

fn domain(d: &Domain) -> String {
    let join = |v: Vec<String>| v.join(", ");
    match d {
        Domain::Bool => "Bool".into(),
        Domain::Int => "Int".into(),
        Domain::IntRange(lo, hi) => format!("Int[{lo}..{hi}]"),
        Domain::IntSet(v) => format!("Int{{{}}}", join(v.iter().map(|i| i.to_string()).collect())),
        Domain::String => "String".into(),
        Domain::StringSet(v) => format!("String{{{}}}", join(v.iter().map(|s| quote(s)).collect())),
        Domain::Enum(e) => e.clone(),
    }
}

fn pattern(out: &mut String, g: &PatternGraph, traces: &[TraceConstraint], indent: &str) {
    for e in &g.elements {
        let _ = write!(out, "{indent}{}{} : {}", if e.any { "any " } else { "" }, e.name, e.class);
        if !e.guards.is_empty() {
            let gs: Vec<String> = e
                .guards
                .iter()
                .map(|g| format!("{} {} {}", g.attr, g.op.symbol(), literal(&g.value)))
                .collect();
            let _ = write!(out, " where {}", gs.join(" and "));
        }
        out.push('\n');
    }
    for t in traces {
        let _ = writeln!(out, "{indent}{} <--trace-- {}", t.post, t.pre);
    }
    for l in &g.links {
        let kw = if l.direct { "direct" } else { "indirect" };
        let _ = writeln!(out, "{indent}{kw} {} : {} -- {}.{}", l.name, l.assoc, l.from, l.to);
    }
}

/// Canonical concrete syntax for a resolved specification.
pub fn print_spec(spec: &Specification) -> String {
    let mut out = String::new();
    for mm in &spec.metamodels {
        if mm.enums.is_empty() && mm.classes.is_empty() && mm.associations.is_empty() {
            let _ = writeln!(out, "metamodel {} {{ }}\n", mm.name);
            continue;
        }
        let _ = writeln!(out, "metamodel {} {{", mm.name);
        for e in &mm.enums {
            let _ = writeln!(out, "    enum {} {{ {} }}", e.name, e.literals.join(", "));
        }
        for c in &mm.classes {
            let _ = write!(
                out,
                "    {}class {}",
                if c.is_abstract { "abstract " } else { "" },
                c.name
            );
            if let Some(p) = &c.parent {
                let _ = write!(out, " extends {p}");
            }
            if c.attributes.is_empty() {
                out.push_str(" { }\n");
            } else {
                out.push_str(" {\n");
                for a in &c.attributes {
                    let _ = writeln!(out, "        {}: {}", a.name, domain(&a.domain));
                }
                out.push_str("    }\n");
            }
        }
        for a in &mm.associations {
            let _ = write!(out, "    assoc {} : {}", a.name, a.source);
            if !a.source_mult.is_any() {
                let _ = write!(out, " {}", a.source_mult);
            }
            let _ = write!(out, " -> {}", a.target);
            if !a.target_mult.is_any() {
                let _ = write!(out, " {}", a.target_mult);
            }
            out.push('\n');
        }
        out.push_str("}\n\n");
    }
    for t in &spec.transformations {
        let _ = writeln!(out, "transformation {} : {} -> {} {{", t.name, t.source, t.target);
        for layer in &t.layers {
            let _ = writeln!(out, "    layer {} {{", layer.name);
            for r in &layer.rules {
                let _ = writeln!(out, "        rule {} {{", r.name);
                out.push_str("            match {\n");
                pattern(&mut out, &r.matcher, &[], "                ");
                out.push_str("            }\n            apply {\n");
                for e in &r.apply.elements {
                    let _ = write!(out, "                {} : {}", e.name, e.class);
                    if !e.bindings.is_empty() {
                        let bs: Vec<String> = e
                            .bindings
                            .iter()
                            .map(|b| match &b.expr {
                                BindExpr::Literal(l) => format!("{} = {}", b.attr, literal(l)),
                                BindExpr::Copy { element, attr } => {
                                    format!("{} = {element}.{attr}", b.attr)
                                }
                            })
                            .collect();
                        let _ = write!(out, " {{ {} }}", bs.join(", "));
                    }
                    out.push('\n');
                }
                for l in &r.apply.links {
                    let _ = writeln!(out, "                {} : {} -- {}.{}", l.name, l.assoc, l.from, l.to);
                }
                out.push_str("            }\n");
                if !r.backward.is_empty() {
                    out.push_str("            backward {\n");
                    for b in &r.backward {
                        let _ = writeln!(out, "                {} <--trace-- {}", b.apply, b.matched);
                    }
                    out.push_str("            }\n");
                }
                out.push_str("        }\n");
            }
            out.push_str("    }\n");
        }
        out.push_str("}\n\n");
    }
    for p in &spec.properties {
        let _ = write!(out, "property {}", p.name);
        if let Some(d) = &p.doc {
            let _ = write!(out, "\n  {}", quote(d));
        }
        if p.explicit_transformation {
            let _ = write!(out, " for {}", p.transformation);
        }
        out.push_str("\n{\n    precondition {\n");
        pattern(&mut out, &p.precondition, &[], "        ");
        out.push_str("    }\n    postcondition {\n");
        pattern(&mut out, &p.postcondition, &p.traces, "        ");
        out.push_str("    }\n}\n\n");
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}
