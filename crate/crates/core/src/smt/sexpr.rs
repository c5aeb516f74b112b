//! Minimal s-expression reader for solver responses.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

impl SExpr {
    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            SExpr::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(v) => Some(v),
            SExpr::Atom(_) => None,
        }
    }

    /// Integer or Boolean literal value, with `(- n)` for negatives.
    pub fn int_value(&self) -> Option<i64> {
        match self {
            SExpr::Atom(a) => match a.as_str() {
                "true" => Some(1),
                "false" => Some(0),
                s => s.parse().ok(),
            },
            SExpr::List(v) if v.len() == 2 && v[0].atom() == Some("-") => v[1].int_value().map(|x| -x),
            _ => None,
        }
    }
}

pub fn parse_all(text: &str) -> Result<Vec<SExpr>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut i);
        if i >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut i)?);
    }
}

fn skip_ws(c: &[char], i: &mut usize) {
    while *i < c.len() {
        if c[*i].is_whitespace() {
            *i += 1;
        } else if c[*i] == ';' {
            while *i < c.len() && c[*i] != '\n' {
                *i += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(c: &[char], i: &mut usize) -> Result<SExpr, String> {
    skip_ws(c, i);
    match c.get(*i) {
        None => Err("unexpected end of input".into()),
        Some('(') => {
            *i += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, i);
                match c.get(*i) {
                    None => return Err("unbalanced parenthesis".into()),
                    Some(')') => {
                        *i += 1;
                        return Ok(SExpr::List(items));
                    }
                    _ => items.push(parse_one(c, i)?),
                }
            }
        }
        Some(')') => Err(format!("unexpected `)` at offset {i}")),
        Some('"') => {
            let mut s = String::new();
            *i += 1;
            loop {
                match c.get(*i) {
                    None => return Err("unterminated string".into()),
                    Some('"') if c.get(*i + 1) == Some(&'"') => {
                        s.push('"');
                        *i += 2;
                    }
                    Some('"') => {
                        *i += 1;
                        return Ok(SExpr::Atom(s));
                    }
                    Some(&ch) => {
                        s.push(ch);
                        *i += 1;
                    }
                }
            }
        }
        Some('|') => {
            let start = *i + 1;
            *i += 1;
            while *i < c.len() && c[*i] != '|' {
                *i += 1;
            }
            if *i >= c.len() {
                return Err("unterminated quoted symbol".into());
            }
            let s: String = c[start..*i].iter().collect();
            *i += 1;
            Ok(SExpr::Atom(s))
        }
        Some(_) => {
            let start = *i;
            while *i < c.len() && !c[*i].is_whitespace() && c[*i] != '(' && c[*i] != ')' {
                *i += 1;
            }
            Ok(SExpr::Atom(c[start..*i].iter().collect()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_model() {
        let text = "sat\n(\n  (define-fun x () Int\n    (- 3))\n  (define-fun b () Bool\n    true)\n)\n";
        let v = parse_all(text).unwrap();
        assert_eq!(v[0], SExpr::Atom("sat".into()));
        let defs = v[1].list().unwrap();
        assert_eq!(defs[0].list().unwrap()[4].int_value(), Some(-3));
        assert_eq!(defs[1].list().unwrap()[4].int_value(), Some(1));
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(parse_all("(a (b)").is_err());
    }
}
