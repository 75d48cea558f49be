//! Text format for immersions of a rectangle into S^4.
//!
//! ```text
//! immersion clifford
//! domain x1 0 sqrt(2)*pi x2 0 sqrt(2)*pi margin 0.01
//! c1 = cos(sqrt(2)*x1)/sqrt(2)
//! c2 = sin(sqrt(2)*x1)/sqrt(2)
//! c3 = cos(sqrt(2)*x2)/sqrt(2)
//! c4 = sin(sqrt(2)*x2)/sqrt(2)
//! c5 = 0
//! flags minimal
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Domain bounds are
//! constant expressions.

mod expr;
mod lexer;
mod parser;

pub use expr::{BinOp, Expr, UnaryOp};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::immersion::{Domain, Flags, ImmersionSpec};

/// Parses a single expression in `x1`, `x2`.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = lexer::lex(src, 1, 1)?;
    parser::Parser::new(&toks, true).parse_all()
}

fn parse_at(src: &str, line: usize, column: usize, allow_vars: bool) -> Result<Expr> {
    let toks = lexer::lex(src, line, column)?;
    parser::Parser::new(&toks, allow_vars).parse_all()
}

/// Parses and validates an immersion definition.
pub fn parse_immersion(text: &str, tol: &Tolerances) -> Result<ImmersionSpec> {
    let spec = parse_unvalidated(text)?;
    spec.validate(16, tol)?;
    Ok(spec)
}

/// Parses without running the sphericality and rank checks.
pub fn parse_unvalidated(text: &str) -> Result<ImmersionSpec> {
    let mut name: Option<String> = None;
    let mut domain: Option<Domain> = None;
    let mut components: [Option<Expr>; 5] = Default::default();
    let mut flags = Flags::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_start();
        let indent = raw.len() - trimmed.len();
        let content = trimmed.trim_end();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let keyword = content.split_whitespace().next().unwrap();
        let rest_offset = indent + keyword.len();
        let rest = &raw[rest_offset..];
        let syntax = |column: usize, message: String| Error::Syntax {
            line,
            column,
            message,
        };

        match keyword {
            "immersion" => {
                let words: Vec<&str> = rest.split_whitespace().collect();
                if words.len() != 1 {
                    return Err(syntax(indent + 1, "expected `immersion <name>`".into()));
                }
                if name.is_some() {
                    return Err(syntax(indent + 1, "duplicate `immersion` header".into()));
                }
                name = Some(words[0].to_string());
            }
            "domain" => {
                if domain.is_some() {
                    return Err(syntax(indent + 1, "duplicate `domain` line".into()));
                }
                domain = Some(parse_domain(rest, line, rest_offset + 1)?);
            }
            "flags" => {
                for word in rest.split_whitespace() {
                    match word {
                        "minimal" => flags.claims_minimal = true,
                        "superminimal" => flags.claims_superminimal = true,
                        other => {
                            let col = raw.find(other).map_or(1, |p| p + 1);
                            return Err(syntax(col, format!("unknown flag `{other}`")));
                        }
                    }
                }
            }
            _ => {
                let Some(eq) = content.find('=') else {
                    return Err(syntax(
                        indent + 1,
                        format!("unrecognized line starting with `{keyword}`"),
                    ));
                };
                let lhs = content[..eq].trim();
                let index = lhs
                    .strip_prefix('c')
                    .and_then(|d| d.parse::<usize>().ok())
                    .ok_or_else(|| {
                        syntax(indent + 1, format!("expected `c<i> = <expression>`, got `{lhs}`"))
                    })?;
                if !(1..=5).contains(&index) {
                    return Err(Error::Validation(format!(
                        "component c{index} out of range (line {line}); immersions have five components"
                    )));
                }
                if components[index - 1].is_some() {
                    return Err(Error::Validation(format!(
                        "component c{index} defined twice (line {line})"
                    )));
                }
                let expr_start = indent + eq + 1;
                let expr = parse_at(&raw[expr_start..], line, expr_start + 1, true)?;
                components[index - 1] = Some(expr);
            }
        }
    }

    let name = name.ok_or_else(|| Error::Validation("missing `immersion <name>` header".into()))?;
    let domain = domain.ok_or_else(|| Error::Validation("missing `domain` line".into()))?;
    let count = components.iter().filter(|c| c.is_some()).count();
    if count != 5 {
        return Err(Error::Validation(format!(
            "expected 5 components c1..c5, found {count}"
        )));
    }
    let components = components.map(|c| c.unwrap());
    Ok(ImmersionSpec {
        name,
        domain,
        components,
        flags,
    })
}

fn parse_domain(rest: &str, line: usize, column0: usize) -> Result<Domain> {
    // split on the keywords x1, x2, margin while keeping expression text
    let labels = ["x1", "x2", "margin"];
    let mut positions = Vec::new();
    let mut search_from = 0;
    for label in labels {
        let found = find_word(rest, label, search_from).ok_or_else(|| Error::Syntax {
            line,
            column: column0,
            message: format!(
                "expected `domain x1 <min> <max> x2 <min> <max> margin <m>`, missing `{label}`"
            ),
        })?;
        positions.push(found);
        search_from = found + label.len();
    }
    let section = |k: usize| -> (&str, usize) {
        let start = positions[k] + labels[k].len();
        let end = positions.get(k + 1).copied().unwrap_or(rest.len());
        (&rest[start..end], column0 + start)
    };
    let constant = |src: &str, col: usize| -> Result<f64> {
        let e = parse_at(src, line, col, false)?;
        Ok(e.eval([0.0, 0.0]))
    };
    let pair = |src: &str, col: usize| -> Result<(f64, f64)> {
        let parts = split_top_level(src);
        if parts.len() != 2 {
            return Err(Error::Syntax {
                line,
                column: col,
                message: format!("expected two bounds, found {}", parts.len()),
            });
        }
        Ok((
            constant(parts[0].0, col + parts[0].1)?,
            constant(parts[1].0, col + parts[1].1)?,
        ))
    };
    let (s1, c1) = section(0);
    let (s2, c2) = section(1);
    let (s3, c3) = section(2);
    let x1 = pair(s1, c1)?;
    let x2 = pair(s2, c2)?;
    let margin = constant(s3, c3)?;
    let domain = Domain { x1, x2, margin };
    domain.check()?;
    Ok(domain)
}

fn find_word(s: &str, word: &str, from: usize) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut start = from;
    while let Some(off) = s[start..].find(word) {
        let p = start + off;
        let before = p == 0 || bytes[p - 1].is_ascii_whitespace();
        let after = p + word.len() >= s.len() || bytes[p + word.len()].is_ascii_whitespace();
        if before && after {
            return Some(p);
        }
        start = p + word.len();
    }
    None
}

/// Splits whitespace-separated expressions, ignoring whitespace inside
/// parentheses or next to binary operators. Returns (text, byte offset).
fn split_top_level(s: &str) -> Vec<(&str, usize)> {
    let bytes = s.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c.is_ascii_whitespace() && depth == 0 {
            if let Some(st) = start {
                // continue the token if the next non-space char is an operator
                // or the previous one was
                // a `-` followed by a space is binary, `-1` starts a new bound
                let prev = s[..i].trim_end().chars().last();
                let mut ahead = s[i..].trim_start().chars();
                let next = ahead.next();
                let binary_minus =
                    next == Some('-') && ahead.next().is_some_and(|c| c.is_whitespace());
                let joins = matches!(prev, Some('+' | '-' | '*' | '/' | '^'))
                    || matches!(next, Some('+' | '*' | '/' | '^'))
                    || binary_minus;
                if !joins {
                    parts.push((&s[st..i], st));
                    start = None;
                }
            }
        } else if start.is_none() {
            start = Some(i);
        }
        i += 1;
    }
    if let Some(st) = start {
        parts.push((s[st..].trim_end(), st));
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::gallery;
    use proptest::prelude::*;

    #[test]
    fn syntax_error_points_at_paren() {
        let err = parse_expr("sin(x1 +)").unwrap_err();
        assert_eq!(
            err,
            Error::Syntax {
                line: 1,
                column: 9,
                message: "unexpected `)`".into()
            }
        );
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_expr("x3 + 1"),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_expr("tan(x1)"),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse_expr("sin(x1, x2)"), Err(Error::Arity(_))));
        assert!(matches!(parse_expr("cos()"), Err(Error::Arity(_))));
    }

    #[test]
    fn precedence() {
        // ^ binds tighter than unary minus
        let e = parse_expr("-x1^2").unwrap();
        assert_eq!(e.eval([3.0, 0.0]), -9.0);
        let e = parse_expr("2^3^2").unwrap();
        assert_eq!(e.eval([0.0, 0.0]), 512.0);
        let e = parse_expr("1 - 2 * 3 / 4 + x2").unwrap();
        assert_eq!(e.eval([0.0, 1.0]), 0.5);
        let e = parse_expr("x1^-2").unwrap();
        assert_eq!(e.eval([2.0, 0.0]), 0.25);
        let e = parse_expr("x1^(1/3)").unwrap();
        assert!((e.eval([8.0, 0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_constant_exponent_rejected() {
        assert!(matches!(parse_expr("x1^x2"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn four_components_is_validation_error() {
        let text = "immersion four\n\
                    domain x1 0 1 x2 0 1 margin 0.01\n\
                    c1 = x1\nc2 = x2\nc3 = 0\nc4 = 1\n";
        assert!(matches!(parse_unvalidated(text), Err(Error::Validation(_))));
    }

    #[test]
    fn off_sphere_fails_validation() {
        let text = "immersion plane\n\
                    domain x1 0 1 x2 0 1 margin 0.01\n\
                    c1 = x1\nc2 = x2\nc3 = 0\nc4 = 0\nc5 = 1\n";
        let err = parse_immersion(text, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn syntax_error_in_file_has_file_position() {
        let text = "immersion bad\ndomain x1 0 1 x2 0 1 margin 0.01\n  c1 = sin(x1 +)\n";
        let err = parse_unvalidated(text).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 3, column: 16, .. }), "{err:?}");
    }

    #[test]
    fn domain_accepts_constant_expressions() {
        let spec = gallery("veronese").unwrap();
        assert!((spec.domain.x1.1 - (std::f64::consts::PI - 0.2)).abs() < 1e-15);
        assert!((spec.domain.x2.1 - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        let parts = split_top_level(" 0.2  pi - 0.2 ");
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].0, "pi - 0.2");
        let parts = split_top_level("0 -1");
        assert_eq!(parts.len(), 2);
    }

    #[test]
    fn gallery_sources_round_trip() {
        for name in crate::immersion::GALLERY {
            let spec = gallery(name).unwrap();
            let again = parse_unvalidated(&spec.to_source()).unwrap();
            assert_eq!(spec, again);
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(Expr::Const),
            Just(Expr::Pi),
            (0usize..2).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            let unary = prop_oneof![
                Just(UnaryOp::Neg),
                Just(UnaryOp::Sin),
                Just(UnaryOp::Cos),
                Just(UnaryOp::Sqrt),
                Just(UnaryOp::Log),
            ];
            let binary = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
            ];
            let exponent = prop_oneof![
                (0u32..5).prop_map(|n| Expr::Const(n as f64)),
                (1u32..4).prop_map(|n| Expr::Unary(UnaryOp::Neg, Box::new(Expr::Const(n as f64)))),
                (1u32..4, 2u32..5).prop_map(|(a, b)| Expr::Binary(
                    BinOp::Div,
                    Box::new(Expr::Const(a as f64)),
                    Box::new(Expr::Const(b as f64))
                )),
            ];
            prop_oneof![
                (unary, inner.clone()).prop_map(|(op, a)| Expr::Unary(op, Box::new(a))),
                (binary, inner.clone(), inner.clone())
                    .prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
                (inner, exponent).prop_map(|(a, p)| Expr::Pow(Box::new(a), Box::new(p))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
