//! Recursive-descent parser for component expressions.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary `-`, `^` (right
//! associative, constant exponent), then literals, `pi`, `x1`, `x2`,
//! function calls and parentheses.

use super::expr::{BinOp, Expr, UnaryOp};
use super::lexer::{Tok, Token};
use crate::error::{Error, Result};

pub struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    allow_vars: bool,
}

impl<'a> Parser<'a> {
    pub fn new(toks: &'a [Token], allow_vars: bool) -> Self {
        Self {
            toks,
            pos: 0,
            allow_vars,
        }
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_at(tok: &Token, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: tok.line,
            column: tok.column,
            message: message.into(),
        }
    }

    /// Parses one complete expression and requires the end of input.
    pub fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr()?;
        let t = self.peek();
        if t.tok != Tok::End {
            return Err(Self::error_at(t, format!("unexpected {}", describe(&t.tok))));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let at = self.peek().clone();
            let exponent = self.exponent()?;
            if !exponent.is_constant() {
                return Err(Self::error_at(&at, "exponent must be a constant literal"));
            }
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.exponent()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.bump();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Const(*v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(index) = variable_index(name) {
                    if !self.allow_vars {
                        return Err(Error::UnknownIdentifier {
                            name: name.clone(),
                            line: t.line,
                            column: t.column,
                        });
                    }
                    return Ok(Expr::Var(index));
                }
                match UnaryOp::function(name) {
                    Some(op) => {
                        let open = self.bump();
                        if open.tok != Tok::LParen {
                            return Err(Self::error_at(
                                &open,
                                format!("expected `(` after `{name}`"),
                            ));
                        }
                        let args = self.arguments()?;
                        if args.len() != 1 {
                            return Err(Error::Arity(format!(
                                "`{name}` takes 1 argument, got {} (line {}, column {})",
                                args.len(),
                                t.line,
                                t.column
                            )));
                        }
                        let arg = args.into_iter().next().unwrap();
                        Ok(Expr::Unary(op, Box::new(arg)))
                    }
                    None => Err(Error::UnknownIdentifier {
                        name: name.clone(),
                        line: t.line,
                        column: t.column,
                    }),
                }
            }
            other => Err(Self::error_at(&t, format!("unexpected {}", describe(other)))),
        }
    }

    fn arguments(&mut self) -> Result<Vec<Expr>> {
        let mut args = Vec::new();
        if self.peek().tok == Tok::RParen {
            self.bump();
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                _ => {
                    self.expect_rparen()?;
                    return Ok(args);
                }
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let t = self.bump();
        if t.tok != Tok::RParen {
            return Err(Self::error_at(
                &t,
                format!("expected `)`, found {}", describe(&t.tok)),
            ));
        }
        Ok(())
    }
}

fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x1" => Some(0),
        "x2" => Some(1),
        _ => None,
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::End => "end of line".to_string(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eq => "`=`".into(),
    }
}
