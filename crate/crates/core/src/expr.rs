//! Tiny closed-form expression grammar for sequence generators.
//!
//! Supports what the config surface needs and nothing more: decimal numbers,
//! the index variable `i` (alias `j`), `+ - * / ^`, parentheses, and the
//! functions `log` (natural), `exp`, `sqrt`. Example: `log(i+1)/i^2`.

use crate::error::{Error, Result};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Log(Box<Node>),
    Exp(Box<Node>),
    Sqrt(Box<Node>),
}

impl Node {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var => x,
            Node::Add(a, b) => a.eval(x) + b.eval(x),
            Node::Sub(a, b) => a.eval(x) - b.eval(x),
            Node::Mul(a, b) => a.eval(x) * b.eval(x),
            Node::Div(a, b) => a.eval(x) / b.eval(x),
            Node::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Node::Neg(a) => -a.eval(x),
            Node::Log(a) => a.eval(x).ln(),
            Node::Exp(a) => a.eval(x).exp(),
            Node::Sqrt(a) => a.eval(x).sqrt(),
        }
    }
}

/// A parsed single-variable expression.
#[derive(Debug, Clone)]
pub struct SeqExpr {
    source: String,
    root: Node,
}

impl SeqExpr {
    pub fn parse(src: &str) -> Result<SeqExpr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, src };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "trailing input in expression `{src}` at token {}",
                p.pos
            )));
        }
        Ok(SeqExpr { source: src.to_string(), root })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.root.eval(x)
    }

    /// Evaluate at a 1-based natural index.
    pub fn eval_index(&self, i: u64) -> f64 {
        self.root.eval(i as f64)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Wrap into a shareable generator closure over natural indices.
    pub fn into_seq_fn(self) -> Arc<dyn Fn(u64) -> f64 + Send + Sync> {
        Arc::new(move |i| self.eval_index(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => { out.push(Tok::Plus); i += 1; }
            '-' => { out.push(Tok::Minus); i += 1; }
            '*' => { out.push(Tok::Star); i += 1; }
            '/' => { out.push(Tok::Slash); i += 1; }
            '^' => { out.push(Tok::Caret); i += 1; }
            '(' => { out.push(Tok::LParen); i += 1; }
            ')' => { out.push(Tok::RParen); i += 1; }
            '0'..='9' | '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{s}` in `{src}`")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            _ => return Err(Error::Config(format!("unexpected character `{c}` in `{src}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek().cloned() {
            match op {
                Tok::Plus => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        while let Some(op) = self.peek().cloned() {
            match op {
                Tok::Star => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    // right-associative power binds tighter than unary minus on its left
    fn factor(&mut self) -> Result<Node> {
        if let Some(Tok::Minus) = self.peek() {
            self.bump();
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.bump();
            let exp = self.factor()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::Ident(name)) => match name.as_str() {
                "i" | "j" => Ok(Node::Var),
                "log" | "ln" | "exp" | "sqrt" => {
                    match self.bump() {
                        Some(Tok::LParen) => {}
                        _ => {
                            return Err(Error::Config(format!(
                                "`{name}` needs parentheses in `{}`",
                                self.src
                            )))
                        }
                    }
                    let arg = self.expr()?;
                    match self.bump() {
                        Some(Tok::RParen) => {}
                        _ => {
                            return Err(Error::Config(format!(
                                "unclosed `{name}(` in `{}`",
                                self.src
                            )))
                        }
                    }
                    let arg = Box::new(arg);
                    Ok(match name.as_str() {
                        "log" | "ln" => Node::Log(arg),
                        "exp" => Node::Exp(arg),
                        _ => Node::Sqrt(arg),
                    })
                }
                other => Err(Error::Config(format!(
                    "unknown identifier `{other}` in `{}`",
                    self.src
                ))),
            },
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(Error::Config(format!("unbalanced parentheses in `{}`", self.src))),
                }
            }
            _ => Err(Error::Config(format!("unexpected end of expression `{}`", self.src))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> f64 {
        SeqExpr::parse(src).unwrap().eval(x)
    }

    #[test]
    fn paper_sequences() {
        assert!((ev("1/i^2", 3.0) - 1.0 / 9.0).abs() < 1e-15);
        assert!((ev("log(i+1)/i^2", 2.0) - 3f64.ln() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(ev("2+3*4", 0.0), 14.0);
        assert_eq!(ev("(2+3)*4", 0.0), 20.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("2^3^2", 0.0), 512.0); // right-assoc
    }

    #[test]
    fn functions() {
        assert!((ev("exp(1)", 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(ev("sqrt(i)", 9.0), 3.0);
        assert_eq!(ev("ln(exp(2))", 0.0), 2.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(SeqExpr::parse("1 +").is_err());
        assert!(SeqExpr::parse("foo(i)").is_err());
        assert!(SeqExpr::parse("(1").is_err());
        assert!(SeqExpr::parse("1 2").is_err());
        assert!(SeqExpr::parse("1..2").is_err());
    }
}
