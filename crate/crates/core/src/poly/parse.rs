//! Infix polynomial grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' integer)?
//! atom   := number | identifier | '(' expr ')'
//! ```
//!
//! Numbers are decimal literals with an optional exponent (`2.5`, `1e-3`).
//! Identifiers are resolved by the caller, which may map them to variables
//! or to constants.

use thiserror::Error;

use super::Polynomial;

const MAX_EXPONENT: u32 = 64;

/// Position is 1-based; `line` counts newlines within the parsed text.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
    /// Set when the failure is an identifier the resolver rejected.
    pub unknown: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn new(src: &str) -> Self {
        Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.pos)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while self.peek().is_some_and(char::is_whitespace) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push((Tok::End, line, col));
                return Ok(out);
            };
            if c.is_ascii_digit() || c == '.' {
                let mut s = String::new();
                while let Some(d) = self.peek() {
                    let exp_sign = (d == '+' || d == '-') && s.ends_with(['e', 'E']);
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        s.push(d);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let v: f64 = s.parse().map_err(|_| ParseError {
                    line,
                    col,
                    msg: format!("invalid number `{s}`"),
                    unknown: None,
                })?;
                out.push((Tok::Num(v), line, col));
            } else if c.is_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(d) = self.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        s.push(d);
                        self.bump();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), line, col));
            } else if "+-*^()".contains(c) {
                self.bump();
                out.push((Tok::Op(c), line, col));
            } else {
                return Err(ParseError { line, col, msg: format!("unexpected character `{c}`"), unknown: None });
            }
        }
    }
}

struct Parser<'r> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    resolve: &'r dyn Fn(&str) -> Option<Polynomial>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (_, line, col) = self.toks[self.pos];
        ParseError { line, col, msg: msg.into(), unknown: None }
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.next();
                    acc = acc + self.term()?;
                }
                Tok::Op('-') => {
                    self.next();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::Op('*') {
            self.next();
            acc = acc * self.unary()?;
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.next();
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.next();
        match self.peek().clone() {
            Tok::Num(v) if v.fract() == 0.0 && (0.0..=MAX_EXPONENT as f64).contains(&v) => {
                self.next();
                Ok(base.pow(v as u32))
            }
            _ => Err(self.error(format!("exponent must be an integer in 0..={MAX_EXPONENT}"))),
        }
    }

    fn atom(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.next();
                Ok(Polynomial::constant(v))
            }
            Tok::Ident(name) => {
                let Some(p) = (self.resolve)(&name) else {
                    let mut e = self.error(format!("unknown variable `{name}`"));
                    e.unknown = Some(name);
                    return Err(e);
                };
                self.next();
                Ok(p)
            }
            Tok::Op('(') => {
                self.next();
                let inner = self.expr()?;
                if *self.peek() != Tok::Op(')') {
                    return Err(self.error("expected `)`"));
                }
                self.next();
                Ok(inner)
            }
            Tok::End => Err(self.error("unexpected end of expression")),
            Tok::Op(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }
}

/// Parses `src`, mapping each identifier through `resolve`.
pub fn parse_with(src: &str, resolve: &dyn Fn(&str) -> Option<Polynomial>) -> Result<Polynomial, ParseError> {
    let toks = Lexer::new(src).tokenize()?;
    let mut p = Parser { toks, pos: 0, resolve };
    let out = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Var;

    fn parse(s: &str) -> Result<Polynomial, ParseError> {
        s.parse()
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(parse("-x^2").unwrap(), parse("0 - x*x").unwrap());
        assert_eq!(parse("2*x + 3*x").unwrap(), parse("5*x").unwrap());
        assert_eq!(parse("-(1 - x)").unwrap(), parse("x - 1").unwrap());
        assert_eq!(parse("1.5e1").unwrap(), Polynomial::constant(15.0));
        assert_eq!(parse("x^0").unwrap(), Polynomial::constant(1.0));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("x +\n  * y").unwrap_err();
        assert_eq!((e.line, e.col), (2, 3));
        assert!(parse("x^-1").is_err());
        assert!(parse("x^1.5").is_err());
        assert!(parse("x / 2").is_err());
        assert!(parse("(x + 1").is_err());
        assert!(parse("x y").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn resolver_controls_identifiers() {
        let x = Var::new("x");
        let resolve = |n: &str| match n {
            "x" => Some(Polynomial::var(x)),
            "sigma" => Some(Polynomial::constant(0.5)),
            _ => None,
        };
        assert_eq!(parse_with("sigma*x", &resolve).unwrap(), parse("0.5*x").unwrap());
        let e = parse_with("x + z", &resolve).unwrap_err();
        assert_eq!((e.line, e.col), (1, 5));
        assert_eq!(e.unknown.as_deref(), Some("z"));
    }
}
