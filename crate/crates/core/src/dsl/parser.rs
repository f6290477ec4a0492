use std::fmt;

use thiserror::Error;

use super::{BinOp, Func, Node};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownIdentifier(String),
    UnknownFunction(String),
    Arity {
        func: String,
        expected: String,
        found: usize,
    },
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(msg) => write!(f, "syntax error at position {}: {msg}", self.pos),
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(f, "unknown identifier `{name}` at position {}", self.pos)
            }
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function `{name}` at position {}", self.pos)
            }
            ParseErrorKind::Arity {
                func,
                expected,
                found,
            } => write!(
                f,
                "`{func}` at position {} takes {expected} argument(s), got {found}",
                self.pos
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn syntax(&self, pos: usize, msg: impl Into<String>) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax(msg.into()),
            pos,
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(start) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => self.number()?,
            b'a'..=b'z' => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
                {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                Tok::Ident(ident.to_owned())
            }
            _ => {
                let shown = String::from_utf8_lossy(&self.src[start..])
                    .chars()
                    .next()
                    .unwrap_or('?');
                return Err(self.syntax(start, format!("unexpected character `{shown}`")));
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(self.syntax(start, "malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; leave `e` for the identifier lexer
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let v: f64 = text
            .parse()
            .map_err(|_| self.syntax(start, format!("malformed number `{text}`")))?;
        if !v.is_finite() {
            return Err(self.syntax(start, format!("number `{text}` out of range")));
        }
        Ok(Tok::Num(v))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    pos: usize,
    vars: &'a [String],
}

pub(super) fn parse(text: &str, vars: &[String]) -> Result<Node, ParseError> {
    let mut lexer = Lexer {
        src: text.as_bytes(),
        pos: 0,
    };
    let (tok, pos) = lexer.next()?;
    if tok == Tok::End {
        return Err(lexer.syntax(pos, "empty expression"));
    }
    let mut p = Parser {
        lexer,
        tok,
        pos,
        vars,
    };
    let node = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.lexer.syntax(p.pos, "unexpected trailing input"));
    }
    Ok(node)
}

impl Parser<'_> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.pos = pos;
        Ok(())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == want {
            self.bump()
        } else {
            Err(self.lexer.syntax(self.pos, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.tok == Tok::Op('-') {
            self.bump()?;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::Op('^') {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let pos = self.pos;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump()?;
                if self.tok == Tok::LParen {
                    self.bump()?;
                    self.call(name, pos)
                } else if let Some(slot) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::Var(slot))
                } else {
                    Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        pos,
                    })
                }
            }
            other => {
                let what = match other {
                    Tok::End => "end of input".to_owned(),
                    Tok::RParen => "`)`".to_owned(),
                    Tok::Comma => "`,`".to_owned(),
                    Tok::Op(c) => format!("`{c}`"),
                    _ => unreachable!(),
                };
                self.tok = other;
                Err(self
                    .lexer
                    .syntax(pos, format!("expected an operand, found {what}")))
            }
        }
    }

    fn call(&mut self, name: String, pos: usize) -> Result<Node, ParseError> {
        let mut args = vec![self.expr()?];
        while self.tok == Tok::Comma {
            self.bump()?;
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;

        let arity = |expected: &str| ParseError {
            kind: ParseErrorKind::Arity {
                func: name.clone(),
                expected: expected.to_owned(),
                found: args.len(),
            },
            pos,
        };
        if name == "pow" {
            if args.len() != 2 {
                return Err(arity("2"));
            }
            let exp = args.pop().unwrap();
            let base = args.pop().unwrap();
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(ParseError {
                kind: ParseErrorKind::UnknownFunction(name),
                pos,
            });
        };
        if !func.is_variadic() && args.len() != 1 {
            return Err(arity("1"));
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::super::Expr;
    use super::*;

    fn err(text: &str, vars: &[&str]) -> ParseError {
        Expr::parse(text, vars).unwrap_err()
    }

    #[test]
    fn unknown_identifier_is_named() {
        let e = err("abs(x1 - w1)", &["x1"]);
        assert_eq!(e.kind, ParseErrorKind::UnknownIdentifier("w1".into()));
        assert_eq!(e.pos, 9);
        assert!(e.to_string().contains("w1"));
    }

    #[test]
    fn syntax_errors_carry_position() {
        assert_eq!(err("", &[]).pos, 0);
        assert_eq!(err("2 +", &[]).pos, 3);
        assert_eq!(err("(1 + 2", &[]).pos, 6);
        assert_eq!(err("1 2", &[]).pos, 2);
        assert_eq!(err("2 # 3", &[]).pos, 2);
        assert!(matches!(err("N", &["n"]).kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn function_checks() {
        assert!(matches!(
            err("foo(1)", &[]).kind,
            ParseErrorKind::UnknownFunction(_)
        ));
        assert!(matches!(err("pow(1)", &[]).kind, ParseErrorKind::Arity { .. }));
        assert!(matches!(err("abs(1, 2)", &[]).kind, ParseErrorKind::Arity { .. }));
        assert!(Expr::parse::<&str>("min(1)", &[]).is_ok());
    }

    #[test]
    fn numbers() {
        let v = |t: &str| Expr::parse::<&str>(t, &[]).unwrap().eval(&[]).unwrap();
        assert_eq!(v(".5"), 0.5);
        assert_eq!(v("2."), 2.0);
        assert_eq!(v("1e3"), 1000.0);
        assert_eq!(v("2.5E-1"), 0.25);
        assert!(Expr::parse::<&str>(".", &[]).is_err());
        assert!(Expr::parse::<&str>("1e999", &[]).is_err());
    }
}
