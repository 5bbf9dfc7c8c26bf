use std::collections::BTreeMap;

use super::{Expr, Node};
use crate::error::ParseError;

/// Named numeric constants substituted at parse time.
pub type Bindings = BTreeMap<String, f64>;

/// Parse an expression in `x` with no named constants besides `e` and `pi`.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, &Bindings::new())
}

/// Parse an expression, substituting `bindings` for identifiers.
///
/// Grammar (see `docs/grammar.md`):
///
/// ```text
/// expr    := term (('+' | '-') term)*
/// term    := unary (('*' | '/') unary)*
/// unary   := ('-' | '+') unary | power
/// power   := primary ('^' unary)?
/// primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
/// ```
pub fn parse_with(text: &str, bindings: &Bindings) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        bindings,
        end: text.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(ParseError::Syntax {
            pos: t.pos,
            msg: format!("unexpected {}", t.kind.describe()),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Num(v) => format!("number {v}"),
            Kind::Ident(s) => format!("identifier `{s}`"),
            Kind::Op(c) => format!("`{c}`"),
            Kind::LParen => "`(`".into(),
            Kind::RParen => "`)`".into(),
            Kind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            out.push(Token {
                kind: Kind::Num(v),
                pos: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: Kind::Ident(text[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => Kind::Op(c),
            '(' => Kind::LParen,
            ')' => Kind::RParen,
            ',' => Kind::Comma,
            _ => {
                return Err(ParseError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    bindings: &'a Bindings,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: Kind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: Kind) -> Result<(), ParseError> {
        match self.bump() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(ParseError::Syntax {
                pos: t.pos,
                msg: format!("expected {}, found {}", kind.describe(), t.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                msg: format!("expected {}, found end of input", kind.describe()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                let rhs = self.term()?;
                lhs = Expr::from_node(Node::Add(lhs, rhs));
            } else if self.eat_op('-') {
                let rhs = self.term()?;
                lhs = Expr::from_node(Node::Sub(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                let rhs = self.unary()?;
                lhs = Expr::from_node(Node::Mul(lhs, rhs));
            } else if self.eat_op('/') {
                let rhs = self.unary()?;
                lhs = Expr::from_node(Node::Div(lhs, rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            let a = self.unary()?;
            return Ok(Expr::from_node(Node::Neg(a)));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat_op('^') {
            let exponent = self.unary()?;
            return Ok(Expr::from_node(Node::Pow(base, exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.here();
        let tok = self.bump().ok_or(ParseError::Syntax {
            pos,
            msg: "unexpected end of input".into(),
        })?;
        match tok.kind {
            Kind::Num(v) => Ok(Expr::constant(v)),
            Kind::LParen => {
                let e = self.expr()?;
                self.expect(Kind::RParen)?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: Kind::LParen,
                        ..
                    })
                ) {
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while matches!(
                        self.peek(),
                        Some(Token {
                            kind: Kind::Comma,
                            ..
                        })
                    ) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Kind::RParen)?;
                    call(&name, args, tok.pos)
                } else if name == "x" {
                    Ok(Expr::x())
                } else if let Some(v) = self.bindings.get(&name) {
                    Ok(Expr::constant(*v))
                } else if name == "pi" {
                    Ok(Expr::constant(std::f64::consts::PI))
                } else if name == "e" {
                    Ok(Expr::constant(std::f64::consts::E))
                } else {
                    Err(ParseError::UnknownIdentifier { pos: tok.pos, name })
                }
            }
            other => Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

fn call(name: &str, mut args: Vec<Expr>, pos: usize) -> Result<Expr, ParseError> {
    let arity = match name {
        "exp" | "log" | "abs" | "sgn" => 1,
        "min" | "max" | "pow" => 2,
        _ => {
            return Err(ParseError::UnknownIdentifier {
                pos,
                name: name.to_string(),
            })
        }
    };
    if args.len() != arity {
        return Err(ParseError::Syntax {
            pos,
            msg: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
        });
    }
    let b = if arity == 2 { args.pop() } else { None };
    let a = args.pop().expect("arity checked");
    let node = match (name, b) {
        ("exp", None) => Node::Exp(a),
        ("log", None) => Node::Log(a),
        ("abs", None) => Node::Abs(a),
        ("sgn", None) => Node::Sgn(a),
        ("min", Some(b)) => Node::Min(a, b),
        ("max", Some(b)) => Node::Max(a, b),
        ("pow", Some(b)) => Node::Pow(a, b),
        _ => unreachable!(),
    };
    Ok(Expr::from_node(node))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_preset_exponents() {
        let e = parse("2 - exp(-x^2)").unwrap();
        let expected = Expr::from_node(Node::Sub(
            Expr::constant(2.0),
            Expr::from_node(Node::Exp(Expr::from_node(Node::Neg(Expr::from_node(
                Node::Pow(Expr::x(), Expr::constant(2.0)),
            ))))),
        ));
        assert_eq!(e, expected);
        assert_eq!(parse("x").unwrap(), Expr::x());
        assert_eq!(parse("  x\t").unwrap(), Expr::x());
    }

    #[test]
    fn binds_named_constants() {
        let mut b = Bindings::new();
        b.insert("d".into(), 3.0);
        let e = parse_with("1 + d/(abs(x)+1)", &b).unwrap();
        assert_eq!(e.eval(0.0), Ok(4.0));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval(0.0), Ok(512.0));
        assert_eq!(parse("-2^2").unwrap().eval(0.0), Ok(-4.0));
        assert_eq!(parse("2^-1").unwrap().eval(0.0), Ok(0.5));
        assert_eq!(parse("8/4/2").unwrap().eval(0.0), Ok(1.0));
        assert_eq!(parse("1 - 2 - 3").unwrap().eval(0.0), Ok(-4.0));
        assert_eq!(parse("1.5e2 + 2E-1").unwrap().eval(0.0), Ok(150.2));
        assert_eq!(parse("pow(x, 2)").unwrap().eval(3.0), Ok(9.0));
    }

    #[test]
    fn reports_errors_with_position() {
        assert_eq!(
            parse("1 + y"),
            Err(ParseError::UnknownIdentifier {
                pos: 4,
                name: "y".into()
            })
        );
        assert!(matches!(
            parse("foo(x)"),
            Err(ParseError::UnknownIdentifier { pos: 0, .. })
        ));
        assert!(matches!(
            parse("(x + 1"),
            Err(ParseError::Syntax { pos: 6, .. })
        ));
        assert!(matches!(
            parse("x +"),
            Err(ParseError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            parse("x $ 2"),
            Err(ParseError::Syntax { pos: 2, .. })
        ));
        assert!(matches!(parse("min(x)"), Err(ParseError::Syntax { .. })));
        assert!(matches!(
            parse("x x"),
            Err(ParseError::Syntax { pos: 2, .. })
        ));
    }
}
