//! Expression language for metric coefficients and scalar fields: real
//! literals, `x1..xn`/`y1..yn`, `pi`, `+ − * / ^`, and `sin cos exp log`.

use std::fmt;

/// Parse or evaluation failure, located by byte offset into the source.
#[derive(Debug, Clone)]
pub struct ExprError {
    pub offset: usize,
    pub msg: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.offset, self.msg)
    }
}

impl std::error::Error for ExprError {}

fn err<T>(offset: usize, msg: impl Into<String>) -> Result<T, ExprError> {
    Err(ExprError {
        offset,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

/// AST; variables are grid-coordinate indices (`x_i → 2(i−1)`, `y_i → 2(i−1)+1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, usize, Box<Expr>, Box<Expr>),
    Call(Func, usize, Box<Expr>),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(u8),
    Eof,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Byte offset of the next token.
    fn peek_offset(&mut self) -> usize {
        self.skip_ws();
        self.pos
    }

    fn next(&mut self) -> Result<(usize, Token), ExprError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((start, Token::Eof));
        }
        let c = self.src[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
            {
                self.pos += 1;
            }
            if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
                let mut look = self.pos + 1;
                if look < self.src.len() && (self.src[look] == b'+' || self.src[look] == b'-') {
                    look += 1;
                }
                if look < self.src.len() && self.src[look].is_ascii_digit() {
                    self.pos = look;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return match text.parse::<f64>() {
                Ok(v) => Ok((start, Token::Num(v))),
                Err(_) => err(start, format!("malformed number `{text}`")),
            };
        }
        if c.is_ascii_alphabetic() {
            while self.pos < self.src.len()
                && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
            {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((start, Token::Ident(text.to_string())));
        }
        if b"+-*/^()".contains(&c) {
            self.pos += 1;
            return Ok((start, Token::Op(c)));
        }
        err(start, format!("unexpected character `{}`", c as char))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    /// Complex dimension; bounds the variable indices.
    n: usize,
    peeked: Option<(usize, Token)>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&(usize, Token), ExprError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().unwrap())
    }

    fn advance(&mut self) -> Result<(usize, Token), ExprError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn expect_op(&mut self, op: u8) -> Result<(), ExprError> {
        let (off, tok) = self.advance()?;
        if tok == Token::Op(op) {
            Ok(())
        } else {
            err(off, format!("expected `{}`", op as char))
        }
    }

    fn variable(&self, off: usize, name: &str) -> Result<Expr, ExprError> {
        let (axis, rest) = name.split_at(1);
        let idx: usize = match rest.parse() {
            Ok(i) if i >= 1 => i,
            _ => return err(off, format!("unknown identifier `{name}`")),
        };
        if idx > self.n {
            return err(off, format!("unknown variable {name} (n = {})", self.n));
        }
        let base = 2 * (idx - 1);
        Ok(Expr::Var(if axis == "x" { base } else { base + 1 }))
    }

    fn prefix(&mut self) -> Result<Expr, ExprError> {
        let (off, tok) = self.advance()?;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::Op(b'(') => {
                let e = self.expression(0)?;
                self.expect_op(b')')?;
                Ok(e)
            }
            // unary minus binds tighter than * / but looser than ^
            Token::Op(b'-') => Ok(Expr::Neg(Box::new(self.expression(5)?))),
            Token::Ident(name) => match name.as_str() {
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" | "log" => {
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        _ => Func::Log,
                    };
                    self.expect_op(b'(')?;
                    let arg = self.expression(0)?;
                    self.expect_op(b')')?;
                    Ok(Expr::Call(func, off, Box::new(arg)))
                }
                _ if name.starts_with('x') || name.starts_with('y') => self.variable(off, &name),
                _ => err(off, format!("unknown identifier `{name}`")),
            },
            Token::Op(c) => err(off, format!("unexpected `{}`", c as char)),
            Token::Eof => err(off, "unexpected end of input"),
        }
    }

    fn expression(&mut self, min_bp: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.prefix()?;
        loop {
            let &(off, ref tok) = self.peek()?;
            let (op, lbp, rbp) = match tok {
                Token::Op(b'+') => (BinOp::Add, 1, 2),
                Token::Op(b'-') => (BinOp::Sub, 1, 2),
                Token::Op(b'*') => (BinOp::Mul, 3, 4),
                Token::Op(b'/') => (BinOp::Div, 3, 4),
                Token::Op(b'^') => (BinOp::Pow, 8, 7), // right-associative
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.advance()?;
            let rhs = self.expression(rbp)?;
            lhs = Expr::Bin(op, off, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

/// Parse `src` against complex dimension `n` (variables `x1..xn`, `y1..yn`).
pub fn parse_expression(src: &str, n: usize) -> Result<Expr, ExprError> {
    let mut p = Parser {
        lexer: Lexer::new(src),
        n,
        peeked: None,
    };
    let e = p.expression(0)?;
    let off = p.lexer.peek_offset();
    match p.advance()?.1 {
        Token::Eof => Ok(e),
        _ => err(off, "trailing input"),
    }
}

impl Expr {
    /// Evaluate at one grid point, `coords = (x1, y1, …, xn, yn)`.
    pub fn eval(&self, coords: &[f64]) -> Result<f64, ExprError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(i) => Ok(coords[*i]),
            Expr::Neg(e) => Ok(-e.eval(coords)?),
            Expr::Bin(op, off, a, b) => {
                let (a, b) = (a.eval(coords)?, b.eval(coords)?);
                let v = match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return err(*off, "division by zero on the grid");
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                };
                if v.is_finite() {
                    Ok(v)
                } else {
                    err(*off, format!("non-finite value {a} op {b}"))
                }
            }
            Expr::Call(func, off, arg) => {
                let a = arg.eval(coords)?;
                match func {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => Ok(a.exp()),
                    Func::Log => {
                        if a <= 0.0 {
                            err(*off, format!("log of nonpositive value {a}"))
                        } else {
                            Ok(a.ln())
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval0(src: &str) -> f64 {
        parse_expression(src, 3).unwrap().eval(&[0.0; 6]).unwrap()
    }

    #[test]
    fn grammar_and_precedence() {
        assert_eq!(eval0("1 + 2*3"), 7.0);
        assert_eq!(eval0("2^3^2"), 512.0); // right-associative
        assert_eq!(eval0("-2^2"), -4.0); // ^ binds tighter than unary minus
        assert_eq!(eval0("(1+2)*3"), 9.0);
        assert_eq!(eval0("6/3/2"), 1.0); // left-associative
        assert_eq!(eval0("2*-3"), -6.0);
        assert!((eval0("cos(pi)") + 1.0).abs() < 1e-15);
        assert!((eval0("exp(0) + sin(0)") - 1.0).abs() < 1e-15);
        assert!((eval0("1e-2") - 0.01).abs() < 1e-18);
    }

    #[test]
    fn ast_shape() {
        let e = parse_expression("1 + 0.9*sin(x3)", 3).unwrap();
        match e {
            Expr::Bin(BinOp::Add, _, lhs, rhs) => {
                assert_eq!(*lhs, Expr::Num(1.0));
                match *rhs {
                    Expr::Bin(BinOp::Mul, _, a, b) => {
                        assert_eq!(*a, Expr::Num(0.9));
                        assert!(matches!(*b, Expr::Call(Func::Sin, _, ref v)
                            if **v == Expr::Var(4)));
                    }
                    other => panic!("unexpected rhs {other:?}"),
                }
            }
            other => panic!("unexpected ast {other:?}"),
        }
    }

    #[test]
    fn variables_map_to_coordinates() {
        let coords = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        for (src, want) in [("x1", 1.0), ("y1", 2.0), ("x2", 3.0), ("y3", 6.0)] {
            let v = parse_expression(src, 3).unwrap().eval(&coords).unwrap();
            assert_eq!(v, want, "{src}");
        }
    }

    #[test]
    fn located_errors() {
        let e = parse_expression("sin(x7)", 3).unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(e.msg.contains("unknown variable x7"), "{}", e.msg);

        let e = parse_expression("1 + * 2", 3).unwrap_err();
        assert_eq!(e.offset, 4);

        let e = parse_expression("sin 3", 3).unwrap_err();
        assert!(e.msg.contains("expected `(`"));

        let e = parse_expression("1 + bogus", 3).unwrap_err();
        assert!(e.msg.contains("unknown identifier"));

        let e = parse_expression("1 2", 3).unwrap_err();
        assert!(e.msg.contains("trailing input"));

        let e = parse_expression("1/(x1-x1)", 3)
            .unwrap()
            .eval(&[0.0; 6])
            .unwrap_err();
        assert!(e.msg.contains("division by zero"));

        let e = parse_expression("log(0)", 3)
            .unwrap()
            .eval(&[0.0; 6])
            .unwrap_err();
        assert!(e.msg.contains("nonpositive"));
    }
}
