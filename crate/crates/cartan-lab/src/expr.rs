//! Expression frontend for the fundamental function K(x, p).
//!
//! The language is deliberately tiny: fixed-form identifiers `x1..xn` /
//! `p1..pn`, decimal literals, `+ - * / ^`, and the smooth primitives
//! `sqrt exp log sin cos pow`. Parsed trees are immutable and evaluate over
//! any [`Scalar`] field, so the same tree yields plain values and Taylor jets.
//!
//! Grammar:
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' factor)?
//! atom   := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use thiserror::Error;

use crate::scalar::{NumericError, Scalar};

/// Which coordinate family an identifier refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Base coordinates `x1..xn`.
    Base,
    /// Momenta `p1..pn`.
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Pow,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Pow => "pow",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "pow" => Func::Pow,
            _ => return None,
        })
    }
}

/// One node of a parsed expression. Coordinate indices are stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(f64),
    Coord(Family, usize),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// A parsed fundamental-function expression over `x1..xn`, `p1..pn`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Expr,
    dim: usize,
}

/// Evaluation environment: one scalar per coordinate.
#[derive(Debug, Clone)]
pub struct EvalEnv<S> {
    pub x: Vec<S>,
    pub p: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {detail}")]
    Syntax { offset: usize, detail: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("coordinate index out of range: `{name}` with n = {dim} (byte {offset})")]
    IndexOutOfRange { name: String, dim: usize, offset: usize },
    #[error("`{func}` takes {expected} argument(s), got {got} (byte {offset})")]
    Arity { func: String, expected: usize, got: usize, offset: usize },
}

impl ParseError {
    /// Byte offset the diagnostic points at (0-based).
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::IndexOutOfRange { offset, .. }
            | ParseError::Arity { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("environment has {got} coordinates, expression expects {expected}")]
    Dimension { expected: usize, got: usize },
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
    Comma,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push((Tok::Plus, i));
                i += 1;
            }
            b'-' => {
                out.push((Tok::Minus, i));
                i += 1;
            }
            b'*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            b'/' => {
                out.push((Tok::Slash, i));
                i += 1;
            }
            b'^' => {
                out.push((Tok::Caret, i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    if i >= bytes.len() || !bytes[i].is_ascii_digit() {
                        return Err(ParseError::Syntax {
                            offset: i.min(bytes.len()),
                            detail: "expected digits after decimal point".into(),
                        });
                    }
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    offset: start,
                    detail: format!("bad numeric literal `{text}`"),
                })?;
                out.push((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    detail: format!("unexpected byte `{}`", b as char),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: self.offset(),
                detail: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            // right-associative
            let exp = self.factor()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expr::Literal(*v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        return Err(ParseError::Arity {
                            func: name,
                            expected: func.arity(),
                            got: args.len(),
                            offset,
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                self.coordinate(&name, offset)
            }
            _ => Err(ParseError::Syntax {
                offset,
                detail: "expected a number, coordinate, function call or `(`".into(),
            }),
        }
    }

    fn coordinate(&self, name: &str, offset: usize) -> Result<Expr, ParseError> {
        let mut chars = name.chars();
        let family = match chars.next() {
            Some('x') => Family::Base,
            Some('p') => Family::Momentum,
            _ => {
                return Err(ParseError::UnknownIdentifier {
                    name: name.to_string(),
                    offset,
                })
            }
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseError::UnknownIdentifier {
                name: name.to_string(),
                offset,
            });
        }
        let index: usize = digits.parse().map_err(|_| ParseError::IndexOutOfRange {
            name: name.to_string(),
            dim: self.dim,
            offset,
        })?;
        if index < 1 || index > self.dim {
            return Err(ParseError::IndexOutOfRange {
                name: name.to_string(),
                dim: self.dim,
                offset,
            });
        }
        Ok(Expr::Coord(family, index - 1))
    }
}

/// Parse `source` as an expression over `x1..xn`, `p1..pn`.
pub fn parse(source: &str, n: usize) -> Result<ExprAst, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Syntax {
            offset: 0,
            detail: "empty expression".into(),
        });
    }
    let toks = lex(source)?;
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        end: source.len(),
        dim: n,
    };
    let root = parser.expr()?;
    if parser.pos != toks.len() {
        return Err(ParseError::Syntax {
            offset: parser.offset(),
            detail: "trailing input".into(),
        });
    }
    Ok(ExprAst { root, dim: n })
}

impl ExprAst {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    /// The square of this expression as a new tree (`K` is entered by the
    /// user, the geometry is driven by `K^2`).
    pub fn squared(&self) -> ExprAst {
        ExprAst {
            root: Expr::Binary(
                BinOp::Pow,
                Box::new(self.root.clone()),
                Box::new(Expr::Literal(2.0)),
            ),
            dim: self.dim,
        }
    }

    /// Evaluate over any scalar field. Pure: identical inputs give identical
    /// outputs, bit for bit.
    pub fn eval<S: Scalar>(&self, env: &EvalEnv<S>) -> Result<S, EvalError> {
        if env.x.len() != self.dim || env.p.len() != self.dim {
            return Err(EvalError::Dimension {
                expected: self.dim,
                got: env.x.len().min(env.p.len()),
            });
        }
        eval_node(&self.root, env)
    }

    /// Render the tree back to source form; the result reparses to a
    /// structurally identical tree.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        print_node(&self.root, 0, &mut s);
        s
    }
}

fn eval_node<S: Scalar>(node: &Expr, env: &EvalEnv<S>) -> Result<S, EvalError> {
    match node {
        Expr::Literal(v) => Ok(env.p[0].constant(*v)),
        Expr::Coord(Family::Base, i) => Ok(env.x[*i].clone()),
        Expr::Coord(Family::Momentum, i) => Ok(env.p[*i].clone()),
        Expr::Binary(op, a, b) => {
            let a = eval_node(a, env)?;
            let b = eval_node(b, env)?;
            Ok(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a.try_div(&b)?,
                BinOp::Pow => pow_scalar(&a, &b)?,
            })
        }
        Expr::Call(func, args) => {
            let a = eval_node(&args[0], env)?;
            Ok(match func {
                Func::Sqrt => a.try_sqrt()?,
                Func::Exp => a.exp(),
                Func::Log => a.try_ln()?,
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Pow => {
                    let b = eval_node(&args[1], env)?;
                    pow_scalar(&a, &b)?
                }
            })
        }
    }
}

fn pow_scalar<S: Scalar>(base: &S, exponent: &S) -> Result<S, NumericError> {
    match exponent.const_integer() {
        Some(k) => base.try_powi(k),
        None => base.try_powf(exponent.value()),
    }
}

fn precedence(node: &Expr) -> u8 {
    match node {
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 0,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 1,
        Expr::Binary(BinOp::Pow, ..) => 2,
        _ => 3,
    }
}

fn print_node(node: &Expr, min_prec: u8, out: &mut String) {
    let prec = precedence(node);
    let parens = prec < min_prec;
    if parens {
        out.push('(');
    }
    match node {
        Expr::Literal(v) => {
            out.push_str(&format!("{v}"));
        }
        Expr::Coord(Family::Base, i) => out.push_str(&format!("x{}", i + 1)),
        Expr::Coord(Family::Momentum, i) => out.push_str(&format!("p{}", i + 1)),
        Expr::Binary(op, a, b) => {
            let (sym, left, right) = match op {
                BinOp::Add => (" + ", 0, 1),
                BinOp::Sub => (" - ", 0, 1),
                BinOp::Mul => (" * ", 1, 2),
                BinOp::Div => (" / ", 1, 2),
                BinOp::Pow => ("^", 3, 2),
            };
            print_node(a, left, out);
            out.push_str(sym);
            print_node(b, right, out);
        }
        Expr::Call(func, args) => {
            out.push_str(func.name());
            out.push('(');
            for (k, arg) in args.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                print_node(arg, 0, out);
            }
            out.push(')');
        }
    }
    if parens {
        out.push(')');
    }
}

/// Outcome of a degree-homogeneity check in the momenta.
#[derive(Debug, Clone)]
pub struct HomogeneityReport {
    pub degree: i32,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check `K(x, λp) = λ^degree K(x, p)` at the given points for random
/// λ ∈ [0.5, 2].
pub fn check_homogeneity(
    ast: &ExprAst,
    degree: i32,
    samples: &[crate::cartan::CotangentPoint],
    tol: f64,
    rng: &mut impl rand::Rng,
) -> Result<HomogeneityReport, EvalError> {
    let mut max_residual = 0.0f64;
    for pt in samples {
        let lambda: f64 = rng.random_range(0.5..2.0);
        let env = EvalEnv {
            x: pt.x.clone(),
            p: pt.p.clone(),
        };
        let scaled = EvalEnv {
            x: pt.x.clone(),
            p: pt.p.iter().map(|v| v * lambda).collect(),
        };
        let base: f64 = ast.eval(&env)?;
        let lifted: f64 = ast.eval(&scaled)?;
        let residual = (lifted - lambda.powi(degree) * base).abs();
        max_residual = max_residual.max(residual);
    }
    Ok(HomogeneityReport {
        degree,
        max_residual,
        tolerance: tol,
        pass: max_residual <= tol,
    })
}
