//! Expression DSL for chart fields.
//!
//! Grammar, loosest to tightest binding: `+ -` < `* /` < unary `-` < `^`
//! (right associative). Functions use call syntax `f(expr)`. Variables are
//! `x1..xn`; numeric literals are decimal with an optional exponent.

use crate::jet::Ring;
use crate::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    /// 0-based variable index.
    Var(usize),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    Neg(Box<ExprAst>),
    /// Exponent restricted to a constant (integer or rational-valued).
    Pow(Box<ExprAst>, f64),
    Call(Func, Box<ExprAst>),
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

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    toks: Vec<(Tok, usize)>,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut lx = Lexer { src: text.as_bytes(), pos: 0, toks: Vec::new() };
    while lx.pos < lx.src.len() {
        let c = lx.src[lx.pos] as char;
        let col = lx.pos + 1;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                lx.pos += 1;
            }
            '+' => lx.push(Tok::Plus, col),
            '-' => lx.push(Tok::Minus, col),
            '*' => lx.push(Tok::Star, col),
            '/' => lx.push(Tok::Slash, col),
            '^' => lx.push(Tok::Caret, col),
            '(' => lx.push(Tok::LParen, col),
            ')' => lx.push(Tok::RParen, col),
            '0'..='9' | '.' => {
                let start = lx.pos;
                while lx.pos < lx.src.len() {
                    let d = lx.src[lx.pos] as char;
                    if d.is_ascii_digit() || d == '.' {
                        lx.pos += 1;
                    } else if (d == 'e' || d == 'E')
                        && lx.pos + 1 < lx.src.len()
                        && {
                            let nx = lx.src[lx.pos + 1] as char;
                            nx.is_ascii_digit() || nx == '+' || nx == '-'
                        }
                    {
                        lx.pos += 2;
                    } else {
                        break;
                    }
                }
                let s = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap();
                let v: f64 = s.parse().map_err(|_| Error::Parse {
                    col,
                    msg: format!("invalid number `{s}`"),
                })?;
                lx.toks.push((Tok::Num(v), col));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = lx.pos;
                while lx.pos < lx.src.len() {
                    let d = lx.src[lx.pos] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        lx.pos += 1;
                    } else {
                        break;
                    }
                }
                let s = std::str::from_utf8(&lx.src[start..lx.pos]).unwrap().to_string();
                lx.toks.push((Tok::Ident(s), col));
            }
            _ => {
                return Err(Error::Parse { col, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    Ok(lx.toks)
}

impl Lexer<'_> {
    fn push(&mut self, t: Tok, col: usize) {
        self.toks.push((t, col));
        self.pos += 1;
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
    end_col: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|(_, c)| *c).unwrap_or(self.end_col)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        let col = self.col();
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Parse {
                col,
                msg: format!("expected {t:?}, found {got:?}"),
            }),
        }
    }

    fn add_expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.mul_expr()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    lhs = ExprAst::Add(Box::new(lhs), Box::new(self.mul_expr()?));
                }
                Some(Tok::Minus) => {
                    self.next();
                    lhs = ExprAst::Sub(Box::new(lhs), Box::new(self.mul_expr()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn mul_expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.unary_expr()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    lhs = ExprAst::Mul(Box::new(lhs), Box::new(self.unary_expr()?));
                }
                Some(Tok::Slash) => {
                    self.next();
                    lhs = ExprAst::Div(Box::new(lhs), Box::new(self.unary_expr()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary_expr(&mut self) -> Result<ExprAst> {
        if let Some(Tok::Minus) = self.peek() {
            self.next();
            return Ok(ExprAst::Neg(Box::new(self.unary_expr()?)));
        }
        self.pow_expr()
    }

    fn pow_expr(&mut self) -> Result<ExprAst> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.next();
            let col = self.col();
            // right-associative, binds tighter than unary minus on the left
            let exp = self.pow_operand()?;
            let e = const_fold(&exp).ok_or(Error::Parse {
                col,
                msg: "exponent must be a constant expression".into(),
            })?;
            return Ok(ExprAst::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    /// An exponent: an atom, possibly negated, possibly itself a power.
    fn pow_operand(&mut self) -> Result<ExprAst> {
        if let Some(Tok::Minus) = self.peek() {
            self.next();
            return Ok(ExprAst::Neg(Box::new(self.pow_operand()?)));
        }
        self.pow_expr()
    }

    fn atom(&mut self) -> Result<ExprAst> {
        let col = self.col();
        match self.next() {
            Some(Tok::Num(v)) => Ok(ExprAst::Const(v)),
            Some(Tok::Ident(name)) => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx == 0 || idx > self.dim {
                            return Err(Error::Parse {
                                col,
                                msg: format!(
                                    "variable `{name}` out of range for dimension {}",
                                    self.dim
                                ),
                            });
                        }
                        return Ok(ExprAst::Var(idx - 1));
                    }
                }
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen).map_err(|_| Error::Parse {
                        col,
                        msg: format!("function `{name}` takes one parenthesized argument"),
                    })?;
                    let arg = self.add_expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(ExprAst::Call(f, Box::new(arg)));
                }
                if name == "pi" {
                    return Ok(ExprAst::Const(std::f64::consts::PI));
                }
                Err(Error::Parse { col, msg: format!("unknown identifier `{name}`") })
            }
            Some(Tok::LParen) => {
                let e = self.add_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            t => Err(Error::Parse { col, msg: format!("expected expression, found {t:?}") }),
        }
    }
}

fn const_fold(e: &ExprAst) -> Option<f64> {
    match e {
        ExprAst::Const(v) => Some(*v),
        ExprAst::Neg(a) => const_fold(a).map(|v| -v),
        ExprAst::Add(a, b) => Some(const_fold(a)? + const_fold(b)?),
        ExprAst::Sub(a, b) => Some(const_fold(a)? - const_fold(b)?),
        ExprAst::Mul(a, b) => Some(const_fold(a)? * const_fold(b)?),
        ExprAst::Div(a, b) => Some(const_fold(a)? / const_fold(b)?),
        ExprAst::Pow(a, p) => Some(const_fold(a)?.powf(*p)),
        _ => None,
    }
}

/// Parses an expression in variables `x1..x{dim}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<ExprAst> {
    let toks = lex(text)?;
    let end_col = text.len() + 1;
    let mut p = Parser { toks, pos: 0, dim, end_col };
    let e = p.add_expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse {
            col: p.col(),
            msg: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

impl ExprAst {
    /// Evaluates over any scalar ring (values or jets), checking domains.
    pub fn eval<S: Ring>(&self, vars: &[S]) -> Result<S> {
        match self {
            ExprAst::Const(v) => Ok(vars[0].lift(*v)),
            ExprAst::Var(i) => Ok(vars[*i].clone()),
            ExprAst::Add(a, b) => Ok(a.eval(vars)?.add(&b.eval(vars)?)),
            ExprAst::Sub(a, b) => Ok(a.eval(vars)?.sub(&b.eval(vars)?)),
            ExprAst::Mul(a, b) => Ok(a.eval(vars)?.mul(&b.eval(vars)?)),
            ExprAst::Div(a, b) => {
                let d = b.eval(vars)?;
                if d.re().abs() < 1e-300 {
                    return Err(Error::Domain("division by zero".into()));
                }
                Ok(a.eval(vars)?.div(&d))
            }
            ExprAst::Neg(a) => Ok(a.eval(vars)?.neg()),
            ExprAst::Pow(a, p) => {
                let base = a.eval(vars)?;
                let k = p.round();
                if (p - k).abs() < 1e-9 && k.abs() < 64.0 {
                    Ok(base.powi(k as i32))
                } else {
                    if base.re() <= 0.0 {
                        return Err(Error::Domain(format!(
                            "non-integer power of non-positive base {}",
                            base.re()
                        )));
                    }
                    Ok(base.powf(*p))
                }
            }
            ExprAst::Call(f, a) => {
                let arg = a.eval(vars)?;
                match f {
                    Func::Exp => Ok(arg.exp()),
                    Func::Log => {
                        if arg.re() <= 0.0 {
                            return Err(Error::Domain(format!("log of {}", arg.re())));
                        }
                        Ok(arg.ln())
                    }
                    Func::Sin => Ok(arg.sin()),
                    Func::Cos => Ok(arg.cos()),
                    Func::Sinh => Ok(arg.sinh()),
                    Func::Cosh => Ok(arg.cosh()),
                    Func::Tanh => Ok(arg.tanh()),
                    Func::Sqrt => {
                        if arg.re() < 0.0 {
                            return Err(Error::Domain(format!("sqrt of {}", arg.re())));
                        }
                        Ok(arg.sqrt())
                    }
                }
            }
        }
    }
}

/// Symbolic combinators with light constant folding; used when emitting
/// transformed documents back into the DSL.
impl ExprAst {
    pub fn constant(v: f64) -> ExprAst {
        ExprAst::Const(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExprAst::Const(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, ExprAst::Const(v) if *v == 1.0)
    }

    pub fn add_expr(a: ExprAst, b: ExprAst) -> ExprAst {
        match (&a, &b) {
            (ExprAst::Const(x), ExprAst::Const(y)) => ExprAst::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => ExprAst::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub_expr(a: ExprAst, b: ExprAst) -> ExprAst {
        match (&a, &b) {
            (ExprAst::Const(x), ExprAst::Const(y)) => ExprAst::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => ExprAst::Neg(Box::new(b)),
            _ => ExprAst::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul_expr(a: ExprAst, b: ExprAst) -> ExprAst {
        match (&a, &b) {
            (ExprAst::Const(x), ExprAst::Const(y)) => ExprAst::Const(x * y),
            _ if a.is_zero() || b.is_zero() => ExprAst::Const(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => ExprAst::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div_expr(a: ExprAst, b: ExprAst) -> ExprAst {
        if a.is_zero() {
            return ExprAst::Const(0.0);
        }
        if b.is_one() {
            return a;
        }
        ExprAst::Div(Box::new(a), Box::new(b))
    }

    pub fn neg_expr(a: ExprAst) -> ExprAst {
        match a {
            ExprAst::Const(v) => ExprAst::Const(-v),
            ExprAst::Neg(inner) => *inner,
            _ => ExprAst::Neg(Box::new(a)),
        }
    }
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // precedence levels: 0 add, 1 mul, 2 unary, 3 pow/atom
        fn go(e: &ExprAst, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let mine = match e {
                ExprAst::Add(..) | ExprAst::Sub(..) => 0,
                ExprAst::Mul(..) | ExprAst::Div(..) => 1,
                ExprAst::Neg(..) => 2,
                _ => 3,
            };
            let paren = mine < prec;
            if paren {
                write!(f, "(")?;
            }
            match e {
                ExprAst::Const(v) => {
                    if *v == v.trunc() && v.abs() < 1e15 {
                        write!(f, "{v}")?;
                    } else {
                        write!(f, "{v:e}")?;
                    }
                }
                ExprAst::Var(i) => write!(f, "x{}", i + 1)?,
                ExprAst::Add(a, b) => {
                    go(a, 0, f)?;
                    write!(f, " + ")?;
                    go(b, 1, f)?;
                }
                ExprAst::Sub(a, b) => {
                    go(a, 0, f)?;
                    write!(f, " - ")?;
                    go(b, 1, f)?;
                }
                ExprAst::Mul(a, b) => {
                    go(a, 1, f)?;
                    write!(f, "*")?;
                    go(b, 2, f)?;
                }
                ExprAst::Div(a, b) => {
                    go(a, 1, f)?;
                    write!(f, "/")?;
                    go(b, 2, f)?;
                }
                ExprAst::Neg(a) => {
                    write!(f, "-")?;
                    go(a, 2, f)?;
                }
                ExprAst::Pow(a, p) => {
                    go(a, 3, f)?;
                    if *p >= 0.0 && *p == p.trunc() {
                        write!(f, "^{p}")?;
                    } else {
                        write!(f, "^({p})")?;
                    }
                }
                ExprAst::Call(func, a) => {
                    write!(f, "{}(", func.name())?;
                    go(a, 0, f)?;
                    write!(f, ")")?;
                }
            }
            if paren {
                write!(f, ")")?;
            }
            Ok(())
        }
        go(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;
    use approx::assert_relative_eq;

    #[test]
    fn grammar_cases() {
        let e = parse_expr("sinh(x1)^2", 2).unwrap();
        assert_eq!(
            e,
            ExprAst::Pow(
                Box::new(ExprAst::Call(Func::Sinh, Box::new(ExprAst::Var(0)))),
                2.0
            )
        );
        let e = parse_expr("1/(x3^2)", 3).unwrap();
        assert_eq!(
            e,
            ExprAst::Div(
                Box::new(ExprAst::Const(1.0)),
                Box::new(ExprAst::Pow(Box::new(ExprAst::Var(2)), 2.0))
            )
        );
        let v = parse_expr("2*exp(-2*x1)", 1)
            .unwrap()
            .eval(&[0.0f64])
            .unwrap();
        assert_relative_eq!(v, 2.0);
        // ^ binds tighter than unary minus
        let v = parse_expr("-x1^2", 1).unwrap().eval(&[3.0f64]).unwrap();
        assert_relative_eq!(v, -9.0);
        // right associativity: 2^3^2 = 2^9
        let v = parse_expr("2^3^2", 1).unwrap().eval(&[0.0f64]).unwrap();
        assert_relative_eq!(v, 512.0);
    }

    #[test]
    fn parse_errors_carry_columns() {
        match parse_expr("x1 + foo(2)", 2) {
            Err(Error::Parse { col, .. }) => assert_eq!(col, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("x5 + 1", 2) {
            Err(Error::Parse { col, .. }) => assert_eq!(col, 1),
            other => panic!("expected range error, got {other:?}"),
        }
        assert!(parse_expr("1 +", 1).is_err());
        assert!(parse_expr("x1 x2", 2).is_err());
        // non-constant exponent rejected
        assert!(parse_expr("2^x1", 1).is_err());
    }

    #[test]
    fn eval_jets_match_plain_values() {
        let e = parse_expr("exp(x1)*sin(x2) + x1^3/(1 + x2^2)", 2).unwrap();
        let p = [0.7, -0.4];
        let v = e.eval(&p.to_vec()).unwrap();
        let jets: Vec<Jet> = (0..2).map(|i| Jet::variable(p[i], i, 2, 3)).collect();
        let j = e.eval(&jets).unwrap();
        assert_relative_eq!(j.value(), v, max_relative = 1e-15);
        // exp(x1) keeps all orders equal to exp(x1)
        let e = parse_expr("exp(x1)", 1).unwrap();
        let j = e.eval(&[Jet::variable(0.3, 0, 1, 3)]).unwrap();
        let ex = 0.3f64.exp();
        assert_relative_eq!(j.grad(0), ex, max_relative = 1e-14);
        assert_relative_eq!(j.third(0, 0, 0), ex, max_relative = 1e-14);
        // mixed partial of x1*x2
        let e = parse_expr("x1*x2", 2).unwrap();
        let jets: Vec<Jet> = (0..2).map(|i| Jet::variable(1.5, i, 2, 2)).collect();
        assert_relative_eq!(e.eval(&jets).unwrap().hess(0, 1), 1.0);
    }

    #[test]
    fn domain_violations() {
        let e = parse_expr("log(x1)", 1).unwrap();
        assert!(matches!(e.eval(&[-1.0f64]), Err(Error::Domain(_))));
        let e = parse_expr("sqrt(x1)", 1).unwrap();
        assert!(matches!(e.eval(&[-0.5f64]), Err(Error::Domain(_))));
        let e = parse_expr("1/x1", 1).unwrap();
        assert!(matches!(e.eval(&[0.0f64]), Err(Error::Domain(_))));
        let e = parse_expr("x1^0.5", 1).unwrap();
        assert!(matches!(e.eval(&[-2.0f64]), Err(Error::Domain(_))));
        // integer powers of negative bases are fine
        let e = parse_expr("x1^3", 1).unwrap();
        assert_relative_eq!(e.eval(&[-2.0f64]).unwrap(), -8.0);
    }

    #[test]
    fn print_parse_idempotent() {
        for src in [
            "sinh(x1)^2",
            "1/(x3^2)",
            "2*exp(-2*x1)",
            "-x1^2 + x2*x3 - 4",
            "(x1 + x2)*(x1 - x2)/(1 + x1^2)",
            "log(2/(1 + x1^2 + x2^2))",
            "x1^(-1.5)",
        ] {
            let a = parse_expr(src, 3).unwrap();
            let printed = a.to_string();
            let b = parse_expr(&printed, 3).unwrap();
            assert_eq!(a, b, "print/parse drift: {src} -> {printed}");
        }
    }
}
