//! Expression language for user-declared warping functions.
//!
//! Expressions are functions of a single variable `t`. They can be parsed,
//! evaluated with explicit domain checks, differentiated symbolically and
//! printed back to text that reparses to the same tree.

mod diff;
mod estimate;
mod parser;

use std::fmt;

use thiserror::Error;

pub use diff::differentiate;
pub use estimate::{estimate_endpoint_exponent, ExponentEstimate};
pub use parser::parse;

/// Elementary functions accepted by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression tree over the variable `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Apply(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
}

impl ParseError {
    /// Byte offset into the source text where the problem was detected.
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{subexpr}`: {reason}")]
pub struct EvalError {
    pub subexpr: String,
    pub reason: &'static str,
}

impl Expr {
    pub fn contains_var(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var => true,
            Expr::Neg(a) | Expr::Apply(_, a) => a.contains_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.contains_var() || b.contains_var()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var => 1,
            Expr::Neg(a) | Expr::Apply(_, a) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Evaluates at `t`. Domain violations are reported instead of producing NaN.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let fail = |e: &Expr, reason| EvalError { subexpr: e.to_string(), reason };
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var => t,
            Expr::Neg(a) => -a.eval(t)?,
            Expr::Add(a, b) => a.eval(t)? + b.eval(t)?,
            Expr::Sub(a, b) => a.eval(t)? - b.eval(t)?,
            Expr::Mul(a, b) => a.eval(t)? * b.eval(t)?,
            Expr::Div(a, b) => {
                let num = a.eval(t)?;
                let den = b.eval(t)?;
                if den == 0.0 {
                    return Err(fail(self, "division by zero"));
                }
                num / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval(t)?;
                let exp = b.eval(t)?;
                if base < 0.0 && exp.fract() != 0.0 {
                    return Err(fail(self, "non-integer power of a negative base"));
                }
                if base == 0.0 && exp < 0.0 {
                    return Err(fail(self, "negative power of zero"));
                }
                base.powf(exp)
            }
            Expr::Apply(f, a) => {
                let x = a.eval(t)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                    Func::Tanh => x.tanh(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(fail(self, "logarithm of a nonpositive value"));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(fail(self, "square root of a negative value"));
                        }
                        x.sqrt()
                    }
                    Func::Abs => x.abs(),
                }
            }
        };
        if v.is_nan() {
            return Err(fail(self, "undefined value"));
        }
        Ok(v)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(_) | Expr::Var | Expr::Apply(..) => 5,
        }
    }

    fn write_with(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            f.write_str("(")?;
            self.write_bare(f)?;
            f.write_str(")")
        } else {
            self.write_bare(f)
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_number(f, *v),
            Expr::Var => f.write_str("t"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_with(f, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_with(f, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                b.write_with(f, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_with(f, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                b.write_with(f, 3)
            }
            Expr::Pow(a, b) => {
                a.write_with(f, 5)?;
                f.write_str("^")?;
                b.write_with(f, 3)
            }
            Expr::Apply(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_bare(f)?;
                f.write_str(")")
            }
        }
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // Rust's float formatting is shortest-round-trip, so the text reparses exactly.
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        write!(f, "{v}")
    } else {
        write!(f, "{v:e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Evaluates `expr` at `t`.
pub fn evaluate(expr: &Expr, t: f64) -> Result<f64, EvalError> {
    expr.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_examples() {
        assert_eq!(evaluate(&parse("cosh(t)").unwrap(), 0.0).unwrap(), 1.0);
        assert_eq!(evaluate(&parse("1/t^2").unwrap(), 2.0).unwrap(), 0.25);
        let err = evaluate(&parse("log(t)").unwrap(), -1.0).unwrap_err();
        assert_eq!(err.subexpr, "log(t)");
    }

    #[test]
    fn domain_errors_are_reported() {
        assert!(evaluate(&parse("sqrt(t)").unwrap(), -0.5).is_err());
        assert!(evaluate(&parse("(t-1)^0.5").unwrap(), 0.0).is_err());
        assert!(evaluate(&parse("1/(t-1)").unwrap(), 1.0).is_err());
        assert!(evaluate(&parse("t^-1").unwrap(), 0.0).is_err());
        assert_eq!(evaluate(&parse("t^3").unwrap(), -2.0).unwrap(), -8.0);
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        for (src, want) in [("1/t^2", "1/t^2"), ("(1+t)*(2-t)", "(1+t)*(2-t)")] {
            assert_eq!(parse(src).unwrap().to_string(), want);
        }
        assert_eq!(parse("-t^2").unwrap().to_string(), "-t^2");
        assert_eq!(parse("(-t)^2").unwrap().to_string(), "(-t)^2");
        assert_eq!(parse("2^-t").unwrap().to_string(), "2^-t");
        assert_eq!(parse("t-(t-1)").unwrap().to_string(), "t-(t-1)");
        assert_eq!(parse("1e-7*t").unwrap().to_string(), "1e-7*t");
    }
}
