use super::{Expr, Func};

/// Symbolic derivative with respect to `t`, lightly simplified.
pub fn differentiate(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) => num(0.0),
        Expr::Var => num(1.0),
        Expr::Neg(a) => neg(differentiate(a)),
        Expr::Add(a, b) => add(differentiate(a), differentiate(b)),
        Expr::Sub(a, b) => sub(differentiate(a), differentiate(b)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a), (**b).clone()),
            mul((**a).clone(), differentiate(b)),
        ),
        Expr::Div(a, b) => div(
            sub(
                mul(differentiate(a), (**b).clone()),
                mul((**a).clone(), differentiate(b)),
            ),
            pow((**b).clone(), num(2.0)),
        ),
        Expr::Pow(a, b) => {
            let (u, v) = ((**a).clone(), (**b).clone());
            if !v.contains_var() {
                let lowered = sub(v.clone(), num(1.0));
                mul(mul(v, pow(u, lowered)), differentiate(a))
            } else if !u.contains_var() {
                mul(mul(e.clone(), apply(Func::Log, u)), differentiate(b))
            } else {
                let du = differentiate(a);
                let dv = differentiate(b);
                mul(
                    e.clone(),
                    add(mul(dv, apply(Func::Log, u.clone())), div(mul(v, du), u)),
                )
            }
        }
        Expr::Apply(f, a) => {
            let u = (**a).clone();
            let du = differentiate(a);
            match f {
                Func::Sin => mul(apply(Func::Cos, u), du),
                Func::Cos => mul(neg(apply(Func::Sin, u)), du),
                Func::Sinh => mul(apply(Func::Cosh, u), du),
                Func::Cosh => mul(apply(Func::Sinh, u), du),
                Func::Tanh => mul(sub(num(1.0), pow(apply(Func::Tanh, u), num(2.0))), du),
                Func::Exp => mul(apply(Func::Exp, u), du),
                Func::Log => div(du, u),
                Func::Sqrt => div(du, mul(num(2.0), apply(Func::Sqrt, u))),
                // u/|u| is undefined at 0, which is exactly where |u| has no derivative.
                Func::Abs => mul(div(u.clone(), apply(Func::Abs, u)), du),
            }
        }
    }
}

fn as_const(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        Expr::Neg(a) => match **a {
            Expr::Num(v) => Some(-v),
            _ => None,
        },
        _ => None,
    }
}

// Negative constants are kept as Neg(Num) so printed text reparses to the same tree.
fn num(v: f64) -> Expr {
    if v < 0.0 {
        Expr::Neg(Box::new(Expr::Num(-v)))
    } else {
        Expr::Num(v.abs())
    }
}

fn fold(v: f64) -> Option<Expr> {
    v.is_finite().then(|| num(v))
}

fn apply(f: Func, a: Expr) -> Expr {
    Expr::Apply(f, Box::new(a))
}

fn neg(a: Expr) -> Expr {
    if let Some(v) = as_const(&a) {
        return num(-v);
    }
    match a {
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => fold(x + y).unwrap_or_else(|| Expr::Add(Box::new(a), Box::new(b))),
        (Some(0.0), None) => b,
        (None, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => fold(x - y).unwrap_or_else(|| Expr::Sub(Box::new(a), Box::new(b))),
        (Some(0.0), None) => neg(b),
        (None, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => fold(x * y).unwrap_or_else(|| Expr::Mul(Box::new(a), Box::new(b))),
        (Some(x), None) | (None, Some(x)) if x == 0.0 => num(0.0),
        (Some(1.0), None) => b,
        (None, Some(1.0)) => a,
        (Some(-1.0), None) => neg(b),
        (None, Some(-1.0)) => neg(a),
        // Constant factors go first: exp(2*t)*2 reads as 2*exp(2*t).
        (None, Some(_)) => mul(b, a),
        (Some(x), None) => match b {
            Expr::Mul(inner_a, inner_b) => match as_const(&inner_a) {
                Some(y) if (x * y).is_finite() => mul(num(x * y), *inner_b),
                _ => Expr::Mul(Box::new(a), Box::new(Expr::Mul(inner_a, inner_b))),
            },
            other => Expr::Mul(Box::new(a), Box::new(other)),
        },
        (None, None) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != 0.0 => {
            fold(x / y).unwrap_or_else(|| Expr::Div(Box::new(a), Box::new(b)))
        }
        (Some(0.0), _) => num(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match as_const(&b) {
        Some(1.0) => a,
        Some(0.0) => num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn d(src: &str) -> String {
        differentiate(&parse(src).unwrap()).to_string()
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(d("cosh(t)"), "sinh(t)");
        assert_eq!(d("t^3"), "3*t^2");
        assert_eq!(d("exp(2*t)"), "2*exp(2*t)");
        assert_eq!(d("7"), "0");
        assert_eq!(d("-t"), "-1");
    }

    #[test]
    fn abs_derivative_fails_at_zero() {
        let de = differentiate(&parse("abs(t)").unwrap());
        assert!(de.eval(0.0).is_err());
        assert_eq!(de.eval(-2.0).unwrap(), -1.0);
    }

    #[test]
    fn derivative_text_reparses() {
        for src in ["t^t", "2^t", "log(sqrt(t))/t", "tanh(t^2)-cos(3*t)", "1/(1+t^2)"] {
            let de = differentiate(&parse(src).unwrap());
            assert_eq!(parse(&de.to_string()).unwrap(), de, "{src}");
        }
    }
}
