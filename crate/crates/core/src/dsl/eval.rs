use thiserror::Error;

use super::{BinOp, Expr, Func, Node};

/// Evaluation failure, naming the offending subexpression in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{reason} in `{subexpr}`")]
pub struct EvalError {
    pub subexpr: String,
    pub reason: String,
}

impl EvalError {
    pub(crate) fn unbound(name: &str) -> Self {
        EvalError {
            subexpr: name.to_owned(),
            reason: "unbound variable".to_owned(),
        }
    }
}

struct Ctx<'a, F> {
    expr: &'a Expr,
    lookup: &'a F,
}

impl<F: Fn(usize) -> f64> Ctx<'_, F> {
    fn fail(&self, node: &Node, reason: &str) -> EvalError {
        EvalError {
            subexpr: self.expr.display_node(node).to_string(),
            reason: reason.to_owned(),
        }
    }

    // Infinite intermediates are allowed (`1 / 2^2000` is 0); NaN is not.
    fn eval(&self, node: &Node) -> Result<f64, EvalError> {
        let v = match node {
            Node::Num(v) => *v,
            Node::Var(slot) => (self.lookup)(*slot),
            Node::Neg(inner) => -self.eval(inner)?,
            Node::Bin(op, lhs, rhs) => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.fail(node, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b).map_err(|r| self.fail(node, r))?,
                }
            }
            Node::Call(func, args) => {
                let a = self.eval(&args[0])?;
                match func {
                    Func::Abs => a.abs(),
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(self.fail(node, "logarithm of a nonpositive number"));
                        }
                        a.ln()
                    }
                    Func::Min | Func::Max => {
                        let mut acc = a;
                        for arg in &args[1..] {
                            let v = self.eval(arg)?;
                            acc = if *func == Func::Min {
                                acc.min(v)
                            } else {
                                acc.max(v)
                            };
                        }
                        acc
                    }
                }
            }
        };
        if v.is_nan() {
            return Err(self.fail(node, "undefined result (NaN)"));
        }
        Ok(v)
    }
}

/// `base ^ exp` with an exact path for integer exponents, so that
/// `(-1) ^ n` is exactly ±1.
fn pow(base: f64, exp: f64) -> Result<f64, &'static str> {
    if base == 0.0 && exp < 0.0 {
        return Err("zero raised to a negative power");
    }
    if exp.fract() == 0.0 && exp.is_finite() {
        if exp.abs() <= i32::MAX as f64 {
            return Ok(base.powi(exp as i32));
        }
        let odd = (exp / 2.0).fract() != 0.0;
        let mag = base.abs().powf(exp);
        return Ok(if base < 0.0 && odd { -mag } else { mag });
    }
    if base < 0.0 {
        return Err("negative base with a non-integer exponent");
    }
    Ok(base.powf(exp))
}

pub(super) fn eval_root<F: Fn(usize) -> f64>(expr: &Expr, lookup: &F) -> Result<f64, EvalError> {
    let ctx = Ctx { expr, lookup };
    let v = ctx.eval(&expr.root)?;
    if !v.is_finite() {
        return Err(ctx.fail(&expr.root, "result overflowed"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, vars: &[&str], vals: &[f64]) -> Result<f64, EvalError> {
        Expr::parse(text, vars).unwrap().eval(vals)
    }

    #[test]
    fn domain_errors_name_subexpression() {
        let e = ev("1 + log(n - 1)", &["n"], &[1.0]).unwrap_err();
        assert_eq!(e.subexpr, "log(n - 1)");
        let e = ev("3 / (n - 2)", &["n"], &[2.0]).unwrap_err();
        assert_eq!(e.subexpr, "3 / (n - 2)");
        assert!(e.reason.contains("division"));
        let e = ev("0 ^ -1", &[], &[]).unwrap_err();
        assert!(e.reason.contains("zero"));
        let e = ev("(-2) ^ 0.5", &[], &[]).unwrap_err();
        assert!(e.reason.contains("non-integer"));
        assert!(ev("exp(1000)", &[], &[]).is_err());
    }

    #[test]
    fn integer_powers_of_negative_bases_are_exact() {
        for n in 1..=60 {
            let v = ev("pow(-1, n)", &["n"], &[n as f64]).unwrap();
            assert_eq!(v, if n % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert_eq!(pow(-1.0, 1e12 + 1.0).unwrap(), -1.0);
        assert_eq!(pow(-1.0, 1e12).unwrap(), 1.0);
    }

    #[test]
    fn overflowing_intermediates_are_tolerated() {
        // 2^2000 overflows, but the quotient has a finite limit
        let v = ev("pow(-1,n)/pow(2,n)", &["n"], &[2000.0]).unwrap();
        assert_eq!(v, 0.0);
        assert!(ev("pow(2, n)", &["n"], &[2000.0]).is_err());
    }
}
