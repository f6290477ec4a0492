//! A small arithmetic language for user-defined S-metrics and closed-form
//! sequences.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-2^2` is `-4`, and it is right
//! associative. `pow(a, b)` parses to the same node as `a ^ b`.
//!
//! Variables are resolved to slots at parse time; evaluation takes the slot
//! values positionally, in the order the variables were declared.

mod eval;
mod parser;

use std::fmt;
use std::sync::Arc;

pub use eval::EvalError;
pub use parser::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub(crate) fn is_variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its variable table.
#[derive(Debug, Clone)]
pub struct Expr {
    root: Node,
    vars: Arc<[String]>,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.vars == other.vars
    }
}

impl Expr {
    /// Parses `text`, accepting only identifiers from `allowed_vars`.
    pub fn parse<S: AsRef<str>>(text: &str, allowed_vars: &[S]) -> Result<Expr, ParseError> {
        let vars: Arc<[String]> = allowed_vars.iter().map(|v| v.as_ref().to_owned()).collect();
        let root = parser::parse(text, &vars)?;
        Ok(Expr { root, vars })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Variable names, in slot order.
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates with slot values given positionally.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        if values.len() < self.vars.len() {
            return Err(EvalError::unbound(&self.vars[values.len()]));
        }
        self.eval_with(|slot| values[slot])
    }

    /// Evaluates with a lookup from slot index to value.
    pub fn eval_with(&self, lookup: impl Fn(usize) -> f64) -> Result<f64, EvalError> {
        eval::eval_root(self, &lookup)
    }

    /// Evaluates against named bindings. Every declared variable must be bound.
    pub fn eval_named(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        let mut values = Vec::with_capacity(self.vars.len());
        for name in self.vars.iter() {
            match bindings.iter().find(|(n, _)| n == name) {
                Some(&(_, v)) => values.push(v),
                None => return Err(EvalError::unbound(name)),
            }
        }
        self.eval(&values)
    }

    pub(crate) fn display_node<'a>(&'a self, node: &'a Node) -> NodeDisplay<'a> {
        NodeDisplay { expr: self, node }
    }
}

// Binding strength used by the printer. Atoms and calls bind tightest.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Num(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
        Node::Neg(_) => PREC_NEG,
        Node::Bin(op, ..) => match op {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            BinOp::Pow => PREC_POW,
        },
    }
}

pub(crate) struct NodeDisplay<'a> {
    expr: &'a Expr,
    node: &'a Node,
}

impl NodeDisplay<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, node: &Node, min_prec: u8) -> fmt::Result {
        let paren = precedence(node) < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match node {
            Node::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{})", -v)?,
            Node::Num(v) => write!(f, "{v}")?,
            Node::Var(slot) => f.write_str(&self.expr.vars[*slot])?,
            Node::Neg(inner) => {
                f.write_str("-")?;
                self.write(f, inner, PREC_NEG)?;
            }
            Node::Bin(op, lhs, rhs) => {
                let p = precedence(node);
                let (lmin, rmin) = match op {
                    BinOp::Pow => (PREC_ATOM, PREC_NEG),
                    _ => (p, p + 1),
                };
                self.write(f, lhs, lmin)?;
                write!(f, " {} ", op.symbol())?;
                self.write(f, rhs, rmin)?;
            }
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    self.write(f, a, 0)?;
                }
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for NodeDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.node, 0)
    }
}

/// Canonical form: minimal parentheses, single spaces around binary
/// operators, `pow` written as `^`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display_node(&self.root).fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(text: &str) -> f64 {
        Expr::parse::<&str>(text, &[]).unwrap().eval(&[]).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("2+3*4"), 14.0);
        assert_eq!(ev("2^3^2"), 512.0);
        assert_eq!(ev("-2^2"), -4.0);
        assert_eq!(ev("2*(3+4)"), 14.0);
        assert_eq!(ev("10-4-3"), 3.0);
        assert_eq!(ev("64/4/2"), 8.0);
        assert_eq!(ev("2^-1"), 0.5);
        assert_eq!(ev("(-2)^2"), 4.0);
        assert_eq!(ev("  2 *\t-3 "), -6.0);
    }

    #[test]
    fn paper_sequence_values() {
        let e = Expr::parse("pow(-1,n)/pow(2,n)", &["n"]).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap(), -0.5);
        assert_eq!(e.eval(&[2.0]).unwrap(), 0.25);
        assert_eq!(e.eval_named(&[("n", 3.0)]).unwrap(), -0.125);
    }

    #[test]
    fn paper_metric_value() {
        let e = Expr::parse("abs(x1 - z1) + abs(y1 - z1)", &["x1", "y1", "z1"]).unwrap();
        let v = e.eval_named(&[("x1", 1.0), ("y1", 1.0), ("z1", 0.5)]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn canonical_printing() {
        let e = Expr::parse("pow(-1,n)/pow(2,n)", &["n"]).unwrap();
        assert_eq!(e.to_string(), "(-1) ^ n / 2 ^ n");
        let e = Expr::parse("-(2^2)", &["n"]).unwrap();
        assert_eq!(e.to_string(), "-2 ^ 2");
        let e = Expr::parse("a-(b-c)", &["a", "b", "c"]).unwrap();
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::parse("(a^b)^c", &["a", "b", "c"]).unwrap();
        assert_eq!(e.to_string(), "(a ^ b) ^ c");
        let e = Expr::parse("max(a,b,1.5e-3)", &["a", "b"]).unwrap();
        assert_eq!(e.to_string(), "max(a, b, 0.0015)");
    }

    #[test]
    fn unbound_variable() {
        let e = Expr::parse("n + m", &["n", "m"]).unwrap();
        assert!(e.eval_named(&[("n", 1.0)]).is_err());
        assert!(e.eval(&[1.0]).is_err());
    }

    fn node_strategy(nvars: usize) -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0u32..1000, 0u32..4).prop_map(|(m, e)| Node::Num(m as f64 / 10f64.powi(e as i32))),
            (0..nvars).prop_map(Node::Var),
        ];
        leaf.prop_recursive(5, 40, 3, |inner| {
            let ops = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
                Just(BinOp::Pow),
            ];
            let unary = prop_oneof![
                Just(Func::Abs),
                Just(Func::Sin),
                Just(Func::Cos),
                Just(Func::Exp),
                Just(Func::Log),
            ];
            prop_oneof![
                inner.clone().prop_map(|n| Node::Neg(Box::new(n))),
                (ops, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Node::Bin(
                    op,
                    Box::new(a),
                    Box::new(b)
                )),
                (unary, inner.clone()).prop_map(|(f, a)| Node::Call(f, vec![a])),
                (prop::bool::ANY, prop::collection::vec(inner, 1..4)).prop_map(|(is_min, args)| {
                    Node::Call(if is_min { Func::Min } else { Func::Max }, args)
                }),
            ]
        })
    }

    const VARS: [&str; 3] = ["n", "x1", "y1"];

    proptest! {
        #[test]
        fn print_parse_round_trip(root in node_strategy(3)) {
            let e = Expr { root, vars: VARS.iter().map(|s| s.to_string()).collect() };
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed, &VARS).unwrap();
            prop_assert_eq!(&reparsed, &e);
            prop_assert_eq!(reparsed.to_string(), printed);
        }

        #[test]
        fn eval_is_finite_or_error(root in node_strategy(3), vals in prop::array::uniform3(-50.0f64..50.0)) {
            let e = Expr { root, vars: VARS.iter().map(|s| s.to_string()).collect() };
            if let Ok(v) = e.eval(&vals) {
                prop_assert!(v.is_finite());
            }
        }
    }
}
