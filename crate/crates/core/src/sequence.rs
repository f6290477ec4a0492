//! Point sequences indexed from `n = 1`.

use std::fmt;
use std::ops::RangeInclusive;

use crate::dsl::Expr;
use crate::error::{Error, Result};
use crate::point::Point;

#[derive(Debug, Clone, PartialEq)]
pub enum SequenceKind {
    /// One expression in `n` per coordinate.
    ClosedForm(Vec<Expr>),
    /// Listed terms `x_1..x_k`, then the closed-form tail evaluated at the
    /// absolute index `n > k`.
    Explicit { head: Vec<Point>, tail: Vec<Expr> },
    /// `base(n) + delta(n)` coordinatewise.
    Perturbed {
        base: Box<SequenceSpec>,
        delta: Vec<Expr>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    kind: SequenceKind,
    dim: usize,
}

fn parse_coords<S: AsRef<str>>(coords: &[S]) -> Result<Vec<Expr>> {
    if coords.is_empty() {
        return Err(Error::invalid("a sequence needs at least one coordinate"));
    }
    coords
        .iter()
        .map(|c| Expr::parse(c.as_ref(), &["n"]).map_err(Error::from))
        .collect()
}

fn eval_coords(exprs: &[Expr], n: u64) -> Result<Vec<f64>> {
    let nf = n as f64;
    exprs.iter().map(|e| Ok(e.eval(&[nf])?)).collect()
}

impl SequenceSpec {
    pub fn closed_form<S: AsRef<str>>(coords: &[S]) -> Result<Self> {
        let exprs = parse_coords(coords)?;
        Ok(SequenceSpec {
            dim: exprs.len(),
            kind: SequenceKind::ClosedForm(exprs),
        })
    }

    pub fn explicit<S: AsRef<str>>(head: Vec<Point>, tail: &[S]) -> Result<Self> {
        let tail = parse_coords(tail)?;
        let dim = tail.len();
        for p in &head {
            p.ensure_dim(dim)?;
        }
        Ok(SequenceSpec {
            kind: SequenceKind::Explicit { head, tail },
            dim,
        })
    }

    pub fn perturbed<S: AsRef<str>>(base: SequenceSpec, delta: &[S]) -> Result<Self> {
        let delta = parse_coords(delta)?;
        if delta.len() != base.dim {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                found: delta.len(),
            });
        }
        Ok(SequenceSpec {
            dim: base.dim,
            kind: SequenceKind::Perturbed {
                base: Box::new(base),
                delta,
            },
        })
    }

    pub fn constant(p: &Point) -> Self {
        let coords: Vec<String> = p.iter().map(|c| format!("{c}")).collect();
        SequenceSpec::closed_form(&coords).expect("finite literals always parse")
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn term(&self, n: u64) -> Result<Point> {
        if n == 0 {
            return Err(Error::invalid("sequences are indexed from n = 1"));
        }
        self.term_inner(n).map_err(|e| Error::Term {
            index: n,
            source: Box::new(e),
        })
    }

    fn term_inner(&self, n: u64) -> Result<Point> {
        let coords = match &self.kind {
            SequenceKind::ClosedForm(exprs) => eval_coords(exprs, n)?,
            SequenceKind::Explicit { head, tail } => match head.get(n as usize - 1) {
                Some(p) => return Ok(p.clone()),
                None => eval_coords(tail, n)?,
            },
            SequenceKind::Perturbed { base, delta } => {
                let mut coords = base.term_inner(n)?.into_inner();
                for (c, d) in coords.iter_mut().zip(eval_coords(delta, n)?) {
                    *c += d;
                }
                coords
            }
        };
        Point::new(coords)
    }

    pub fn terms(&self, range: RangeInclusive<u64>) -> Result<Vec<Point>> {
        range.map(|n| self.term(n)).collect()
    }
}

fn write_coords(f: &mut fmt::Formatter<'_>, exprs: &[Expr]) -> fmt::Result {
    if let [e] = exprs {
        return write!(f, "{e}");
    }
    f.write_str("(")?;
    for (i, e) in exprs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    f.write_str(")")
}

impl fmt::Display for SequenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SequenceKind::ClosedForm(exprs) => write_coords(f, exprs),
            SequenceKind::Explicit { head, tail } => {
                f.write_str("[")?;
                for (i, p) in head.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str("; then ")?;
                write_coords(f, tail)?;
                f.write_str("]")
            }
            SequenceKind::Perturbed { base, delta } => {
                write!(f, "({base}) + ")?;
                write_coords(f, delta)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> SequenceSpec {
        SequenceSpec::closed_form(&["pow(-1,n)/pow(2,n)"]).unwrap()
    }

    #[test]
    fn paper_sequence_terms() {
        let s = paper();
        assert_eq!(s.term(1).unwrap().coords(), &[-0.5]);
        assert_eq!(s.term(2).unwrap().coords(), &[0.25]);
        for n in 1..=50u64 {
            let v = s.term(n).unwrap()[0];
            assert_eq!(v.abs(), 2f64.powi(-(n as i32)));
            assert_eq!(s.term(n).unwrap()[0].to_bits(), v.to_bits());
        }
        assert!(s.term(0).is_err());
    }

    #[test]
    fn perturbed_adds_delta() {
        let s = SequenceSpec::perturbed(paper(), &["0.25*pow(-1,n)"]).unwrap();
        assert_eq!(s.term(1).unwrap().coords(), &[-0.75]);
        assert_eq!(s.term(2).unwrap().coords(), &[0.5]);
        assert!(SequenceSpec::perturbed(paper(), &["0", "0"]).is_err());
    }

    #[test]
    fn explicit_head_then_tail() {
        let head = vec![Point::scalar(7.0).unwrap(), Point::scalar(8.0).unwrap()];
        let s = SequenceSpec::explicit(head, &["1/n"]).unwrap();
        assert_eq!(s.term(2).unwrap()[0], 8.0);
        assert_eq!(s.term(4).unwrap()[0], 0.25);
        assert!(SequenceSpec::explicit(vec![Point::scalar(1.0).unwrap()], &["n", "n"]).is_err());
        assert_eq!(s.to_string(), "[7, 8; then 1 / n]");
    }

    #[test]
    fn domain_error_reports_index() {
        let s = SequenceSpec::closed_form(&["1/(n-3)"]).unwrap();
        match s.term(3).unwrap_err() {
            Error::Term { index, .. } => assert_eq!(index, 3),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn constant_sequence() {
        let c = Point::new(vec![-0.5, 3.25]).unwrap();
        let s = SequenceSpec::constant(&c);
        assert_eq!(s.term(17).unwrap(), c);
    }
}
