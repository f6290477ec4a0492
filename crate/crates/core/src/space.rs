//! S-metric spaces: a ternary distance `S(x, y, z)` on finite real vectors.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::Expr;
use crate::error::{Error, Result};
use crate::point::Point;

/// Default absolute tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Slack constant used for DSL spaces that do not declare their own.
pub const DEFAULT_GRID_LIPSCHITZ: f64 = 2.0;

/// A ternary evaluator. Implementations must be pure.
pub trait SMetric: Send + Sync {
    fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64>;
}

struct PaperLine;

impl SMetric for PaperLine {
    fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        Ok((x[0] - z[0]).abs() + (y[0] - z[0]).abs())
    }
}

/// `S(x, y, z) = d(x, z) + d(y, z)` with the Euclidean metric `d`.
struct EuclideanInduced;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

impl SMetric for EuclideanInduced {
    fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        Ok(euclid(x, z) + euclid(y, z))
    }
}

struct Discrete;

impl SMetric for Discrete {
    fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        Ok(if x == z && y == z { 0.0 } else { 1.0 })
    }
}

/// Expression over `x1..xd, y1..yd, z1..zd`.
struct ExprMetric {
    expr: Expr,
    dim: usize,
}

impl SMetric for ExprMetric {
    fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        let d = self.dim;
        Ok(self.expr.eval_with(|slot| match slot / d {
            0 => x[slot % d],
            1 => y[slot % d],
            _ => z[slot % d],
        })?)
    }
}

/// Built-in spaces addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Builtin {
    /// `S(x, y, z) = |x - z| + |y - z|` on the real line.
    PaperLine,
    MetricInducedEuclidean(usize),
    Discrete(usize),
}

impl Builtin {
    /// Accepts `paper_line`, `metric_induced_euclidean(d)` and `discrete(d)`.
    pub fn from_name(name: &str) -> Result<Builtin> {
        let name = name.trim();
        if name == "paper_line" {
            return Ok(Builtin::PaperLine);
        }
        let parse_dim = |rest: &str| -> Option<usize> {
            let d: usize = rest.strip_prefix('(')?.strip_suffix(')')?.trim().parse().ok()?;
            (d >= 1).then_some(d)
        };
        if let Some(rest) = name.strip_prefix("metric_induced_euclidean") {
            if let Some(d) = parse_dim(rest) {
                return Ok(Builtin::MetricInducedEuclidean(d));
            }
        }
        if let Some(rest) = name.strip_prefix("discrete") {
            if let Some(d) = parse_dim(rest) {
                return Ok(Builtin::Discrete(d));
            }
        }
        Err(Error::UnknownSpace(name.to_owned()))
    }

    pub fn space(self) -> SMetricSpace {
        let (metric, dim, lip): (Arc<dyn SMetric>, usize, f64) = match self {
            Builtin::PaperLine => (Arc::new(PaperLine), 1, 2.0),
            Builtin::MetricInducedEuclidean(d) => (Arc::new(EuclideanInduced), d, 2.0),
            Builtin::Discrete(d) => (Arc::new(Discrete), d, 0.0),
        };
        SMetricSpace {
            id: self.to_string(),
            dim,
            metric,
            grid_lipschitz: lip,
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::PaperLine => f.write_str("paper_line"),
            Builtin::MetricInducedEuclidean(d) => write!(f, "metric_induced_euclidean({d})"),
            Builtin::Discrete(d) => write!(f, "discrete({d})"),
        }
    }
}

impl TryFrom<String> for Builtin {
    type Error = Error;

    fn try_from(name: String) -> Result<Self> {
        Builtin::from_name(&name)
    }
}

impl From<Builtin> for String {
    fn from(b: Builtin) -> Self {
        b.to_string()
    }
}

pub fn make_builtin(name: &str) -> Result<SMetricSpace> {
    Builtin::from_name(name).map(Builtin::space)
}

/// A space `X` of `dim`-dimensional points with its S-metric.
#[derive(Clone)]
pub struct SMetricSpace {
    id: String,
    dim: usize,
    metric: Arc<dyn SMetric>,
    grid_lipschitz: f64,
}

impl fmt::Debug for SMetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SMetricSpace")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl SMetricSpace {
    pub fn new(id: impl Into<String>, dim: usize, metric: Arc<dyn SMetric>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("space dimension must be positive"));
        }
        Ok(SMetricSpace {
            id: id.into(),
            dim,
            metric,
            grid_lipschitz: DEFAULT_GRID_LIPSCHITZ,
        })
    }

    /// Space defined by an expression in `x1..xd`, `y1..yd`, `z1..zd`.
    pub fn from_expr(text: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("space dimension must be positive"));
        }
        let vars: Vec<String> = ["x", "y", "z"]
            .iter()
            .flat_map(|v| (1..=dim).map(move |i| format!("{v}{i}")))
            .collect();
        let expr = Expr::parse(text, &vars)?;
        let id = format!("expr[{expr}]");
        SMetricSpace::new(id, dim, Arc::new(ExprMetric { expr, dim }))
    }

    /// Overrides the grid slack constant (see [`SMetricSpace::grid_lipschitz`]).
    pub fn with_grid_lipschitz(mut self, lip: f64) -> Self {
        self.grid_lipschitz = lip;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bound on how much `S(p, p, c)` can move when `p` moves by one unit.
    /// Set-level comparisons on a grid use it to size their slack.
    pub fn grid_lipschitz(&self) -> f64 {
        self.grid_lipschitz
    }

    pub fn eval(&self, x: &Point, y: &Point, z: &Point) -> Result<f64> {
        for p in [x, y, z] {
            p.ensure_dim(self.dim)?;
        }
        self.eval_raw(x, y, z)
    }

    /// `S(y, y, c)`, the quantity behind balls and tail estimates.
    pub fn dist(&self, y: &Point, c: &Point) -> Result<f64> {
        self.eval(y, y, c)
    }

    /// Evaluation without dimension checks; still rejects non-finite output.
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        let v = self.metric.eval(x, y, z)?;
        if !v.is_finite() {
            return Err(Error::InvalidSpace {
                space: self.id.clone(),
                value: v,
                at: format!("{x:?}, {y:?}, {z:?}"),
            });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallKind {
    Open,
    Closed,
}

/// Open ball: `S(y, y, center) < radius`. Closed ball: `S(y, y, center) <= radius`.
pub fn ball_membership(
    space: &SMetricSpace,
    center: &Point,
    radius: f64,
    y: &Point,
    kind: BallKind,
) -> Result<bool> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::invalid(format!("ball radius must be >= 0, got {radius}")));
    }
    let s = space.eval(y, y, center)?;
    Ok(match kind {
        BallKind::Open => s < radius,
        BallKind::Closed => s <= radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axiom {
    Nonneg,
    ZeroIffEqual,
    Tetrahedral,
    Symmetry,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [
        Axiom::Nonneg,
        Axiom::ZeroIffEqual,
        Axiom::Tetrahedral,
        Axiom::Symmetry,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    /// `(x, y, z, a)`
    pub witness: [Point; 4],
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxiomVerdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub space: String,
    pub sampler: BoxSampler,
    pub samples_tested: usize,
    pub tol: f64,
    pub violation_count: usize,
    /// The first [`MAX_RECORDED_VIOLATIONS`] violations, in sampling order.
    pub violations: Vec<AxiomViolation>,
    pub verdict: AxiomVerdict,
}

impl AxiomReport {
    /// The zero-iff-equal "only if" direction is only ever sampled.
    pub fn verdict_label(&self) -> &'static str {
        match self.verdict {
            AxiomVerdict::Pass => "pass (sampled)",
            AxiomVerdict::Fail => "fail",
        }
    }
}

pub const MAX_RECORDED_VIOLATIONS: usize = 32;

/// Uniform points in `[lo, hi]^d` from a seeded generator. Each of `y`, `z`,
/// `a` in a quadruple is, with probability `alias_prob`, a copy of an
/// earlier member so that equality patterns get exercised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSampler {
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    pub alias_prob: f64,
}

impl BoxSampler {
    pub fn new(lo: f64, hi: f64, seed: u64) -> Self {
        BoxSampler {
            lo,
            hi,
            seed,
            alias_prob: 0.25,
        }
    }

    fn point(&self, rng: &mut ChaCha8Rng, dim: usize) -> Point {
        Point::from_vec_unchecked((0..dim).map(|_| rng.random_range(self.lo..=self.hi)).collect())
    }

    fn quadruple(&self, rng: &mut ChaCha8Rng, dim: usize) -> [Point; 4] {
        let mut quad: Vec<Point> = vec![self.point(rng, dim)];
        for i in 1..4 {
            let p = if rng.random_bool(self.alias_prob) {
                quad[rng.random_range(0..i)].clone()
            } else {
                self.point(rng, dim)
            };
            quad.push(p);
        }
        quad.try_into().unwrap()
    }
}

/// Tests one quadruple against one axiom.
pub fn check_witness(
    space: &SMetricSpace,
    axiom: Axiom,
    quad: &[Point; 4],
    tol: f64,
) -> Result<Option<AxiomViolation>> {
    let [x, y, z, a] = quad;
    let s = |p: &Point, q: &Point, r: &Point| space.eval(p, q, r);
    let (lhs, rhs, bad) = match axiom {
        Axiom::Nonneg => {
            let v = s(x, y, z)?;
            (v, 0.0, v < -tol)
        }
        Axiom::ZeroIffEqual => {
            let zero = s(x, x, x)?;
            if zero.abs() > tol {
                (zero, 0.0, true)
            } else if !(x == y && y == z) {
                let v = s(x, y, z)?;
                (v, tol, v <= tol)
            } else {
                (zero, 0.0, false)
            }
        }
        Axiom::Tetrahedral => {
            let lhs = s(x, y, z)?;
            let rhs = s(x, x, a)? + s(y, y, a)? + s(z, z, a)?;
            (lhs, rhs, lhs > rhs + tol)
        }
        Axiom::Symmetry => {
            let lhs = s(x, x, y)?;
            let rhs = s(y, y, x)?;
            (lhs, rhs, (lhs - rhs).abs() > tol)
        }
    };
    Ok(bad.then(|| AxiomViolation {
        axiom,
        witness: quad.clone(),
        lhs,
        rhs,
    }))
}

/// Samples `n_samples` quadruples and tests every axiom on each.
pub fn check_axioms(
    space: &SMetricSpace,
    sampler: &BoxSampler,
    n_samples: usize,
    tol: f64,
) -> Result<AxiomReport> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be > 0"));
    }
    if !(sampler.lo <= sampler.hi) || !sampler.lo.is_finite() || !sampler.hi.is_finite() {
        return Err(Error::invalid("sampler box must satisfy lo <= hi"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let mut violations = Vec::new();
    let mut count = 0;
    for _ in 0..n_samples {
        let quad = sampler.quadruple(&mut rng, space.dim());
        for axiom in Axiom::ALL {
            if let Some(v) = check_witness(space, axiom, &quad, tol)? {
                count += 1;
                if violations.len() < MAX_RECORDED_VIOLATIONS {
                    violations.push(v);
                }
            }
        }
    }
    Ok(AxiomReport {
        space: space.id().to_owned(),
        sampler: *sampler,
        samples_tested: n_samples,
        tol,
        violation_count: count,
        verdict: if count == 0 {
            AxiomVerdict::Pass
        } else {
            AxiomVerdict::Fail
        },
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn squared_line() -> SMetricSpace {
        SMetricSpace::from_expr("(abs(x1 - z1) + abs(y1 - z1))^2", 1).unwrap()
    }

    #[test]
    fn eval_examples() {
        let line = make_builtin("paper_line").unwrap();
        assert_eq!(line.eval(&p(&[1.0]), &p(&[1.0]), &p(&[0.5])).unwrap(), 1.0);
        let e2 = make_builtin("metric_induced_euclidean(2)").unwrap();
        let o = p(&[0.0, 0.0]);
        assert_eq!(e2.eval(&o, &o, &p(&[3.0, 4.0])).unwrap(), 10.0);
        let d = make_builtin("discrete(1)").unwrap();
        let a = p(&[0.3]);
        assert_eq!(d.eval(&a, &a, &a).unwrap(), 0.0);
        assert_eq!(d.eval(&a, &a, &p(&[0.4])).unwrap(), 1.0);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let line = make_builtin("paper_line").unwrap();
        let err = line.eval(&p(&[1.0, 2.0]), &p(&[1.0]), &p(&[0.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn non_finite_results_flag_the_space() {
        let bad = SMetricSpace::from_expr("x1 - x1 + 1 / (z1 - y1)", 1).unwrap();
        let a = p(&[1.0]);
        assert!(bad.eval(&a, &a, &a).is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(Builtin::from_name("discrete(3)").unwrap(), Builtin::Discrete(3));
        assert!(Builtin::from_name("discrete(0)").is_err());
        assert!(Builtin::from_name("taxicab").is_err());
        assert_eq!(make_builtin("paper_line").unwrap().dim(), 1);
        for b in [
            Builtin::PaperLine,
            Builtin::MetricInducedEuclidean(2),
            Builtin::Discrete(4),
        ] {
            assert_eq!(Builtin::from_name(&b.to_string()).unwrap(), b);
        }
    }

    #[test]
    fn ball_examples() {
        let line = make_builtin("paper_line").unwrap();
        let c = p(&[0.0]);
        assert!(ball_membership(&line, &c, 1.0, &p(&[0.4]), BallKind::Closed).unwrap());
        assert!(!ball_membership(&line, &c, 1.0, &p(&[0.5]), BallKind::Open).unwrap());
        assert!(ball_membership(&line, &c, 1.0, &p(&[0.5]), BallKind::Closed).unwrap());
        assert!(ball_membership(&line, &c, 0.0, &c, BallKind::Closed).unwrap());
        assert!(!ball_membership(&line, &c, 0.0, &c, BallKind::Open).unwrap());
        assert!(ball_membership(&line, &c, -1.0, &c, BallKind::Closed).is_err());
    }

    #[test]
    fn builtins_pass_axioms() {
        for name in ["paper_line", "metric_induced_euclidean(2)", "discrete(1)"] {
            let space = make_builtin(name).unwrap();
            let report = check_axioms(&space, &BoxSampler::new(-10.0, 10.0, 7), 2_000, IDENTITY_TOL).unwrap();
            assert_eq!(
                report.verdict,
                AxiomVerdict::Pass,
                "{name}: {:?}",
                report.violations.first()
            );
            assert_eq!(report.verdict_label(), "pass (sampled)");
        }
    }

    #[test]
    fn squared_candidate_fails_tetrahedral() {
        let space = squared_line();
        let quad = [p(&[0.0]), p(&[0.0]), p(&[2.0]), p(&[1.0])];
        let v = check_witness(&space, Axiom::Tetrahedral, &quad, IDENTITY_TOL)
            .unwrap()
            .unwrap();
        assert_eq!((v.lhs, v.rhs), (16.0, 12.0));

        let report = check_axioms(&space, &BoxSampler::new(-10.0, 10.0, 1), 500, IDENTITY_TOL).unwrap();
        assert_eq!(report.verdict, AxiomVerdict::Fail);
        let first = report
            .violations
            .iter()
            .find(|v| v.axiom == Axiom::Tetrahedral)
            .expect("tetrahedral witness");
        let again = check_witness(&space, Axiom::Tetrahedral, &first.witness, IDENTITY_TOL).unwrap();
        assert_eq!(again.as_ref(), Some(first));
    }

    #[test]
    fn zero_iff_equal_catches_degenerate_metric() {
        // vanishes whenever x = z, even if y differs
        let space = SMetricSpace::from_expr("abs(x1 - z1)", 1).unwrap();
        let report = check_axioms(&space, &BoxSampler::new(-1.0, 1.0, 3), 200, IDENTITY_TOL).unwrap();
        assert!(report.violations.iter().any(|v| v.axiom == Axiom::ZeroIffEqual));
    }

    #[test]
    fn reports_are_reproducible() {
        let space = squared_line();
        let s = BoxSampler::new(-10.0, 10.0, 99);
        assert_eq!(
            check_axioms(&space, &s, 300, IDENTITY_TOL).unwrap(),
            check_axioms(&space, &s, 300, IDENTITY_TOL).unwrap()
        );
    }

    proptest! {
        #[test]
        fn closed_ball_monotone_in_radius(
            c in -5.0f64..5.0, y in -5.0f64..5.0, r1 in 0.0f64..10.0, dr in 0.0f64..10.0
        ) {
            let line = make_builtin("paper_line").unwrap();
            let (c, y) = (p(&[c]), p(&[y]));
            if ball_membership(&line, &c, r1, &y, BallKind::Closed).unwrap() {
                prop_assert!(ball_membership(&line, &c, r1 + dr, &y, BallKind::Closed).unwrap());
            }
        }

        #[test]
        fn builtin_identities(xs in prop::array::uniform2(-10.0f64..10.0), ys in prop::array::uniform2(-10.0f64..10.0)) {
            for (name, d) in [("paper_line", 1), ("metric_induced_euclidean(2)", 2), ("discrete(2)", 2)] {
                let space = make_builtin(name).unwrap();
                let x = p(&xs[..d]);
                let y = p(&ys[..d]);
                prop_assert_eq!(space.eval(&x, &x, &x).unwrap(), 0.0);
                let a = space.eval(&x, &x, &y).unwrap();
                let b = space.eval(&y, &y, &x).unwrap();
                prop_assert!((a - b).abs() <= IDENTITY_TOL);
            }
        }
    }
}
