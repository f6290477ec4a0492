//! Finite-window estimators for rough convergence.
//!
//! A point `p` is an r-limit of `x_n` when `limsup S(x_n, x_n, p) <= r`, so
//! everything here reduces to estimating tail suprema and infima of
//! `n -> S(x_n, x_n, p)`. The infinite tail is replaced by a schedule of
//! windows `[n0, n1]` with growing `n0`; the estimate is read off the last
//! window and called stable when the last two windows agree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SearchBox};
use crate::point::Point;
use crate::sequence::SequenceSpec;
use crate::space::{SMetricSpace, IDENTITY_TOL};

pub const DEFAULT_STAB_TOL: f64 = 1e-6;
pub const DEFAULT_DEC_TOL: f64 = 1e-6;
pub const DEFAULT_GROWTH_TOL: f64 = 1e-3;

/// Index range `[n0, n1]`, `1 <= n0 <= n1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[u64; 2]", into = "[u64; 2]")]
pub struct TailWindow {
    n0: u64,
    n1: u64,
}

impl TailWindow {
    pub fn new(n0: u64, n1: u64) -> Result<Self> {
        if n0 == 0 || n0 > n1 {
            return Err(Error::invalid(format!("window [{n0}, {n1}] needs 1 <= n0 <= n1")));
        }
        Ok(TailWindow { n0, n1 })
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn n1(&self) -> u64 {
        self.n1
    }

    pub fn len(&self) -> u64 {
        self.n1 - self.n0 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn halves(&self) -> (TailWindow, Option<TailWindow>) {
        let mid = self.n0 + (self.n1 - self.n0) / 2;
        let first = TailWindow { n0: self.n0, n1: mid };
        let second = (mid < self.n1).then_some(TailWindow {
            n0: mid + 1,
            n1: self.n1,
        });
        (first, second)
    }
}

impl TryFrom<[u64; 2]> for TailWindow {
    type Error = Error;

    fn try_from([n0, n1]: [u64; 2]) -> Result<Self> {
        TailWindow::new(n0, n1)
    }
}

impl From<TailWindow> for [u64; 2] {
    fn from(w: TailWindow) -> Self {
        [w.n0, w.n1]
    }
}

/// At least two windows with strictly increasing starts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TailWindow>", into = "Vec<TailWindow>")]
pub struct Schedule(Vec<TailWindow>);

impl Schedule {
    pub fn new(windows: Vec<TailWindow>) -> Result<Self> {
        if windows.len() < 2 {
            return Err(Error::invalid("a schedule needs at least two windows"));
        }
        if windows.windows(2).any(|w| w[0].n0 >= w[1].n0) {
            return Err(Error::invalid("schedule windows must have increasing n0"));
        }
        Ok(Schedule(windows))
    }

    /// Windows `[2^k, 2^(k+1) - 1]` for `k` in `first_exp..=last_exp`.
    pub fn doubling(first_exp: u32, last_exp: u32) -> Result<Self> {
        if last_exp >= 62 {
            return Err(Error::invalid("schedule exponent too large"));
        }
        Schedule::new(
            (first_exp..=last_exp)
                .map(|k| TailWindow::new(1 << k, (1 << (k + 1)) - 1))
                .collect::<Result<_>>()?,
        )
    }

    pub fn windows(&self) -> &[TailWindow] {
        &self.0
    }

    pub fn last(&self) -> TailWindow {
        *self.0.last().unwrap()
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::doubling(4, 12).unwrap()
    }
}

impl TryFrom<Vec<TailWindow>> for Schedule {
    type Error = Error;

    fn try_from(v: Vec<TailWindow>) -> Result<Self> {
        Schedule::new(v)
    }
}

impl From<Schedule> for Vec<TailWindow> {
    fn from(s: Schedule) -> Self {
        s.0
    }
}

/// Window schedule plus the two tolerances every decision uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub schedule: Schedule,
    pub stab_tol: f64,
    pub dec_tol: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig {
            schedule: Schedule::default(),
            stab_tol: DEFAULT_STAB_TOL,
            dec_tol: DEFAULT_DEC_TOL,
        }
    }
}

impl TailConfig {
    pub fn with_tolerances(mut self, stab_tol: f64, dec_tol: f64) -> Self {
        self.stab_tol = stab_tol;
        self.dec_tol = dec_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dec_tol > 0.0) || !(self.stab_tol >= 0.0) {
            return Err(Error::invalid("dec_tol must be > 0 and stab_tol >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub windows: Vec<TailWindow>,
    pub sup_values: Vec<f64>,
    pub inf_values: Vec<f64>,
    pub limsup_est: f64,
    pub liminf_est: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Accepted,
    Rejected,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub margin: f64,
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

/// Terms of a sequence over every window of a schedule, computed once and
/// reused for many candidate points.
#[derive(Debug, Clone)]
pub struct SequenceTail {
    windows: Vec<TailWindow>,
    terms: Vec<Vec<Point>>,
}

impl SequenceTail {
    pub fn sample(seq: &SequenceSpec, schedule: &Schedule) -> Result<Self> {
        let terms = schedule
            .windows()
            .iter()
            .map(|w| seq.terms(w.n0..=w.n1))
            .collect::<Result<_>>()?;
        Ok(SequenceTail {
            windows: schedule.windows().to_vec(),
            terms,
        })
    }

    pub fn estimate(&self, space: &SMetricSpace, p: &Point, stab_tol: f64) -> Result<TailEstimate> {
        p.ensure_dim(space.dim())?;
        let mut sup_values = Vec::with_capacity(self.windows.len());
        let mut inf_values = Vec::with_capacity(self.windows.len());
        for terms in &self.terms {
            let (mut sup, mut inf) = (0.0f64, f64::INFINITY);
            for x in terms {
                let s = space.eval_raw(x, x, p)?;
                sup = sup.max(s);
                inf = inf.min(s);
            }
            sup_values.push(sup);
            inf_values.push(inf);
        }
        let k = sup_values.len();
        let stable = (sup_values[k - 1] - sup_values[k - 2]).abs() <= stab_tol;
        Ok(TailEstimate {
            windows: self.windows.clone(),
            limsup_est: sup_values[k - 1],
            liminf_est: inf_values[k - 1].max(0.0),
            sup_values,
            inf_values,
            stable,
        })
    }
}

/// Maximum of `S(x_n, x_n, p)` over `n` in the window.
pub fn tail_sup(space: &SMetricSpace, seq: &SequenceSpec, p: &Point, w: TailWindow) -> Result<f64> {
    p.ensure_dim(space.dim())?;
    let mut sup = 0.0f64;
    for n in w.n0..=w.n1 {
        let x = seq.term(n)?;
        let s = space.eval_raw(&x, &x, p).map_err(|e| Error::Term {
            index: n,
            source: Box::new(e),
        })?;
        sup = sup.max(s);
    }
    Ok(sup)
}

pub fn limsup_estimate(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    p: &Point,
    schedule: &Schedule,
    stab_tol: f64,
) -> Result<TailEstimate> {
    SequenceTail::sample(seq, schedule)?.estimate(space, p, stab_tol)
}

/// Smallest roughness degree for which `p` is an r-limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roughness {
    pub degree: f64,
    pub stable: bool,
}

pub fn min_roughness(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    p: &Point,
    cfg: &TailConfig,
) -> Result<Roughness> {
    let est = limsup_estimate(space, seq, p, &cfg.schedule, cfg.stab_tol)?;
    Ok(Roughness {
        degree: est.limsup_est,
        stable: est.stable,
    })
}

/// Three-valued membership decision for `p` in `LIM^r`. Boundary points
/// (limsup equal to `r`) are accepted.
pub fn decide(est: &TailEstimate, r: f64, dec_tol: f64) -> Verdict {
    let margin = r - est.limsup_est;
    let outcome = if !est.stable {
        Outcome::Inconclusive
    } else if est.limsup_est <= r + dec_tol {
        Outcome::Accepted
    } else {
        Outcome::Rejected
    };
    Verdict { outcome, margin }
}

pub fn is_r_limit(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    p: &Point,
    r: f64,
    cfg: &TailConfig,
) -> Result<Verdict> {
    check_r(r)?;
    cfg.validate()?;
    let est = limsup_estimate(space, seq, p, &cfg.schedule, cfg.stab_tol)?;
    Ok(decide(&est, r, cfg.dec_tol))
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("roughness degree must be >= 0, got {r}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub point: Point,
    pub verdict: Verdict,
}

/// Grid classification of a search box against `LIM^r`.
#[derive(Debug, Clone)]
pub struct RegionEstimate {
    pub r: f64,
    pub grid: Grid,
    pub cells: Vec<Cell>,
    pub inner_points: Vec<Point>,
    pub outer_points: Vec<Point>,
}

impl RegionEstimate {
    pub fn inconclusive_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.verdict.outcome == Outcome::Inconclusive)
            .count()
    }

    /// Accepted cells with at least one axis neighbour that is not.
    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&i| {
                self.cells[i].verdict.is_accepted()
                    && self
                        .grid
                        .neighbors(i)
                        .into_iter()
                        .any(|j| !self.cells[j].verdict.is_accepted())
            })
            .collect()
    }
}

pub fn estimate_limit_set(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &TailConfig,
) -> Result<RegionEstimate> {
    check_r(r)?;
    cfg.validate()?;
    if bounds.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: bounds.dim(),
        });
    }
    let grid = Grid::new(bounds, step)?;
    let tail = SequenceTail::sample(seq, &cfg.schedule)?;
    region_from_tail(space, &tail, r, grid, cfg)
}

pub(crate) fn region_from_tail(
    space: &SMetricSpace,
    tail: &SequenceTail,
    r: f64,
    grid: Grid,
    cfg: &TailConfig,
) -> Result<RegionEstimate> {
    let cells: Vec<Cell> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let point = grid.point(i);
            let est = tail.estimate(space, &point, cfg.stab_tol)?;
            Ok(Cell {
                verdict: decide(&est, r, cfg.dec_tol),
                point,
            })
        })
        .collect::<Result<_>>()?;
    let pick = |o: Outcome| -> Vec<Point> {
        cells
            .iter()
            .filter(|c| c.verdict.outcome == o)
            .map(|c| c.point.clone())
            .collect()
    };
    Ok(RegionEstimate {
        r,
        inner_points: pick(Outcome::Accepted),
        outer_points: pick(Outcome::Rejected),
        grid,
        cells,
    })
}

/// Largest `S(y, y, z)` over ordered pairs drawn from `pts`.
pub fn set_diameter(space: &SMetricSpace, pts: &[Point]) -> Result<f64> {
    if pts.is_empty() {
        return Err(Error::invalid("diameter of an empty set"));
    }
    for p in pts {
        p.ensure_dim(space.dim())?;
    }
    Ok(pairwise_sup_with(space, pts, pts)?.0)
}

/// Largest `S(a, a, b)` over `a` in `left`, `b` in `right`, with the
/// maximising pair of indices.
pub(crate) fn pairwise_sup_with(
    space: &SMetricSpace,
    left: &[Point],
    right: &[Point],
) -> Result<(f64, usize, usize)> {
    let rows = left
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let mut best = (0.0f64, i, 0usize);
            for (j, b) in right.iter().enumerate() {
                let s = space.eval_raw(a, a, b)?;
                if s > best.0 {
                    best = (s, i, j);
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows
        .into_iter()
        .fold((0.0, 0, 0), |acc, row| if row.0 > acc.0 { row } else { acc }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub window: TailWindow,
    /// `max S(x_n, x_n, x_m)` over `n, m` in the window.
    pub bound: f64,
    /// The same maximum restricted to the first half of the window.
    pub first_half_bound: f64,
    /// Indices attaining `bound`.
    pub argmax: (u64, u64),
    /// Set when the full-window bound exceeds the first-half bound by more
    /// than the relative growth tolerance.
    pub growing: bool,
}

pub fn boundedness_bound(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    w: TailWindow,
    growth_tol: f64,
) -> Result<BoundEstimate> {
    let terms = seq.terms(w.n0..=w.n1)?;
    let (first, _) = w.halves();
    let half = &terms[..first.len() as usize];
    let (bound, i, j) = pairwise_sup_with(space, &terms, &terms)?;
    let (first_half_bound, ..) = pairwise_sup_with(space, half, half)?;
    Ok(BoundEstimate {
        window: w,
        bound,
        first_half_bound,
        argmax: (w.n0 + i as u64, w.n0 + j as u64),
        growing: bound > first_half_bound * (1.0 + growth_tol) + IDENTITY_TOL,
    })
}

/// Cauchy test on one window: accepted when every pair in the window is
/// within `eps` and the second half is no more spread out than the first;
/// rejected when the second half alone already exceeds `eps`.
pub fn is_cauchy(space: &SMetricSpace, seq: &SequenceSpec, eps: f64, w: TailWindow) -> Result<Verdict> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let terms = seq.terms(w.n0..=w.n1)?;
    let (first, second) = w.halves();
    let split = first.len() as usize;
    let (all, ..) = pairwise_sup_with(space, &terms, &terms)?;
    let (sup1, ..) = pairwise_sup_with(space, &terms[..split], &terms[..split])?;
    let sup2 = match second {
        Some(_) => pairwise_sup_with(space, &terms[split..], &terms[split..])?.0,
        None => 0.0,
    };
    let outcome = if all <= eps && sup2 <= sup1 + IDENTITY_TOL {
        Outcome::Accepted
    } else if sup2 > eps {
        Outcome::Rejected
    } else {
        Outcome::Inconclusive
    };
    Ok(Verdict {
        outcome,
        margin: eps - all,
    })
}

/// Pairwise spread of the second half of the window: the smallest `r`
/// with `S(x_n, x_n, x_m) <= r` there. This "rough Cauchy degree" is an
/// extension; the rough-convergence theory here does not define it.
pub fn rough_cauchy_degree(space: &SMetricSpace, seq: &SequenceSpec, w: TailWindow) -> Result<f64> {
    let (first, second) = w.halves();
    let part = second.unwrap_or(first);
    let terms = seq.terms(part.n0..=part.n1)?;
    Ok(pairwise_sup_with(space, &terms, &terms)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCell {
    pub point: Point,
    pub liminf_est: f64,
    pub is_cluster: bool,
}

/// `liminf S(x_n, x_n, p)` estimate at every grid point.
pub fn cluster_scan(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    bounds: &SearchBox,
    step: f64,
    cfg: &TailConfig,
) -> Result<Vec<ClusterCell>> {
    cfg.validate()?;
    if bounds.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: bounds.dim(),
        });
    }
    let grid = Grid::new(bounds, step)?;
    let tail = SequenceTail::sample(seq, &cfg.schedule)?;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let point = grid.point(i);
            let est = tail.estimate(space, &point, cfg.stab_tol)?;
            Ok(ClusterCell {
                is_cluster: est.liminf_est <= cfg.dec_tol,
                liminf_est: est.liminf_est,
                point,
            })
        })
        .collect()
}

/// Grid points `c` whose estimated `liminf S(x_n, x_n, c)` is within
/// `dec_tol` of zero.
pub fn cluster_points(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    bounds: &SearchBox,
    step: f64,
    cfg: &TailConfig,
) -> Result<Vec<Point>> {
    Ok(cluster_scan(space, seq, bounds, step, cfg)?
        .into_iter()
        .filter(|c| c.is_cluster)
        .map(|c| c.point)
        .collect())
}
