use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{LabConfig, TheoremId, TheoremVerdict, VerificationReport, Witness};
use crate::error::{Error, Result};
use crate::grid::{Grid, SearchBox};
use crate::point::Point;
use crate::rough::{
    boundedness_bound, cluster_scan, decide, estimate_limit_set, is_r_limit, pairwise_sup_with,
    region_from_tail, Outcome, RegionEstimate, SequenceTail, TailWindow,
};
use crate::sequence::SequenceSpec;
use crate::space::SMetricSpace;

fn instance(space: &SMetricSpace, cfg: &LabConfig, extra: Value) -> BTreeMap<String, Value> {
    let mut map = BTreeMap::new();
    map.insert("space".into(), json!(space.id()));
    map.insert("dim".into(), json!(space.dim()));
    map.insert("grid_lipschitz".into(), json!(space.grid_lipschitz()));
    map.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    if let Value::Object(fields) = extra {
        map.extend(fields);
    }
    map
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("roughness degree must be >= 0, got {r}")))
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Accepted => "accepted",
        Outcome::Rejected => "rejected",
        Outcome::Inconclusive => "inconclusive",
    }
}

/// Diameter of `LIM^r` measured on accepted grid points, against `2r`.
/// The `3r` bound is reported alongside as a separate metric.
pub fn verify_diameter(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    diameter_check(space, seq, r, bounds, step, cfg, TheoremId::Diameter, 2.0)
}

/// Same measurement, judged against `3r`.
pub fn verify_diameter_3r(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    diameter_check(space, seq, r, bounds, step, cfg, TheoremId::Diameter3r, 3.0)
}

#[allow(clippy::too_many_arguments)]
fn diameter_check(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
    theorem: TheoremId,
    factor: f64,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        theorem,
        instance(
            space,
            cfg,
            json!({ "sequence": seq.to_string(), "r": r, "box": bounds, "step": step }),
        ),
    );
    let region = estimate_limit_set(space, seq, r, bounds, step, &cfg.tail)?;
    let slack = 2.0 * step * space.grid_lipschitz() + cfg.tail.dec_tol;
    rep.metric("inner_count", region.inner_points.len() as f64)
        .metric("inconclusive_cells", region.inconclusive_count() as f64)
        .metric("bound_2r", 2.0 * r)
        .metric("bound_3r", 3.0 * r)
        .metric("slack", slack);
    if region.inner_points.is_empty() {
        return Ok(rep.inconclusive("no grid point is accepted as an r-limit"));
    }
    let pts = &region.inner_points;
    let (diameter, i, j) = pairwise_sup_with(space, pts, pts)?;
    rep.metric("diameter", diameter);

    let bound = factor * r + slack;
    if diameter > 2.0 * r + slack && diameter <= 3.0 * r + slack {
        rep.findings.push(json!({
            "kind": "diameter-between-2r-and-3r",
            "diameter": diameter,
            "r": r,
            "pair": [pts[i], pts[j]],
        }));
    }
    if diameter > bound {
        rep.verdict = TheoremVerdict::Violated;
        rep.reason = Some(format!("diameter {diameter} exceeds {factor}r + slack = {bound}"));
        rep.witnesses.push(
            Witness::new("pair in LIM^r with S(y,y,z) above the bound")
                .points([pts[i].clone(), pts[j].clone()])
                .values([diameter, bound]),
        );
    }
    Ok(rep)
}

/// Grid comparison of `LIM^r` against the closed ball `B_S[x, r]`, ignoring
/// cells within one grid step of the sphere `S(p, p, x) = r`.
fn compare_with_ball(
    space: &SMetricSpace,
    region: &RegionEstimate,
    x: &Point,
    r: f64,
    step: f64,
    dec_tol: f64,
    rep: &mut VerificationReport,
) -> Result<()> {
    let band = space.grid_lipschitz() * step + dec_tol;
    let (mut mismatches, mut excluded, mut unsure) = (0usize, 0usize, 0usize);
    for cell in &region.cells {
        let d = space.eval_raw(&cell.point, &cell.point, x)?;
        if (d - r).abs() <= band {
            excluded += 1;
            continue;
        }
        let in_ball = d <= r;
        match cell.verdict.outcome {
            Outcome::Inconclusive => unsure += 1,
            o if (o == Outcome::Accepted) != in_ball => {
                mismatches += 1;
                if rep.witnesses.len() < 8 {
                    rep.witnesses.push(
                        Witness::new(if in_ball {
                            "in the ball but not an r-limit"
                        } else {
                            "an r-limit outside the ball"
                        })
                        .points([cell.point.clone(), x.clone()])
                        .values([d, r - cell.verdict.margin]),
                    );
                }
            }
            _ => {}
        }
    }
    rep.metric("cells", region.cells.len() as f64)
        .metric("boundary_cells_excluded", excluded as f64)
        .metric("inconclusive_off_boundary", unsure as f64)
        .metric("mismatches", mismatches as f64);
    if mismatches > 0 {
        rep.verdict = TheoremVerdict::Violated;
        rep.reason = Some(format!("{mismatches} off-boundary cells disagree"));
    } else if unsure > 0 {
        rep.verdict = TheoremVerdict::Inconclusive;
        rep.reason = Some(format!("{unsure} off-boundary cells are inconclusive"));
    }
    Ok(())
}

/// `B_S[x, r] = LIM^r`, with `x` required to be the classical limit.
pub fn verify_ball_equality(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    x: &Point,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        TheoremId::BallEquality,
        instance(
            space,
            cfg,
            json!({ "sequence": seq.to_string(), "center": x, "r": r, "box": bounds, "step": step }),
        ),
    );
    let limit = is_r_limit(space, seq, x, 0.0, &cfg.tail)?;
    rep.metric("center_limsup", (0.0 - limit.margin).max(0.0));
    if !limit.is_accepted() {
        return Ok(rep.inconclusive(format!(
            "center is not confirmed as the classical limit (r = 0 test {})",
            outcome_name(limit.outcome)
        )));
    }
    let region = estimate_limit_set(space, seq, r, bounds, step, &cfg.tail)?;
    compare_with_ball(space, &region, x, r, step, cfg.tail.dec_tol, &mut rep)?;
    Ok(rep)
}

/// Ball equality with the hypothesis weakened to `x in LIM^r`: the centre is
/// the first accepted grid point rather than the classical limit. Expected
/// to fail in general.
pub fn verify_ball_equality_weak(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let region = estimate_limit_set(space, seq, r, bounds, step, &cfg.tail)?;
    let center = region.inner_points.first().cloned();
    let mut rep = VerificationReport::new(
        TheoremId::BallEqualityWeak,
        instance(
            space,
            cfg,
            json!({ "sequence": seq.to_string(), "center": center, "r": r, "box": bounds, "step": step }),
        ),
    );
    let Some(x) = center else {
        return Ok(rep.inconclusive("LIM^r has no accepted grid point"));
    };
    compare_with_ball(space, &region, &x, r, step, cfg.tail.dec_tol, &mut rep)?;
    Ok(rep)
}

/// Probes the closure of `LIM^r` from inside: for boundary cells, bisect
/// towards a rejected neighbour so the accepted endpoints form a convergent
/// sequence in `LIM^r`, then test its limit.
pub fn verify_closedness(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    probe_count: usize,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        TheoremId::Closedness,
        instance(
            space,
            cfg,
            json!({
                "sequence": seq.to_string(), "r": r, "box": bounds, "step": step,
                "probe_count": probe_count,
            }),
        ),
    );
    let tail = SequenceTail::sample(seq, &cfg.tail.schedule)?;
    let region = region_from_tail(space, &tail, r, Grid::new(bounds, step)?, &cfg.tail)?;
    if region.inner_points.is_empty() {
        return Ok(rep.inconclusive("LIM^r has no accepted grid point"));
    }
    let limsup = |p: &Point| -> Result<(f64, bool)> {
        let est = tail.estimate(space, p, cfg.tail.stab_tol)?;
        Ok((est.limsup_est, est.stable))
    };

    // boundary cells paired with a rejected neighbour
    let pairs: Vec<(usize, usize)> = region
        .boundary_cells()
        .into_iter()
        .filter_map(|i| {
            region
                .grid
                .neighbors(i)
                .into_iter()
                .find(|&j| region.cells[j].verdict.outcome == Outcome::Rejected)
                .map(|j| (i, j))
        })
        .collect();
    rep.metric("boundary_pairs", pairs.len() as f64);
    if pairs.is_empty() || probe_count == 0 {
        return Ok(rep.inconclusive("no boundary cell with a rejected neighbour"));
    }
    let chosen: Vec<(usize, usize)> = (0..probe_count.min(pairs.len()))
        .map(|k| pairs[k * pairs.len() / probe_count.min(pairs.len())])
        .collect();

    let mut worst: f64 = f64::NEG_INFINITY;
    for (i, j) in chosen {
        let inside = region.cells[i].point.clone();
        let outside = region.cells[j].point.clone();
        let mut probes = vec![inside.clone()];
        let (l0, s0) = limsup(&inside)?;
        let target = if l0 <= r && s0 {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..cfg.bisection_steps {
                let mid = 0.5 * (lo + hi);
                let p = inside.lerp(&outside, mid);
                let (l, s) = limsup(&p)?;
                if s && l <= r {
                    lo = mid;
                    probes.push(p);
                } else {
                    hi = mid;
                }
            }
            inside.lerp(&outside, 0.5 * (lo + hi))
        } else {
            // already within dec_tol of the boundary
            inside.clone()
        };
        for p in &probes {
            let (l, s) = limsup(p)?;
            if !(s && l <= r + cfg.tail.dec_tol) {
                return Ok(rep.inconclusive(format!("probe {p} is not confirmed in LIM^r")));
            }
        }
        let est = tail.estimate(space, &target, cfg.tail.stab_tol)?;
        let verdict = decide(&est, r, cfg.tail.dec_tol);
        worst = worst.max(est.limsup_est - r);
        match verdict.outcome {
            Outcome::Accepted => {}
            Outcome::Rejected => {
                rep.verdict = TheoremVerdict::Violated;
                rep.witnesses.push(
                    Witness::new("limit of a convergent sequence in LIM^r rejected")
                        .points([target, inside])
                        .values([est.limsup_est, r]),
                );
            }
            Outcome::Inconclusive => {
                if rep.verdict == TheoremVerdict::Supported {
                    rep.verdict = TheoremVerdict::Inconclusive;
                    rep.reason = Some(format!("limit {target} is inconclusive"));
                }
            }
        }
    }
    rep.metric("max_limit_excess", worst);
    if rep.verdict == TheoremVerdict::Violated {
        rep.reason = Some("a probe limit lies outside LIM^r".into());
    }
    Ok(rep)
}

/// Candidate r-limits: the supplied hint, the centre of the last window's
/// bounding box, and the last sampled term.
fn limit_candidates(seq: &SequenceSpec, last: TailWindow, hint: Option<&Point>) -> Result<Vec<Point>> {
    let mut out: Vec<Point> = hint.into_iter().cloned().collect();
    let terms = seq.terms(last.n0()..=last.n1())?;
    let dim = seq.dim();
    let center: Vec<f64> = (0..dim)
        .map(|k| {
            let (lo, hi) = terms
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p[k]), hi.max(p[k]))
                });
            0.5 * (lo + hi)
        })
        .collect();
    out.push(Point::new(center)?);
    out.push(terms.last().unwrap().clone());
    Ok(out)
}

/// Every r-convergent sequence is bounded: after confirming some r-limit,
/// the pairwise bound over `[1, 2^k]` must stop growing.
pub fn verify_r_convergent_implies_bounded(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    limit_hint: Option<&Point>,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        TheoremId::Bounded,
        instance(
            space,
            cfg,
            json!({ "sequence": seq.to_string(), "r": r, "limit_hint": limit_hint }),
        ),
    );
    let mut found = None;
    for p in limit_candidates(seq, cfg.tail.schedule.last(), limit_hint)? {
        if is_r_limit(space, seq, &p, r, &cfg.tail)?.is_accepted() {
            found = Some(p);
            break;
        }
    }
    let Some(limit) = found else {
        return Ok(rep.inconclusive("no r-limit confirmed; the sequence may not be r-convergent"));
    };
    rep.findings.push(json!({ "kind": "r-limit", "point": limit }));

    let (k0, k1) = cfg.bound_exps;
    let mut last = None;
    for k in k0..=k1 {
        let b = boundedness_bound(space, seq, TailWindow::new(1, 1 << k)?, cfg.growth_tol)?;
        rep.metric(&format!("bound_1_{}", 1u64 << k), b.bound);
        last = Some(b);
    }
    let Some(b) = last else {
        return Err(Error::invalid("bound_exps range is empty"));
    };
    rep.metric("bound", b.bound);
    if b.growing {
        rep.verdict = TheoremVerdict::Violated;
        rep.reason = Some("pairwise bound still growing on the largest window".into());
        rep.witnesses.push(
            Witness::new("pair attaining the growing bound")
                .indices([b.argmax.0, b.argmax.1])
                .values([b.bound, b.first_half_bound]),
        );
    }
    Ok(rep)
}

/// Every bounded sequence with bound `B` is `B`-convergent to its own
/// first term.
pub fn verify_bounded_implies_rough(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new(
        TheoremId::BoundedImpliesRough,
        instance(space, cfg, json!({ "sequence": seq.to_string() })),
    );
    let window = TailWindow::new(1, 1 << cfg.bound_exps.1)?;
    let growth = boundedness_bound(space, seq, window, cfg.growth_tol)?;
    if growth.growing {
        return Ok(rep.inconclusive("sequence does not look bounded"));
    }
    // The bound has to cover the estimation window too, so take pairs from
    // an initial segment together with the last schedule window.
    let last = cfg.tail.schedule.last();
    let mut idx: Vec<u64> = (1..=256.min(last.n0() - 1)).collect();
    idx.extend(last.n0()..=last.n1());
    let terms: Vec<Point> = idx.iter().map(|&n| seq.term(n)).collect::<Result<_>>()?;
    let (pair_bound, ..) = pairwise_sup_with(space, &terms, &terms)?;
    let bound = growth.bound.max(pair_bound);
    rep.metric("bound", bound);

    let first = seq.term(1)?;
    let v = is_r_limit(space, seq, &first, bound, &cfg.tail)?;
    rep.metric("limsup_at_first_term", bound - v.margin)
        .metric("margin", v.margin);
    match v.outcome {
        Outcome::Accepted => {}
        Outcome::Rejected => {
            rep.verdict = TheoremVerdict::Violated;
            rep.reason = Some("the first term is not a B-limit".into());
            rep.witnesses.push(
                Witness::new("first term")
                    .points([first])
                    .indices([1])
                    .values([bound - v.margin, bound]),
            );
        }
        Outcome::Inconclusive => {
            rep = rep.inconclusive("tail estimate at the first term is unstable");
        }
    }
    Ok(rep)
}

/// If `S(a_i, a_i, b_i) <= r/2` eventually and `a_n -> xi`, then `b_n`
/// r-converges to `xi`.
pub fn verify_perturbation(
    space: &SMetricSpace,
    a: &SequenceSpec,
    b: &SequenceSpec,
    r: f64,
    xi: &Point,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        TheoremId::Perturbation,
        instance(
            space,
            cfg,
            json!({ "a": a.to_string(), "b": b.to_string(), "r": r, "xi": xi }),
        ),
    );
    let allowed = r / 2.0 + cfg.tail.dec_tol;
    let mut k1 = None;
    let mut last_violation = None;
    let windows = cfg.tail.schedule.windows();
    for w in windows.iter().rev() {
        let mut worst = (0.0f64, w.n0());
        for n in w.n0()..=w.n1() {
            let (an, bn) = (a.term(n)?, b.term(n)?);
            let s = space.eval(&an, &an, &bn)?;
            if s > worst.0 {
                worst = (s, n);
            }
        }
        if worst.0 > allowed {
            last_violation = Some(worst);
            break;
        }
        k1 = Some(w.n0());
        if w.n0() == windows[windows.len() - 1].n0() {
            rep.metric("perturbation_sup", worst.0);
        }
    }
    let Some(k1) = k1 else {
        let (s, n) = last_violation.unwrap();
        rep.witnesses.push(
            Witness::new("S(a_i, a_i, b_i) above r/2")
                .indices([n])
                .values([s, r / 2.0]),
        );
        return Ok(rep.inconclusive(format!("hypothesis fails at index {n}: {s} > r/2")));
    };
    rep.metric("k1", k1 as f64);

    let a_lim = is_r_limit(space, a, xi, 0.0, &cfg.aux)?;
    if !a_lim.is_accepted() {
        return Ok(rep.inconclusive("a is not confirmed to converge to xi"));
    }
    let v = is_r_limit(space, b, xi, r, &cfg.tail)?;
    rep.metric("b_limsup", r - v.margin).metric("margin", v.margin);
    match v.outcome {
        Outcome::Accepted => {}
        Outcome::Rejected => {
            rep.verdict = TheoremVerdict::Violated;
            rep.reason = Some("b is not r-convergent to xi".into());
            rep.witnesses
                .push(Witness::new("xi").points([xi.clone()]).values([r - v.margin, r]));
        }
        Outcome::Inconclusive => rep = rep.inconclusive("tail estimate for b is unstable"),
    }
    Ok(rep)
}

/// If `xi_k in LIM^r` and `xi_k -> xi`, then `x_n` is 2r-convergent to `xi`.
pub fn verify_double_limit(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    xi_seq: &SequenceSpec,
    xi: &Point,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        TheoremId::DoubleLimit,
        instance(
            space,
            cfg,
            json!({ "sequence": seq.to_string(), "xi_sequence": xi_seq.to_string(), "r": r, "xi": xi }),
        ),
    );
    let tail = SequenceTail::sample(seq, &cfg.tail.schedule)?;
    for &k in &cfg.probe_indices {
        let p = xi_seq.term(k)?;
        let est = tail.estimate(space, &p, cfg.tail.stab_tol)?;
        if !decide(&est, r, cfg.tail.dec_tol).is_accepted() {
            rep.witnesses.push(
                Witness::new("probe term outside LIM^r")
                    .points([p])
                    .indices([k])
                    .values([est.limsup_est, r]),
            );
            return Ok(rep.inconclusive(format!("xi_{k} is not confirmed in LIM^r")));
        }
    }
    rep.metric("probes_checked", cfg.probe_indices.len() as f64);
    if !is_r_limit(space, xi_seq, xi, 0.0, &cfg.aux)?.is_accepted() {
        return Ok(rep.inconclusive("xi_k is not confirmed to converge to xi"));
    }
    let est = tail.estimate(space, xi, cfg.tail.stab_tol)?;
    let v = decide(&est, 2.0 * r, cfg.tail.dec_tol);
    rep.metric("limsup_at_xi", est.limsup_est)
        .metric("bound_2r", 2.0 * r)
        .metric("bound_r", r);
    match v.outcome {
        Outcome::Accepted => {}
        Outcome::Rejected => {
            rep.verdict = TheoremVerdict::Violated;
            rep.reason = Some("sequence is not 2r-convergent to xi".into());
            rep.witnesses.push(
                Witness::new("xi")
                    .points([xi.clone()])
                    .values([est.limsup_est, 2.0 * r]),
            );
        }
        Outcome::Inconclusive => rep = rep.inconclusive("tail estimate at xi is unstable"),
    }
    Ok(rep)
}

/// `LIM^r` lies in `B_S[c, r]` for every cluster point `c`.
pub fn verify_cluster_containment(
    space: &SMetricSpace,
    seq: &SequenceSpec,
    r: f64,
    bounds: &SearchBox,
    step: f64,
    cfg: &LabConfig,
) -> Result<VerificationReport> {
    check_r(r)?;
    let mut rep = VerificationReport::new(
        TheoremId::ClusterContainment,
        instance(
            space,
            cfg,
            json!({ "sequence": seq.to_string(), "r": r, "box": bounds, "step": step }),
        ),
    );
    let clusters: Vec<Point> = cluster_scan(space, seq, bounds, step, &cfg.tail)?
        .into_iter()
        .filter(|c| c.is_cluster)
        .map(|c| c.point)
        .collect();
    rep.metric("cluster_count", clusters.len() as f64);
    rep.findings
        .push(json!({ "kind": "cluster-points", "points": clusters }));
    if clusters.is_empty() {
        return Ok(rep.inconclusive("no cluster point found on the grid"));
    }
    let region = estimate_limit_set(space, seq, r, bounds, step, &cfg.tail)?;
    rep.metric("inner_count", region.inner_points.len() as f64);
    if region.inner_points.is_empty() {
        return Ok(rep.inconclusive("LIM^r has no accepted grid point"));
    }
    let allowed = r + cfg.tail.dec_tol + space.grid_lipschitz() * step;
    let mut max_excess = f64::NEG_INFINITY;
    for c in &clusters {
        for p in &region.inner_points {
            let d = space.eval_raw(p, p, c)?;
            max_excess = max_excess.max(d - r);
            if d > allowed && rep.witnesses.len() < 8 {
                rep.witnesses.push(
                    Witness::new("r-limit outside the ball around a cluster point")
                        .points([p.clone(), c.clone()])
                        .values([d, allowed]),
                );
            }
        }
    }
    rep.metric("max_excess", max_excess)
        .metric("allowed_excess", allowed - r);
    if !rep.witnesses.is_empty() {
        rep.verdict = TheoremVerdict::Violated;
        rep.reason = Some("an r-limit lies outside B_S[c, r]".into());
    }
    Ok(rep)
}
