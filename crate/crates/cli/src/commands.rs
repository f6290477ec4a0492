use std::collections::BTreeMap;

use roughlab_core::lab::{self, LabConfig, TheoremId, TheoremVerdict, VerificationReport};
use roughlab_core::{
    check_axioms, check_witness, cluster_scan, estimate_limit_set, is_cauchy, is_r_limit, min_roughness,
    rough_cauchy_degree, set_diameter, Axiom, AxiomVerdict, BoxSampler, Outcome, Point, SMetricSpace,
    SearchBox, SequenceSpec, TailConfig,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_coords, RunConfig};
use crate::error::CliError;

/// Overall result of a run. Ordered so that the worst status wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Inconclusive,
    Violated,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Violated => 1,
            Status::Inconclusive => 2,
        }
    }

    fn of_outcome(o: Outcome) -> Status {
        match o {
            Outcome::Accepted => Status::Ok,
            Outcome::Rejected => Status::Violated,
            Outcome::Inconclusive => Status::Inconclusive,
        }
    }

    fn of_theorem(v: TheoremVerdict) -> Status {
        match v {
            TheoremVerdict::Supported => Status::Ok,
            TheoremVerdict::Violated => Status::Violated,
            TheoremVerdict::Inconclusive => Status::Inconclusive,
        }
    }
}

/// Grid dump written next to the report, one row per cell.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub dim: usize,
    pub rows: Vec<(Point, String, f64)>,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub status: Status,
    pub result: Value,
    pub table: Option<Table>,
}

impl CommandOutput {
    fn new(status: Status, result: impl Serialize) -> Self {
        CommandOutput {
            status,
            result: serde_json::to_value(result).expect("results serialize"),
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Axioms,
    Member,
    Minrough,
    Limset,
    Cauchy,
    Clusters,
    Verify(Vec<TheoremId>),
    Search(TheoremId),
}

impl Command {
    /// `verify` takes a theorem id or `all`; `search` takes a theorem id.
    pub fn parse(name: &str, target: Option<&str>) -> Result<Command, CliError> {
        let theorem = |t: &str| {
            t.parse::<TheoremId>()
                .map_err(|e| CliError::Config(e.to_string()))
        };
        let needs = |cmd: &str| CliError::Config(format!("`{cmd}` needs a theorem id"));
        let cmd = match name {
            "axioms" => Command::Axioms,
            "member" => Command::Member,
            "minrough" => Command::Minrough,
            "limset" => Command::Limset,
            "cauchy" => Command::Cauchy,
            "clusters" => Command::Clusters,
            "verify" => match target.ok_or_else(|| needs("verify"))? {
                "all" => return Ok(Command::Verify(TheoremId::PRIMARY.to_vec())),
                t => return Ok(Command::Verify(vec![theorem(t)?])),
            },
            "search" => return Ok(Command::Search(theorem(target.ok_or_else(|| needs("search"))?)?)),
            other => return Err(CliError::Config(format!("unknown command `{other}`"))),
        };
        match target {
            Some(t) => Err(CliError::Config(format!("`{name}` takes no argument, got `{t}`"))),
            None => Ok(cmd),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Command::Axioms => "axioms".into(),
            Command::Member => "member".into(),
            Command::Minrough => "minrough".into(),
            Command::Limset => "limset".into(),
            Command::Cauchy => "cauchy".into(),
            Command::Clusters => "clusters".into(),
            Command::Verify(ts) if ts.as_slice() == TheoremId::PRIMARY => "verify all".into(),
            Command::Verify(ts) => format!("verify {}", ts[0]),
            Command::Search(t) => format!("search {t}"),
        }
    }
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    match cmd {
        Command::Axioms => axioms(cfg),
        Command::Member => member(cfg),
        Command::Minrough => minrough(cfg),
        Command::Limset => limset(cfg),
        Command::Cauchy => cauchy(cfg),
        Command::Clusters => clusters(cfg),
        Command::Verify(ts) => verify(cfg, ts),
        Command::Search(t) => search(cfg, *t),
    }
}

fn axioms(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let space = cfg.space()?;
    let a = &cfg.axioms;
    let mut witness_violations = Vec::new();
    for (i, quad) in a.witnesses.iter().enumerate() {
        let field = format!("axioms.witnesses[{i}]");
        let pts: Vec<Point> = quad
            .iter()
            .map(|c| cfg.dim_point(&field, c))
            .collect::<Result<_, _>>()?;
        let quad: [Point; 4] = pts.try_into().expect("four points");
        for axiom in Axiom::ALL {
            if let Some(v) = check_witness(&space, axiom, &quad, a.tol)? {
                witness_violations.push(v);
            }
        }
    }
    let sampler = BoxSampler::new(a.lo, a.hi, cfg.seed);
    let report = check_axioms(&space, &sampler, a.samples, a.tol)?;
    let failed = report.verdict == AxiomVerdict::Fail || !witness_violations.is_empty();
    let status = if failed { Status::Violated } else { Status::Ok };
    Ok(CommandOutput::new(
        status,
        json!({
            "verdict": if failed { "fail" } else { report.verdict_label() },
            "witnesses_checked": a.witnesses.len(),
            "witness_violations": witness_violations,
            "sampled": report,
        }),
    ))
}

fn member(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (space, seq, tail) = (cfg.space()?, cfg.sequence()?, cfg.tail()?);
    let p = cfg.point()?;
    let r = cfg.params.r;
    let v = is_r_limit(&space, &seq, &p, r, &tail)?;
    let est = roughlab_core::limsup_estimate(&space, &seq, &p, &tail.schedule, tail.stab_tol)?;
    Ok(CommandOutput::new(
        Status::of_outcome(v.outcome),
        json!({ "point": p, "r": r, "verdict": v.outcome, "margin": v.margin, "estimate": est }),
    ))
}

fn minrough(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (space, seq, tail) = (cfg.space()?, cfg.sequence()?, cfg.tail()?);
    let p = cfg.point()?;
    let rough = min_roughness(&space, &seq, &p, &tail)?;
    let status = if rough.stable {
        Status::Ok
    } else {
        Status::Inconclusive
    };
    Ok(CommandOutput::new(
        status,
        json!({ "point": p, "degree": rough.degree, "stable": rough.stable }),
    ))
}

fn limset(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (space, seq, tail) = (cfg.space()?, cfg.sequence()?, cfg.tail()?);
    let (r, step, bounds) = (cfg.params.r, cfg.params.step, cfg.search_box()?);
    let region = estimate_limit_set(&space, &seq, r, &bounds, step, &tail)?;
    let inconclusive = region.inconclusive_count();
    let boundary: Vec<&Point> = region
        .boundary_cells()
        .into_iter()
        .map(|i| &region.cells[i].point)
        .collect();
    let diameter = match region.inner_points.is_empty() {
        true => None,
        false => Some(set_diameter(&space, &region.inner_points)?),
    };
    let result = json!({
        "r": r,
        "grid_shape": region.grid.shape(),
        "cells": region.cells.len(),
        "inner_count": region.inner_points.len(),
        "outer_count": region.outer_points.len(),
        "inconclusive_count": inconclusive,
        "inner_bounding_box": bounding_box(&region.inner_points),
        "diameter": diameter,
        "boundary_points": boundary,
    });
    let rows = region
        .cells
        .into_iter()
        .map(|c| (c.point, format!("{:?}", c.verdict.outcome), c.verdict.margin))
        .collect();
    let status = if inconclusive > 0 {
        Status::Inconclusive
    } else {
        Status::Ok
    };
    let mut out = CommandOutput::new(status, result);
    out.table = Some(Table {
        name: "limset",
        dim: space.dim(),
        rows,
    });
    Ok(out)
}

fn cauchy(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (space, seq) = (cfg.space()?, cfg.sequence()?);
    let (eps, w) = (cfg.params.eps, cfg.window()?);
    let v = is_cauchy(&space, &seq, eps, w)?;
    let degree = rough_cauchy_degree(&space, &seq, w)?;
    Ok(CommandOutput::new(
        Status::of_outcome(v.outcome),
        json!({
            "eps": eps,
            "window": w,
            "verdict": v.outcome,
            "margin": v.margin,
            "rough_cauchy_degree": degree,
        }),
    ))
}

fn clusters(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (space, seq, tail) = (cfg.space()?, cfg.sequence()?, cfg.tail()?);
    let (step, bounds) = (cfg.params.step, cfg.search_box()?);
    let scan = cluster_scan(&space, &seq, &bounds, step, &tail)?;
    let found: Vec<&Point> = scan.iter().filter(|c| c.is_cluster).map(|c| &c.point).collect();
    let result = json!({ "count": found.len(), "clusters": found, "cells": scan.len() });
    let rows = scan
        .into_iter()
        .map(|c| {
            let verdict = if c.is_cluster { "Accepted" } else { "Rejected" };
            (c.point, verdict.to_owned(), tail.dec_tol - c.liminf_est)
        })
        .collect();
    let mut out = CommandOutput::new(Status::Ok, result);
    out.table = Some(Table {
        name: "clusters",
        dim: space.dim(),
        rows,
    });
    Ok(out)
}

struct Instance {
    space: SMetricSpace,
    seq: SequenceSpec,
    lab: LabConfig,
    r: f64,
    bounds: SearchBox,
    step: f64,
}

fn verify(cfg: &RunConfig, theorems: &[TheoremId]) -> Result<CommandOutput, CliError> {
    let inst = Instance {
        space: cfg.space()?,
        seq: cfg.sequence()?,
        lab: cfg.lab()?,
        r: cfg.params.r,
        bounds: cfg.search_box()?,
        step: cfg.params.step,
    };
    let reports = theorems
        .iter()
        .map(|&t| verify_one(cfg, &inst, t))
        .collect::<Result<Vec<_>, _>>()?;
    let status = reports
        .iter()
        .map(|r| Status::of_theorem(r.verdict))
        .max()
        .unwrap_or(Status::Ok);
    let summary: BTreeMap<&str, TheoremVerdict> =
        reports.iter().map(|r| (r.theorem.name(), r.verdict)).collect();
    Ok(CommandOutput::new(
        status,
        json!({ "summary": summary, "reports": reports }),
    ))
}

fn verify_one(cfg: &RunConfig, inst: &Instance, t: TheoremId) -> Result<VerificationReport, CliError> {
    let Instance {
        space,
        seq,
        lab,
        r,
        bounds,
        step,
    } = inst;
    let (r, step) = (*r, *step);
    let th = &cfg.theorems;
    let limit = th
        .limit
        .as_ref()
        .map(|c| cfg.dim_point("theorems.limit", c))
        .transpose()?;
    let report = match t {
        TheoremId::Diameter => lab::verify_diameter(space, seq, r, bounds, step, lab)?,
        TheoremId::Diameter3r => lab::verify_diameter_3r(space, seq, r, bounds, step, lab)?,
        TheoremId::BallEquality => match &limit {
            Some(x) => lab::verify_ball_equality(space, seq, x, r, bounds, step, lab)?,
            None => not_configured(t, "theorems.limit"),
        },
        TheoremId::BallEqualityWeak => lab::verify_ball_equality_weak(space, seq, r, bounds, step, lab)?,
        TheoremId::Closedness => {
            lab::verify_closedness(space, seq, r, th.closedness_probes, bounds, step, lab)?
        }
        TheoremId::Bounded => lab::verify_r_convergent_implies_bounded(space, seq, r, limit.as_ref(), lab)?,
        TheoremId::BoundedImpliesRough => lab::verify_bounded_implies_rough(space, seq, lab)?,
        TheoremId::Perturbation => match (&limit, th.perturbation.is_empty()) {
            (Some(xi), false) => {
                parse_coords("theorems.perturbation", &th.perturbation)?;
                let b = SequenceSpec::perturbed(seq.clone(), &th.perturbation)?;
                lab::verify_perturbation(space, seq, &b, r, xi, lab)?
            }
            (None, _) => not_configured(t, "theorems.limit"),
            (_, true) => not_configured(t, "theorems.perturbation"),
        },
        TheoremId::DoubleLimit => match (&th.xi, th.xi_sequence.is_empty()) {
            (Some(xi), false) => {
                parse_coords("theorems.xi_sequence", &th.xi_sequence)?;
                let xi_seq = SequenceSpec::closed_form(&th.xi_sequence)?;
                if xi_seq.dim() != space.dim() {
                    return Err(CliError::Config(
                        "theorems.xi_sequence: dimension differs from the space".into(),
                    ));
                }
                let xi = cfg.dim_point("theorems.xi", xi)?;
                lab::verify_double_limit(space, seq, r, &xi_seq, &xi, lab)?
            }
            (None, _) => not_configured(t, "theorems.xi"),
            (_, true) => not_configured(t, "theorems.xi_sequence"),
        },
        TheoremId::ClusterContainment => lab::verify_cluster_containment(space, seq, r, bounds, step, lab)?,
    };
    Ok(report)
}

fn not_configured(theorem: TheoremId, field: &str) -> VerificationReport {
    VerificationReport {
        theorem,
        instance: BTreeMap::new(),
        verdict: TheoremVerdict::Inconclusive,
        reason: Some(format!("`{field}` is not set in the config")),
        witnesses: Vec::new(),
        metrics: BTreeMap::new(),
        findings: Vec::new(),
    }
}

fn search(cfg: &RunConfig, t: TheoremId) -> Result<CommandOutput, CliError> {
    let s = &cfg.search;
    let report = lab::counterexample_search(t, &s.generator, s.budget, cfg.seed)?;
    Ok(CommandOutput::new(Status::of_theorem(report.verdict), report))
}

fn bounding_box(pts: &[Point]) -> Option<Vec<[f64; 2]>> {
    let first = pts.first()?;
    let mut bb: Vec<[f64; 2]> = first.iter().map(|&c| [c, c]).collect();
    for p in pts {
        for (b, &c) in bb.iter_mut().zip(p.iter()) {
            b[0] = b[0].min(c);
            b[1] = b[1].max(c);
        }
    }
    Some(bb)
}

/// The tail settings every report discloses, whatever the command.
pub fn disclosed_tolerances(cfg: &RunConfig) -> Result<Value, CliError> {
    let lab = cfg.lab()?;
    let tail: &TailConfig = &lab.tail;
    Ok(json!({
        "schedule": tail.schedule,
        "stab_tol": tail.stab_tol,
        "dec_tol": tail.dec_tol,
        "aux": lab.aux,
        "growth_tol": lab.growth_tol,
        "bound_exps": lab.bound_exps,
        "bisection_steps": lab.bisection_steps,
        "probe_indices": lab.probe_indices,
        "step": cfg.params.step,
        "axiom_tol": cfg.axioms.tol,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_parsing() {
        assert_eq!(Command::parse("axioms", None).unwrap(), Command::Axioms);
        assert_eq!(
            Command::parse("verify", Some("all")).unwrap(),
            Command::Verify(TheoremId::PRIMARY.to_vec())
        );
        assert_eq!(
            Command::parse("search", Some("diameter-3r")).unwrap(),
            Command::Search(TheoremId::Diameter3r)
        );
        assert!(Command::parse("verify", None).is_err());
        assert!(Command::parse("member", Some("x")).is_err());
        assert!(Command::parse("frobnicate", None).is_err());
        assert_eq!(
            Command::parse("verify", Some("all")).unwrap().label(),
            "verify all"
        );
    }

    #[test]
    fn worst_status_wins() {
        assert!(Status::Violated > Status::Inconclusive && Status::Inconclusive > Status::Ok);
        assert_eq!(Status::Violated.exit_code(), 1);
        assert_eq!(Status::Inconclusive.exit_code(), 2);
    }

    #[test]
    fn bounding_box_spans_points() {
        let pts = [
            Point::new(vec![0.0, 1.0]).unwrap(),
            Point::new(vec![-1.0, 3.0]).unwrap(),
        ];
        assert_eq!(bounding_box(&pts), Some(vec![[-1.0, 0.0], [1.0, 3.0]]));
        assert_eq!(bounding_box(&[]), None);
    }
}
