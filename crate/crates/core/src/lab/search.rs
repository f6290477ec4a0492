use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::verify::*;
use super::{LabConfig, TheoremId, TheoremVerdict, VerificationReport};
use crate::error::{Error, Result};
use crate::grid::SearchBox;
use crate::point::Point;
use crate::rough::{estimate_limit_set, Schedule};
use crate::sequence::SequenceSpec;
use crate::space::Builtin;

/// Random instance family for the search. Sequences are
/// `c + a (-1)^n + b q^n` on one-dimensional built-in spaces, with dyadic
/// constants so that limit-set endpoints and cluster points land on the
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub spaces: Vec<Builtin>,
    /// Search box is `[-half_width, half_width]`.
    pub half_width: f64,
    pub step: f64,
    /// `r` is drawn from multiples of 1/8 in `[0, max_r]`.
    pub max_r: f64,
    pub schedule: Schedule,
    pub bound_exps: (u32, u32),
    pub closedness_probes: usize,
    pub max_shrink_steps: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            spaces: vec![
                Builtin::PaperLine,
                Builtin::MetricInducedEuclidean(1),
                Builtin::Discrete(1),
            ],
            half_width: 4.0,
            step: 1.0 / 32.0,
            max_r: 4.0,
            schedule: Schedule::doubling(4, 10).unwrap(),
            bound_exps: (6, 9),
            closedness_probes: 4,
            max_shrink_steps: 64,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.spaces.is_empty() {
            return Err(Error::invalid("generator needs at least one space"));
        }
        if let Some(b) = self.spaces.iter().find(|b| b.space().dim() != 1) {
            return Err(Error::invalid(format!(
                "generator spaces must be 1-dimensional, got {b}"
            )));
        }
        if !(self.step > 0.0 && self.half_width > 0.0 && self.max_r >= 0.0) {
            return Err(Error::invalid(
                "generator step, half_width and max_r must be positive",
            ));
        }
        Ok(())
    }

    pub fn lab_config(&self) -> LabConfig {
        LabConfig {
            bound_exps: self.bound_exps,
            ..LabConfig::default()
        }
        .with_schedule(self.schedule.clone())
    }
}

/// One generated instance; replaying it reproduces its report exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchInstance {
    pub index: u64,
    pub space: Builtin,
    pub center: f64,
    pub alt: f64,
    pub decay: f64,
    pub ratio: f64,
    pub r: f64,
    pub box_center: f64,
    pub half_width: f64,
    pub perturb: f64,
}

fn instance_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn eighths(rng: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    rng.random_range(lo..=hi) as f64 / 8.0
}

fn halve(v: f64) -> f64 {
    if v.abs() <= 1.0 / 64.0 {
        0.0
    } else {
        v / 2.0
    }
}

impl SearchInstance {
    pub fn generate(theorem: TheoremId, gen: &GeneratorConfig, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(seed, index));
        let space = gen.spaces[rng.random_range(0..gen.spaces.len())];
        let center = eighths(&mut rng, -8, 8);
        let alt = eighths(&mut rng, -8, 8);
        let decay = eighths(&mut rng, -8, 8);
        let ratio = [0.5, -0.5, 0.25][rng.random_range(0..3)];
        let r = eighths(&mut rng, 0, (gen.max_r * 8.0).floor() as i32);
        let pk = (4.0 * r).floor() as i32;
        let perturb = rng.random_range(-pk..=pk) as f64 / 16.0;
        // these theorems need a classically convergent base sequence
        let alt = match theorem {
            TheoremId::BallEquality | TheoremId::Perturbation => 0.0,
            _ => alt,
        };
        SearchInstance {
            index,
            space,
            center,
            alt,
            decay,
            ratio,
            r,
            box_center: 0.0,
            half_width: gen.half_width,
            perturb,
        }
    }

    fn base_sequence(&self) -> Result<SequenceSpec> {
        SequenceSpec::closed_form(&[format!(
            "{} + {} * pow(-1, n) + {} * pow({}, n)",
            self.center, self.alt, self.decay, self.ratio
        )])
    }

    fn bounds(&self) -> Result<SearchBox> {
        SearchBox::cube(
            self.box_center - self.half_width,
            self.box_center + self.half_width,
            1,
        )
    }

    /// Runs the verifier for `theorem` on this instance.
    pub fn run(&self, theorem: TheoremId, gen: &GeneratorConfig) -> Result<VerificationReport> {
        let space = self.space.space();
        let cfg = gen.lab_config();
        let seq = self.base_sequence()?;
        let bounds = self.bounds()?;
        let step = gen.step;
        let c = Point::scalar(self.center)?;
        let mut rep = match theorem {
            TheoremId::Diameter => verify_diameter(&space, &seq, self.r, &bounds, step, &cfg),
            TheoremId::Diameter3r => verify_diameter_3r(&space, &seq, self.r, &bounds, step, &cfg),
            TheoremId::BallEquality => verify_ball_equality(&space, &seq, &c, self.r, &bounds, step, &cfg),
            TheoremId::BallEqualityWeak => {
                verify_ball_equality_weak(&space, &seq, self.r, &bounds, step, &cfg)
            }
            TheoremId::Closedness => {
                verify_closedness(&space, &seq, self.r, gen.closedness_probes, &bounds, step, &cfg)
            }
            TheoremId::Bounded => verify_r_convergent_implies_bounded(&space, &seq, self.r, Some(&c), &cfg),
            TheoremId::BoundedImpliesRough => verify_bounded_implies_rough(&space, &seq, &cfg),
            TheoremId::Perturbation => {
                let b = SequenceSpec::perturbed(seq.clone(), &[format!("{} * pow(-1, n)", self.perturb)])?;
                verify_perturbation(&space, &seq, &b, self.r, &c, &cfg)
            }
            TheoremId::DoubleLimit => {
                let region = estimate_limit_set(&space, &seq, self.r, &bounds, step, &cfg.tail)?;
                let inner = &region.inner_points;
                let (mid, xi) = match inner.len() {
                    0 => (self.center, self.center),
                    n => (inner[n / 2][0], inner[n - 1][0]),
                };
                let xi_seq =
                    SequenceSpec::closed_form(&[format!("{mid} + ({xi} - {mid}) * (1 - pow(0.5, n))")])?;
                verify_double_limit(&space, &seq, self.r, &xi_seq, &Point::scalar(xi)?, &cfg)
            }
            TheoremId::ClusterContainment => {
                verify_cluster_containment(&space, &seq, self.r, &bounds, step, &cfg)
            }
        }?;
        rep.instance.insert(
            "search_instance".into(),
            serde_json::to_value(self).expect("serializes"),
        );
        Ok(rep)
    }

    fn shrink_candidates(&self, witness_x: Option<f64>, gen: &GeneratorConfig) -> Vec<SearchInstance> {
        let mut out = Vec::new();
        let mut push = |f: &dyn Fn(&mut SearchInstance)| {
            let mut c = self.clone();
            f(&mut c);
            if c != *self {
                out.push(c);
            }
        };
        push(&|c| c.r = halve(c.r));
        push(&|c| c.alt = halve(c.alt));
        push(&|c| c.decay = halve(c.decay));
        push(&|c| c.center = halve(c.center));
        push(&|c| c.perturb = halve(c.perturb));
        if let Some(x) = witness_x {
            let min_hw = 8.0 * gen.step;
            if self.half_width / 2.0 >= min_hw {
                let snapped = (x / gen.step).round() * gen.step;
                push(&|c| {
                    c.box_center = snapped;
                    c.half_width = self.half_width / 2.0;
                });
            }
        }
        out
    }

    /// Greedy deterministic shrinking: apply the first candidate that still
    /// violates, repeat until none does.
    pub fn shrink(
        &self,
        theorem: TheoremId,
        gen: &GeneratorConfig,
        report: VerificationReport,
    ) -> Result<(SearchInstance, VerificationReport)> {
        let mut cur = (self.clone(), report);
        for _ in 0..gen.max_shrink_steps {
            let wx = cur
                .1
                .witnesses
                .first()
                .and_then(|w| w.points.first())
                .map(|p| p[0]);
            let mut advanced = false;
            for cand in cur.0.shrink_candidates(wx, gen) {
                let rep = cand.run(theorem, gen)?;
                if rep.verdict == TheoremVerdict::Violated {
                    cur = (cand, rep);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
        Ok(cur)
    }
}

/// Runs `theorem` on `budget` generated instances. Instance `i` is drawn
/// from a seed derived from `(seed, i)`, so results do not depend on how
/// the work is split across threads.
pub fn counterexample_search(
    theorem: TheoremId,
    gen: &GeneratorConfig,
    budget: usize,
    seed: u64,
) -> Result<VerificationReport> {
    gen.validate()?;
    let runs: Vec<(SearchInstance, VerificationReport)> = (0..budget as u64)
        .into_par_iter()
        .map(|i| {
            let inst = SearchInstance::generate(theorem, gen, seed, i);
            let rep = inst.run(theorem, gen)?;
            Ok((inst, rep))
        })
        .collect::<Result<_>>()?;

    let mut instance = BTreeMap::new();
    instance.insert("theorem".into(), json!(theorem));
    instance.insert("generator".into(), serde_json::to_value(gen).expect("serializes"));
    instance.insert(
        "lab".into(),
        serde_json::to_value(gen.lab_config()).expect("serializes"),
    );
    instance.insert("budget".into(), json!(budget));
    instance.insert("seed".into(), json!(seed));
    let mut rep = VerificationReport::new(theorem, instance);

    let count = |v: TheoremVerdict| runs.iter().filter(|(_, r)| r.verdict == v).count();
    let (supported, violated, inconclusive) = (
        count(TheoremVerdict::Supported),
        count(TheoremVerdict::Violated),
        count(TheoremVerdict::Inconclusive),
    );
    rep.metric("instances", budget as f64)
        .metric("supported", supported as f64)
        .metric("violated", violated as f64)
        .metric("inconclusive", inconclusive as f64);

    for (inst, r) in &runs {
        for f in &r.findings {
            if f.get("kind").and_then(|k| k.as_str()) == Some("diameter-between-2r-and-3r") {
                rep.findings.push(json!({ "instance": inst.index, "finding": f }));
            }
        }
    }

    let violating: Vec<&(SearchInstance, VerificationReport)> = runs
        .iter()
        .filter(|(_, r)| r.verdict == TheoremVerdict::Violated)
        .collect();
    if let Some((inst, first)) = violating.first() {
        let (shrunk, shrunk_rep) = inst.shrink(theorem, gen, first.clone())?;
        rep.verdict = TheoremVerdict::Violated;
        rep.reason = Some(format!(
            "{violated} of {budget} instances violate; first is instance {}",
            inst.index
        ));
        rep.witnesses = shrunk_rep.witnesses.clone();
        rep.findings.push(json!({
            "kind": "counterexample",
            "violating_instances": violating.iter().take(50).map(|(i, _)| i.index).collect::<Vec<_>>(),
            "original": inst,
            "shrunk": shrunk,
            "shrunk_report": shrunk_rep,
        }));
    } else if supported == 0 {
        rep.verdict = TheoremVerdict::Inconclusive;
        rep.reason = Some("no instance satisfied the hypotheses".into());
    }
    Ok(rep)
}
