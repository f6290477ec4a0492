//! Empirical checks of the basic theorems about rough limits in S-metric
//! spaces, one verifier per theorem, plus a randomized counterexample search.
//!
//! Every verifier first checks the theorem's hypotheses on the instance. A
//! hypothesis that cannot be confirmed gives [`TheoremVerdict::Inconclusive`]
//! with a reason, never a violation.

mod search;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rough::{Schedule, TailConfig, DEFAULT_GROWTH_TOL};

pub use search::{counterexample_search, GeneratorConfig, SearchInstance};
pub use verify::{
    verify_ball_equality, verify_ball_equality_weak, verify_bounded_implies_rough, verify_closedness,
    verify_cluster_containment, verify_diameter, verify_diameter_3r, verify_double_limit,
    verify_perturbation, verify_r_convergent_implies_bounded,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    /// Diameter of `LIM^r` is at most `2r`.
    Diameter,
    /// Diameter of `LIM^r` is at most `3r`, the bound the proof steps give.
    #[serde(rename = "diameter-3r")]
    Diameter3r,
    /// `B_S[x, r] = LIM^r` when `x_n -> x`.
    BallEquality,
    /// Ball equality with only `x in LIM^r` assumed.
    BallEqualityWeak,
    Closedness,
    /// Every r-convergent sequence is bounded.
    Bounded,
    /// Every bounded sequence is r-convergent for some `r`.
    BoundedImpliesRough,
    Perturbation,
    DoubleLimit,
    ClusterContainment,
}

impl TheoremId {
    /// The theorems run by `verify all`.
    pub const PRIMARY: [TheoremId; 8] = [
        TheoremId::Diameter,
        TheoremId::BallEquality,
        TheoremId::Closedness,
        TheoremId::Bounded,
        TheoremId::BoundedImpliesRough,
        TheoremId::Perturbation,
        TheoremId::DoubleLimit,
        TheoremId::ClusterContainment,
    ];

    pub const ALL: [TheoremId; 10] = [
        TheoremId::Diameter,
        TheoremId::Diameter3r,
        TheoremId::BallEquality,
        TheoremId::BallEqualityWeak,
        TheoremId::Closedness,
        TheoremId::Bounded,
        TheoremId::BoundedImpliesRough,
        TheoremId::Perturbation,
        TheoremId::DoubleLimit,
        TheoremId::ClusterContainment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Diameter => "diameter",
            TheoremId::Diameter3r => "diameter-3r",
            TheoremId::BallEquality => "ball-equality",
            TheoremId::BallEqualityWeak => "ball-equality-weak",
            TheoremId::Closedness => "closedness",
            TheoremId::Bounded => "bounded",
            TheoremId::BoundedImpliesRough => "bounded-implies-rough",
            TheoremId::Perturbation => "perturbation",
            TheoremId::DoubleLimit => "double-limit",
            TheoremId::ClusterContainment => "cluster-containment",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "diameter-2r" {
            return Ok(TheoremId::Diameter);
        }
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown theorem `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremVerdict {
    Supported,
    Violated,
    Inconclusive,
}

/// Points and indices demonstrating a violation or a failed hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub indices: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

impl Witness {
    pub(crate) fn new(label: impl Into<String>) -> Self {
        Witness {
            label: label.into(),
            points: Vec::new(),
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub(crate) fn points(mut self, pts: impl IntoIterator<Item = Point>) -> Self {
        self.points.extend(pts);
        self
    }

    pub(crate) fn indices(mut self, idx: impl IntoIterator<Item = u64>) -> Self {
        self.indices.extend(idx);
        self
    }

    pub(crate) fn values(mut self, vals: impl IntoIterator<Item = f64>) -> Self {
        self.values.extend(vals);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: TheoremId,
    /// Space, sequences, roughness, grid and every tolerance used.
    pub instance: BTreeMap<String, Value>,
    pub verdict: TheoremVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub witnesses: Vec<Witness>,
    pub metrics: BTreeMap<String, f64>,
    /// Observations worth recording that are not violations of the claim
    /// under test.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Value>,
}

impl VerificationReport {
    pub(crate) fn new(theorem: TheoremId, instance: BTreeMap<String, Value>) -> Self {
        VerificationReport {
            theorem,
            instance,
            verdict: TheoremVerdict::Supported,
            reason: None,
            witnesses: Vec::new(),
            metrics: BTreeMap::new(),
            findings: Vec::new(),
        }
    }

    pub(crate) fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_owned(), value);
        self
    }

    pub(crate) fn inconclusive(mut self, reason: impl Into<String>) -> Self {
        self.verdict = TheoremVerdict::Inconclusive;
        self.reason = Some(reason.into());
        self
    }
}

/// Tolerances and sampling choices shared by all verifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    /// Used for every membership decision about the main sequence.
    pub tail: TailConfig,
    /// Used to confirm classical convergence of auxiliary sequences
    /// (probe sequences, perturbation bases) that may converge slowly.
    pub aux: TailConfig,
    pub growth_tol: f64,
    /// Boundedness windows are `[1, 2^k]` for `k` in this range.
    pub bound_exps: (u32, u32),
    pub bisection_steps: u32,
    /// Indices `k` at which the double-limit probe sequence is sampled.
    pub probe_indices: Vec<u64>,
}

impl Default for LabConfig {
    fn default() -> Self {
        let mut probe_indices: Vec<u64> = (1..=16).collect();
        probe_indices.extend((5..=12).map(|k| 1u64 << k));
        LabConfig {
            tail: TailConfig::default(),
            aux: TailConfig::default().with_tolerances(1e-3, 1e-3),
            growth_tol: DEFAULT_GROWTH_TOL,
            bound_exps: (6, 11),
            bisection_steps: 40,
            probe_indices,
        }
    }
}

impl LabConfig {
    /// Replaces the tail schedule of both the main and auxiliary configs.
    /// They must agree, or a sequence can look convergent under one and
    /// not the other purely because of where sampling stops.
    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.tail.schedule = schedule.clone();
        self.aux.schedule = schedule;
        self
    }
}
