//! S-metric spaces and rough convergence of sequences.
//!
//! The crate evaluates S-metrics, checks their axioms on samples, estimates
//! rough-limit sets of sequences on grids, and runs empirical checks of the
//! basic theorems about rough limits (see [`lab`]).
//!
//! ```
//! use roughlab_core::{is_r_limit, make_builtin, Outcome, Point, SequenceSpec, TailConfig};
//!
//! let space = make_builtin("paper_line").unwrap();
//! let seq = SequenceSpec::closed_form(&["pow(-1,n)/pow(2,n)"]).unwrap();
//! let p = Point::scalar(0.5).unwrap();
//! let v = is_r_limit(&space, &seq, &p, 1.0, &TailConfig::default()).unwrap();
//! assert_eq!(v.outcome, Outcome::Accepted);
//! ```

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsl;
pub mod error;
pub mod grid;
pub mod lab;
pub mod point;
pub mod rough;
pub mod sequence;
pub mod space;

pub use dsl::{EvalError, Expr, ParseError};
pub use error::{Error, Result};
pub use grid::{Grid, SearchBox};
pub use point::Point;
pub use rough::{
    boundedness_bound, cluster_points, cluster_scan, estimate_limit_set, is_cauchy, is_r_limit,
    limsup_estimate, min_roughness, rough_cauchy_degree, set_diameter, tail_sup, BoundEstimate, Cell,
    ClusterCell, Outcome, RegionEstimate, Roughness, Schedule, SequenceTail, TailConfig, TailEstimate,
    TailWindow, Verdict,
};
pub use sequence::{SequenceKind, SequenceSpec};
pub use space::{
    ball_membership, check_axioms, check_witness, make_builtin, Axiom, AxiomReport, AxiomVerdict,
    AxiomViolation, BallKind, BoxSampler, Builtin, SMetric, SMetricSpace,
};
