//! TOML run configuration. Every field has an explicit default so that the
//! resolved config, embedded in each report, states every value used.

use std::path::Path;

use roughlab_core::lab::{GeneratorConfig, LabConfig};
use roughlab_core::{
    make_builtin, Expr, Point, SMetricSpace, Schedule, SearchBox, SequenceSpec, TailConfig, TailWindow,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceConfig>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub axioms: AxiomParams,
    #[serde(default)]
    pub theorems: TheoremInputs,
    #[serde(default)]
    pub search: SearchParams,
}

/// Either `builtin = "<name>"` or `expr = "<S(x,y,z)>"` with `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Grid slack factor for expression spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

/// One expression in `n` per coordinate, optionally preceded by explicit
/// head terms. `constant` replaces both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coords: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub head: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub r: f64,
    pub point: Option<Vec<f64>>,
    /// `[[lo, hi], ...]`, one pair per dimension. Defaults to `[-2, 2]^d`.
    #[serde(rename = "box")]
    pub search_box: Option<Vec<[f64; 2]>>,
    pub step: f64,
    pub eps: f64,
    /// Cauchy window; defaults to the last schedule window.
    pub window: Option<[u64; 2]>,
    pub stab_tol: f64,
    pub dec_tol: f64,
    /// Tolerance for confirming classical convergence of auxiliary sequences.
    pub aux_tol: f64,
    pub growth_tol: f64,
    /// Doubling windows `[2^k, 2^(k+1) - 1]` for `k` in this range.
    pub doubling: [u32; 2],
    /// Explicit windows; overrides `doubling` when present.
    pub windows: Option<Vec<[u64; 2]>>,
    pub bound_exps: [u32; 2],
    pub bisection_steps: u32,
}

impl Default for Params {
    fn default() -> Self {
        let lab = LabConfig::default();
        Params {
            r: 1.0,
            point: None,
            search_box: None,
            step: 0.01,
            eps: 0.01,
            window: None,
            stab_tol: lab.tail.stab_tol,
            dec_tol: lab.tail.dec_tol,
            aux_tol: lab.aux.dec_tol,
            growth_tol: lab.growth_tol,
            doubling: [4, 12],
            windows: None,
            bound_exps: [lab.bound_exps.0, lab.bound_exps.1],
            bisection_steps: lab.bisection_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxiomParams {
    pub samples: usize,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// Quadruples `(x, y, z, a)` checked before sampling.
    pub witnesses: Vec<[Vec<f64>; 4]>,
}

impl Default for AxiomParams {
    fn default() -> Self {
        AxiomParams {
            samples: 10_000,
            lo: -10.0,
            hi: 10.0,
            tol: 1e-9,
            witnesses: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremInputs {
    /// Classical limit of the sequence: the ball centre, the boundedness
    /// hint and the perturbation target.
    pub limit: Option<Vec<f64>>,
    /// Coordinates of `b_n - a_n` for the perturbation theorem.
    pub perturbation: Vec<String>,
    /// Probe sequence `xi_k` and its limit for the double-limit theorem.
    pub xi_sequence: Vec<String>,
    pub xi: Option<Vec<f64>>,
    pub closedness_probes: usize,
}

impl Default for TheoremInputs {
    fn default() -> Self {
        TheoremInputs {
            limit: None,
            perturbation: Vec::new(),
            xi_sequence: Vec::new(),
            xi: None,
            closedness_probes: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub budget: usize,
    pub generator: GeneratorConfig,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            budget: 500,
            generator: GeneratorConfig::default(),
        }
    }
}

/// Command-line overrides applied after the file is read.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(describe_toml_error(text, &e)))
    }

    /// Applies overrides and fills dimension-dependent defaults.
    pub fn resolve(mut self, ov: Overrides) -> Result<Self, CliError> {
        if let Some(seed) = ov.seed {
            self.seed = seed;
        }
        if let Some(step) = ov.step {
            self.params.step = step;
        }
        if let Some(tol) = ov.tol {
            self.params.stab_tol = tol;
            self.params.dec_tol = tol;
        }
        let dim = self.space()?.dim();
        if self.params.search_box.is_none() {
            self.params.search_box = Some(vec![[-2.0, 2.0]; dim]);
        }
        if self.params.window.is_none() {
            let last = self.schedule()?.last();
            self.params.window = Some([last.n0(), last.n1()]);
        }
        Ok(self)
    }

    pub fn space(&self) -> Result<SMetricSpace, CliError> {
        let s = &self.space;
        match (&s.builtin, &s.expr) {
            (Some(name), None) => {
                if s.dim.is_some() || s.lipschitz.is_some() {
                    return Err(field_err(
                        "space",
                        "`dim` and `lipschitz` only apply to `expr` spaces",
                    ));
                }
                make_builtin(name).map_err(|e| field_err("space.builtin", e))
            }
            (None, Some(text)) => {
                let dim = s.dim.ok_or_else(|| field_err("space", "`expr` needs `dim`"))?;
                let mut space = SMetricSpace::from_expr(text, dim).map_err(|e| field_err("space.expr", e))?;
                if let Some(lip) = s.lipschitz {
                    if !(lip >= 0.0 && lip.is_finite()) {
                        return Err(field_err("space.lipschitz", "must be finite and >= 0"));
                    }
                    space = space.with_grid_lipschitz(lip);
                }
                Ok(space)
            }
            _ => Err(field_err("space", "set exactly one of `builtin` or `expr`")),
        }
    }

    pub fn sequence(&self) -> Result<SequenceSpec, CliError> {
        let seq = self
            .sequence
            .as_ref()
            .ok_or_else(|| field_err("sequence", "this command needs a [sequence] table"))?;
        let spec = match (&seq.constant, seq.coords.is_empty()) {
            (Some(c), true) if seq.head.is_empty() => SequenceSpec::constant(&point("sequence.constant", c)?),
            (Some(_), _) => return Err(field_err("sequence", "`constant` excludes `coords` and `head`")),
            (None, true) => return Err(field_err("sequence", "set `coords` or `constant`")),
            (None, false) => {
                parse_coords("sequence.coords", &seq.coords)?;
                if seq.head.is_empty() {
                    SequenceSpec::closed_form(&seq.coords)
                } else {
                    let head = seq
                        .head
                        .iter()
                        .map(|p| point("sequence.head", p))
                        .collect::<Result<_, _>>()?;
                    SequenceSpec::explicit(head, &seq.coords)
                }
                .map_err(|e| field_err("sequence", e))?
            }
        };
        self.check_dim("sequence", spec.dim())?;
        Ok(spec)
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let p = &self.params;
        match &p.windows {
            Some(ws) => {
                let windows = ws
                    .iter()
                    .map(|&[a, b]| TailWindow::new(a, b))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| field_err("params.windows", e))?;
                Schedule::new(windows).map_err(|e| field_err("params.windows", e))
            }
            None => {
                Schedule::doubling(p.doubling[0], p.doubling[1]).map_err(|e| field_err("params.doubling", e))
            }
        }
    }

    pub fn tail(&self) -> Result<TailConfig, CliError> {
        Ok(TailConfig {
            schedule: self.schedule()?,
            stab_tol: self.params.stab_tol,
            dec_tol: self.params.dec_tol,
        })
    }

    pub fn lab(&self) -> Result<LabConfig, CliError> {
        let p = &self.params;
        let tail = self.tail()?;
        Ok(LabConfig {
            tail: tail.clone(),
            aux: tail.with_tolerances(p.aux_tol, p.aux_tol),
            growth_tol: p.growth_tol,
            bound_exps: (p.bound_exps[0], p.bound_exps[1]),
            bisection_steps: p.bisection_steps,
            ..LabConfig::default()
        })
    }

    pub fn search_box(&self) -> Result<SearchBox, CliError> {
        let bounds = self.params.search_box.clone().unwrap_or_default();
        let b = SearchBox::new(bounds).map_err(|e| field_err("params.box", e))?;
        self.check_dim("params.box", b.dim())?;
        Ok(b)
    }

    pub fn window(&self) -> Result<TailWindow, CliError> {
        let [a, b] = self
            .params
            .window
            .ok_or_else(|| field_err("params.window", "missing"))?;
        TailWindow::new(a, b).map_err(|e| field_err("params.window", e))
    }

    pub fn point(&self) -> Result<Point, CliError> {
        let p = self
            .params
            .point
            .as_ref()
            .ok_or_else(|| field_err("params.point", "this command needs a point"))?;
        self.dim_point("params.point", p)
    }

    pub fn dim_point(&self, field: &str, coords: &[f64]) -> Result<Point, CliError> {
        let p = point(field, coords)?;
        self.check_dim(field, p.dim())?;
        Ok(p)
    }

    fn check_dim(&self, field: &str, found: usize) -> Result<(), CliError> {
        let expected = self.space()?.dim();
        if found != expected {
            return Err(field_err(
                field,
                format!("has dimension {found}, space has {expected}"),
            ));
        }
        Ok(())
    }
}

pub fn parse_coords(field: &str, coords: &[String]) -> Result<(), CliError> {
    for (i, c) in coords.iter().enumerate() {
        Expr::parse(c, &["n"]).map_err(|e| field_err(&format!("{field}[{i}]"), e))?;
    }
    Ok(())
}

fn point(field: &str, coords: &[f64]) -> Result<Point, CliError> {
    Point::new(coords.to_vec()).map_err(|e| field_err(field, e))
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message();
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            format!("line {line}, column {col}: {msg}")
        }
        None => msg.to_owned(),
    }
}

/// One-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER: &str = r#"
        [space]
        builtin = "paper_line"

        [sequence]
        coords = ["pow(-1,n)/pow(2,n)"]
    "#;

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::parse(PAPER)
            .unwrap()
            .resolve(Overrides::default())
            .unwrap();
        assert_eq!(cfg.params.search_box, Some(vec![[-2.0, 2.0]]));
        assert_eq!(cfg.params.window, Some([4096, 8191]));
        assert_eq!(cfg.tail().unwrap(), TailConfig::default());
        assert_eq!(cfg.sequence().unwrap().term(2).unwrap()[0], 0.25);
    }

    #[test]
    fn overrides_apply() {
        let ov = Overrides {
            seed: Some(9),
            step: Some(0.05),
            tol: Some(1e-4),
        };
        let cfg = RunConfig::parse(PAPER).unwrap().resolve(ov).unwrap();
        assert_eq!((cfg.seed, cfg.params.step, cfg.params.dec_tol), (9, 0.05, 1e-4));
    }

    #[test]
    fn toml_errors_carry_position() {
        let err = RunConfig::parse("[space]\nbuiltin = \"paper_line\"\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3, column 1"), "{err}");
        let err = RunConfig::parse("[space\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn expression_errors_name_the_field() {
        let text = PAPER.replace("pow(-1,n)/pow(2,n)", "1 + m");
        let err = RunConfig::parse(&text).unwrap().sequence().unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("sequence.coords[0]") && msg.contains("position 4"),
            "{msg}"
        );
    }

    #[test]
    fn space_forms_are_exclusive() {
        let err = RunConfig::parse("[space]\nbuiltin = \"paper_line\"\nexpr = \"0\"\ndim = 1\n")
            .unwrap()
            .space()
            .unwrap_err();
        assert!(err.to_string().contains("exactly one"));
        let cfg = RunConfig::parse("[space]\nexpr = \"abs(x1 - z1) + abs(y1 - z1)\"\ndim = 1\n").unwrap();
        assert_eq!(cfg.space().unwrap().dim(), 1);
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
