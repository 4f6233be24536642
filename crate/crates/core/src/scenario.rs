//! JSON scenario files: plant, gains, detector, attacked channels and run
//! settings, in absolute coordinates around an operating point.
//!
//! ```json
//! {
//!   "name": "demo",
//!   "plant": {
//!     "A": [[0.9, 0.1], [0.1, 0.8]], "B": [[0.1], [0.0]], "C": [[0.0, 1.0]],
//!     "X": {"lo": [1, 0], "hi": [3, 2]}, "U": {"lo": [0], "hi": [2]},
//!     "Y": {"lo": [0], "hi": [2]},
//!     "V": {"lo": [-0.01, -0.01], "hi": [0.01, 0.01]}, "W": {"lo": [-0.01], "hi": [0.01]}
//!   },
//!   "operating_point": {"x": [2, 1], "u": [1]},
//!   "gains": {"k_poles": [0.7, 0.8], "l_poles": [0.86, 0.001]},
//!   "detector": {"R": {"lo": [-0.01], "hi": [0.01]}},
//!   "channels": [{"kind": "sensor", "index": 1, "bound": 0.05, "dwell": {"n_max": 2, "n_min": 1}}]
//! }
//! ```
//!
//! Constraint sets `X`, `U`, `Y` are shifted by the operating point;
//! disturbance and residual sets are taken as given.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cpsafe_geometry::{GeometryError, HPolytope, Tolerances};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::{build_dwell_graph, compose_modes, AttackGraph, Channel, ChannelKind};
use crate::model::{build_augmented_constraints, build_mode, Detector, Gains, ModelError, PlantModel};
use crate::reach::{ModeData, PsiMode, ReachError, SwitchedSystem};
use crate::stealth::{mode_attack_set, StealthError};

/// One schema or consistency problem, located by a JSON path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Issue>),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl ScenarioError {
    fn one(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid(vec![Issue {
            path: path.into(),
            message: message.into(),
        }])
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, ScenarioError::Invalid(_) | ScenarioError::Io { .. })
    }
}

impl From<GeometryError> for ScenarioError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::NumericalFailure(_) | GeometryError::EnumerationOverflow(_) => {
                ScenarioError::Numerical(e.to_string())
            }
            other => ScenarioError::one("", other.to_string()),
        }
    }
}

impl From<StealthError> for ScenarioError {
    fn from(e: StealthError) -> Self {
        match e {
            StealthError::Geometry(g) => g.into(),
            other => ScenarioError::Numerical(other.to_string()),
        }
    }
}

impl From<ReachError> for ScenarioError {
    fn from(e: ReachError) -> Self {
        match e {
            ReachError::InvalidGraph(v) => ScenarioError::Invalid(
                v.into_iter()
                    .map(|x| Issue {
                        path: "channels".into(),
                        message: x.to_string(),
                    })
                    .collect(),
            ),
            ReachError::Stealth(s) => s.into(),
            ReachError::Geometry(g) => g.into(),
            other => ScenarioError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T, E = ScenarioError> = std::result::Result<T, E>;

/// A set given as a box or as `{G, g}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    HRep(HPolytope),
}

impl SetSpec {
    pub fn to_poly(&self, path: &str) -> Result<HPolytope> {
        match self {
            SetSpec::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(ScenarioError::one(path, "lo and hi lengths differ"));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(ScenarioError::one(path, "lo exceeds hi"));
                }
                Ok(HPolytope::box_bounds(lo, hi))
            }
            SetSpec::HRep(p) => Ok(p.clone()),
        }
    }

    pub fn symmetric_box(r: &[f64]) -> Self {
        SetSpec::Box {
            lo: r.iter().map(|x| -x).collect(),
            hi: r.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "X")]
    pub x: SetSpec,
    #[serde(rename = "U")]
    pub u: SetSpec,
    #[serde(rename = "Y")]
    pub y: SetSpec,
    #[serde(rename = "V")]
    pub v: SetSpec,
    #[serde(rename = "W")]
    pub w: SetSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainsSpec {
    Matrices {
        #[serde(rename = "K")]
        k: Vec<Vec<f64>>,
        #[serde(rename = "L")]
        l: Vec<Vec<f64>>,
    },
    Poles { k_poles: Vec<f64>, l_poles: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    #[serde(rename = "R")]
    pub r: SetSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellSpec {
    pub n_max: usize,
    pub n_min: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    /// 1-based sensor or actuator index.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<DwellSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<AttackGraph>,
    /// In sweeps, `n_min = n_max + n_min_offset` (at least 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min_offset: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_max: Vec<usize>,
}

fn default_e_max() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<OperatingPoint>,
    pub gains: GainsSpec,
    pub detector: DetectorSpec,
    /// Bound on `‖e‖∞` added to the augmented constraints.
    #[serde(default = "default_e_max")]
    pub e_max: f64,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmax: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PsiMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

const REQUIRED: [&str; 3] = ["plant", "gains", "detector"];

fn matrix(rows: &[Vec<f64>], path: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(ScenarioError::one(path, "matrix is empty"));
    }
    if let Some(k) = rows.iter().position(|row| row.len() != c) {
        return Err(ScenarioError::one(format!("{path}[{k}]"), format!("expected {c} columns")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ScenarioError::one(path, "non-finite entry"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn model_issue(path: &str, e: ModelError) -> ScenarioError {
    match e {
        ModelError::Geometry(g) => g.into(),
        other => ScenarioError::one(path, other.to_string()),
    }
}

impl Scenario {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Parses and validates a scenario; schema errors carry JSON paths.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ScenarioError::one("", format!("not valid JSON: {e}")))?;
        let Some(obj) = value.as_object() else {
            return Err(ScenarioError::one("", "scenario must be a JSON object"));
        };
        let missing: Vec<Issue> = REQUIRED
            .iter()
            .filter(|k| !obj.contains_key(**k))
            .map(|k| Issue {
                path: (*k).to_string(),
                message: "missing required field".into(),
            })
            .collect();
        if !missing.is_empty() {
            return Err(ScenarioError::Invalid(missing));
        }
        let sc: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::one(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        let issues = sc.check();
        if !issues.is_empty() {
            return Err(ScenarioError::Invalid(issues));
        }
        Ok(sc)
    }

    /// Shape and index checks that do not need any geometry.
    pub fn check(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        let mut push = |p: String, m: String| out.push(Issue { path: p, message: m });
        let p = &self.plant;
        let nx = p.a.len();
        let nu = p.b.first().map_or(0, Vec::len);
        let ny = p.c.len();
        if nx == 0 || p.a.iter().any(|r| r.len() != nx) {
            push("plant.A".into(), "must be a non-empty square matrix".into());
        }
        if p.b.len() != nx || nu == 0 || p.b.iter().any(|r| r.len() != nu) {
            push("plant.B".into(), format!("must be {nx} × n_u with n_u ≥ 1"));
        }
        if ny == 0 || p.c.iter().any(|r| r.len() != nx) {
            push("plant.C".into(), format!("must be n_y × {nx} with n_y ≥ 1"));
        }
        let dims = [("X", &p.x, nx), ("U", &p.u, nu), ("Y", &p.y, ny), ("V", &p.v, nx), ("W", &p.w, ny)];
        for (name, s, d) in dims {
            let found = match s {
                SetSpec::Box { lo, .. } => lo.len(),
                SetSpec::HRep(h) => h.dim(),
            };
            if found != d {
                push(format!("plant.{name}"), format!("dimension {found}, expected {d}"));
            }
        }
        let rdim = match &self.detector.r {
            SetSpec::Box { lo, .. } => lo.len(),
            SetSpec::HRep(h) => h.dim(),
        };
        if rdim != ny {
            push("detector.R".into(), format!("dimension {rdim}, expected {ny}"));
        }
        if let Some(op) = &self.operating_point {
            if op.x.len() != nx {
                push("operating_point.x".into(), format!("length {}, expected {nx}", op.x.len()));
            }
            if op.u.len() != nu {
                push("operating_point.u".into(), format!("length {}, expected {nu}", op.u.len()));
            }
        }
        if !(self.e_max > 0.0) {
            push("e_max".into(), "must be positive".into());
        }
        for (k, c) in self.channels.iter().enumerate() {
            let total = match c.kind {
                ChannelKind::Sensor => ny,
                ChannelKind::Actuator => nu,
            };
            if c.index == 0 || c.index > total {
                push(format!("channels[{k}].index"), format!("{} out of range 1..={total}", c.index));
            }
            if let Some(b) = c.bound {
                if !(b > 0.0) {
                    push(format!("channels[{k}].bound"), "must be positive".into());
                }
            }
            match (&c.dwell, &c.graph) {
                (Some(_), Some(_)) => push(format!("channels[{k}]"), "give either dwell or graph, not both".into()),
                (None, None) => push(format!("channels[{k}]"), "missing dwell or graph".into()),
                (Some(d), None) if d.n_min == 0 => push(format!("channels[{k}].dwell.n_min"), "must be at least 1".into()),
                (None, Some(g)) => {
                    if let Err(v) = g.validate() {
                        for x in v {
                            push(format!("channels[{k}].graph"), x.to_string());
                        }
                    }
                    if let Err(v) = g.validate_labels(&["N".into(), "A".into()]) {
                        for x in v {
                            push(format!("channels[{k}].graph"), x.to_string());
                        }
                    }
                }
                _ => {}
            }
        }
        if let Err(e) = self.tolerances.validate() {
            push("tolerances".into(), e.to_string());
        }
        if let Some(s) = &self.sweep {
            if s.n_max.is_empty() {
                push("sweep.n_max".into(), "must not be empty".into());
            }
        }
        out
    }

    /// Plant in deviation coordinates.
    pub fn plant(&self) -> Result<PlantModel> {
        let p = &self.plant;
        let a = matrix(&p.a, "plant.A")?;
        let b = matrix(&p.b, "plant.B")?;
        let c = matrix(&p.c, "plant.C")?;
        let (xs, us) = match &self.operating_point {
            Some(op) => (op.x.clone(), op.u.clone()),
            None => (vec![0.0; a.nrows()], vec![0.0; b.ncols()]),
        };
        let ys: Vec<f64> = (0..c.nrows()).map(|i| (0..c.ncols()).map(|j| c[(i, j)] * xs[j]).sum()).collect();
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let x_set = p.x.to_poly("plant.X")?.translate(&neg(&xs));
        let u_set = p.u.to_poly("plant.U")?.translate(&neg(&us));
        let y_set = p.y.to_poly("plant.Y")?.translate(&neg(&ys));
        let plant = PlantModel {
            a,
            b,
            c,
            x_set,
            u_set,
            y_set,
            v_set: p.v.to_poly("plant.V")?,
            w_set: p.w.to_poly("plant.W")?,
        };
        for (name, s) in [
            ("plant.X", &plant.x_set),
            ("plant.U", &plant.u_set),
            ("plant.Y", &plant.y_set),
            ("plant.V", &plant.v_set),
            ("plant.W", &plant.w_set),
        ] {
            if !s.is_cset(&self.tolerances) {
                return Err(ScenarioError::one(
                    name,
                    "must be bounded and contain the operating point in its interior",
                ));
            }
        }
        Ok(plant)
    }

    pub fn gains(&self, plant: &PlantModel) -> Result<Gains> {
        match &self.gains {
            GainsSpec::Matrices { k, l } => {
                Gains::new(plant, matrix(k, "gains.K")?, matrix(l, "gains.L")?).map_err(|e| model_issue("gains", e))
            }
            GainsSpec::Poles { k_poles, l_poles } => {
                Gains::from_poles(plant, k_poles, l_poles).map_err(|e| model_issue("gains", e))
            }
        }
    }

    pub fn detector(&self) -> Result<Detector> {
        let r = self.detector.r.to_poly("detector.R")?;
        Detector::new(r, &self.tolerances).map_err(|e| model_issue("detector.R", e))
    }

    fn channels_for(&self, n_max: Option<usize>) -> Result<Vec<Channel>> {
        let mut out = Vec::new();
        for (k, c) in self.channels.iter().enumerate() {
            let graph = match (&c.graph, c.dwell, n_max) {
                (Some(g), _, _) => g.clone(),
                (None, Some(d), None) => build_dwell_graph(d.n_max, d.n_min)
                    .map_err(|e| ScenarioError::one(format!("channels[{k}].dwell"), e.to_string()))?,
                (None, Some(d), Some(n)) => {
                    let n_min = match c.n_min_offset {
                        Some(off) => (n as i64 + off).max(1) as usize,
                        None => d.n_min,
                    };
                    build_dwell_graph(n, n_min)
                        .map_err(|e| ScenarioError::one(format!("channels[{k}].dwell"), e.to_string()))?
                }
                (None, None, _) => return Err(ScenarioError::one(format!("channels[{k}]"), "missing dwell or graph")),
            };
            out.push(Channel {
                kind: c.kind,
                index: c.index,
                bound: c.bound,
                graph,
            });
        }
        Ok(out)
    }

    /// Assembles the switched system with the configured dwell patterns.
    pub fn build(&self) -> Result<SwitchedSystem> {
        self.assemble(self.channels_for(None)?)
    }

    /// As [`Scenario::build`], with every dwell-pattern channel set to
    /// `n_max` (explicit graphs are kept).
    pub fn build_with_n_max(&self, n_max: usize) -> Result<SwitchedSystem> {
        self.assemble(self.channels_for(Some(n_max))?)
    }

    /// The same plant with no attacked channel.
    pub fn build_nominal(&self) -> Result<SwitchedSystem> {
        self.assemble(Vec::new())
    }

    fn assemble(&self, channels: Vec<Channel>) -> Result<SwitchedSystem> {
        let tol = self.tolerances;
        let plant = self.plant()?;
        let gains = self.gains(&plant)?;
        let detector = self.detector()?;
        let constraints =
            build_augmented_constraints(&plant, &gains, self.e_max, &tol).map_err(|e| model_issue("plant", e))?;
        let (graph, requests) = compose_modes(&channels);
        let mut modes = BTreeMap::new();
        for req in requests {
            let mode = build_mode(&plant, &gains, &req.selection, &req.label).map_err(|e| model_issue("channels", e))?;
            let attack = mode_attack_set(&plant, &gains, &detector, &mode, &req.input_bounds, &req.output_bounds, &tol)?;
            modes.insert(req.label.clone(), ModeData { mode, attack });
        }
        Ok(SwitchedSystem::new(modes, graph, constraints, detector, tol)?)
    }

    /// `n_max` values to sweep: the configured list, else the channel
    /// dwell values.
    pub fn sweep_values(&self) -> Vec<usize> {
        match &self.sweep {
            Some(s) => s.n_max.clone(),
            None => {
                let mut v: Vec<usize> = self.channels.iter().filter_map(|c| c.dwell.map(|d| d.n_max)).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}
