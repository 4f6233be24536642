//! Impact metrics comparing an attacked safe set with the attack-free one.
//!
//! `I1` is the relative volume lost; `I2 = 1 − μ`, where `μ` is the largest
//! scaling of the nominal set that still fits in the attacked one. Both lie
//! in `[0, 1]` and equal one exactly when nothing is safe.

use cpsafe_geometry::{EqualityMode, GeometryError, HPolytope, PolyUnion, Tolerances, VolumeMode};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reach::{union_subset, ReachError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("attacked safe set is not contained in the attack-free one")]
    NotSubset,
    #[error("attack-free safe set is empty or has no interior around the origin")]
    NominalEmpty,
    #[error("{name} = {value} lies outside [0, 1] beyond tolerance")]
    OutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// How `μ` was obtained for a union.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuMode {
    Exact,
    /// Maximum over pieces: a lower bound on the union's `μ`.
    PerPieceMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub scenario: String,
    pub vol_nominal: f64,
    pub vol_attacked: f64,
    pub i1: f64,
    pub i2: f64,
    pub mu: f64,
    pub volume_mode: VolumeMode,
    pub mu_mode: MuMode,
    pub subset_mode: EqualityMode,
}

/// `max{λ ≥ 0 : λ·S1 ⊆ P}` for a convex `P` (zero unless the origin is
/// interior to `P`).
pub fn scaling_into(s1: &PolyUnion, p: &HPolytope, tol: &Tolerances) -> Result<f64> {
    if p.is_empty(tol) || p.offsets().iter().any(|g| *g <= tol.eps_feas) {
        return Ok(0.0);
    }
    let mut mu = f64::INFINITY;
    for piece in s1.pieces() {
        for j in 0..p.n_rows() {
            let h = match piece.support(&p.row(j), tol) {
                Ok(h) => h,
                Err(GeometryError::EmptySet) => continue,
                Err(e) => return Err(e.into()),
            };
            if h > 0.0 {
                mu = mu.min(p.offsets()[j] / h);
            }
        }
    }
    Ok(if mu.is_finite() { mu.max(0.0) } else { 0.0 })
}

fn check_range(name: &'static str, v: f64, eps: f64) -> Result<f64> {
    if v < -eps || v > 1.0 + eps || v.is_nan() {
        return Err(MetricsError::OutOfRange { name, value: v });
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Impact of shrinking the attack-free safe set `s0` to `s`.
pub fn impact(s0: &PolyUnion, s: &PolyUnion, tol: &Tolerances, scenario: &str) -> Result<ImpactReport> {
    if s0.is_empty(tol) {
        return Err(MetricsError::NominalEmpty);
    }
    let v0 = s0.volume(tol)?;
    if v0.value <= 0.0 {
        return Err(MetricsError::NominalEmpty);
    }
    if s.is_empty(tol) {
        return Ok(ImpactReport {
            scenario: scenario.to_string(),
            vol_nominal: v0.value,
            vol_attacked: 0.0,
            i1: 1.0,
            i2: 1.0,
            mu: 0.0,
            volume_mode: v0.mode,
            mu_mode: MuMode::Exact,
            subset_mode: EqualityMode::Exact,
        });
    }
    let (sub, subset_mode) = union_subset(s, s0, tol).map_err(|e| match e {
        ReachError::Geometry(g) => MetricsError::Geometry(g),
        other => MetricsError::Geometry(GeometryError::NumericalFailure(other.to_string())),
    })?;
    if !sub {
        return Err(MetricsError::NotSubset);
    }
    if let Ok((true, EqualityMode::Exact)) = union_subset(s0, s, tol) {
        return Ok(ImpactReport {
            scenario: scenario.to_string(),
            vol_nominal: v0.value,
            vol_attacked: v0.value,
            i1: 0.0,
            i2: 0.0,
            mu: 1.0,
            volume_mode: v0.mode,
            mu_mode: MuMode::Exact,
            subset_mode,
        });
    }
    let v = s.volume(tol)?;
    let sampled = v.mode == VolumeMode::Sampled || v0.mode == VolumeMode::Sampled;
    let eps = if sampled { 3.0 * tol.eps_vol } else { 1e-9 };
    let i1 = check_range("I1", (v0.value - v.value) / v0.value, eps)?;
    let mut mu = 0.0f64;
    for p in s.pieces() {
        mu = mu.max(scaling_into(s0, p, tol)?);
    }
    let mu = check_range("mu", mu, 1e-9)?;
    let i2 = check_range("I2", 1.0 - mu, 1e-9)?;
    Ok(ImpactReport {
        scenario: scenario.to_string(),
        vol_nominal: v0.value,
        vol_attacked: v.value,
        i1,
        i2,
        mu,
        volume_mode: if sampled { VolumeMode::Sampled } else { VolumeMode::Exact },
        mu_mode: if s.len() > 1 { MuMode::PerPieceMax } else { MuMode::Exact },
        subset_mode,
    })
}

/// Restricts every piece to `coords = values` (e.g. the plane `e = 0`).
pub fn slice_union(u: &PolyUnion, coords: &[usize], values: &[f64], tol: &Tolerances) -> Result<PolyUnion> {
    let dim = u.dim() - coords.len();
    let mut pieces = Vec::new();
    for p in u.pieces() {
        let s = p.slice(coords, values)?;
        if !s.is_flat(tol.eps_set, tol) {
            pieces.push(s);
        }
    }
    Ok(PolyUnion::new(dim, pieces)?.prune(tol.eps_set, tol)?)
}

/// One row of a dwell-time sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_max: usize,
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    pub vol_nominal: f64,
    pub vol_attacked: f64,
    pub mu: f64,
    pub volume_mode: VolumeMode,
    pub mu_mode: MuMode,
    pub status: String,
}

impl SweepRow {
    pub fn new(n_max: usize, r: &ImpactReport, status: String) -> Self {
        Self {
            n_max,
            i1: r.i1,
            i2: r.i2,
            vol_nominal: r.vol_nominal,
            vol_attacked: r.vol_attacked,
            mu: r.mu,
            volume_mode: r.volume_mode,
            mu_mode: r.mu_mode,
            status,
        }
    }
}

/// Writes sweep rows as CSV with the columns
/// `n_max,I1,I2,vol_nominal,vol_attacked,mu,volume_mode,mu_mode,status`.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
