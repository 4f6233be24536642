//! Convex polytope toolkit used by the reachability engine.
//!
//! Everything here reduces to linear programs solved by the dense simplex in
//! [`lp`]. Polytopes are stored in half-space form ([`HPolytope`]) with rows
//! normalised to unit Euclidean length, so every tolerance in [`Tolerances`]
//! is scale-free. Vertex lists ([`VPolytope`]) are produced by a double
//! description pass and are only used where a vertex view is unavoidable:
//! forward images, Minkowski sums and exact volumes.
//!
//! ```
//! use cpsafe_geometry::{HPolytope, Tolerances};
//!
//! let tol = Tolerances::default();
//! let outer = HPolytope::unit_box(2, 1.0);
//! let inner = outer.erode(&HPolytope::unit_box(2, 0.25), &tol).unwrap();
//! assert!((inner.support(&[1.0, 0.0], &tol).unwrap() - 0.75).abs() < 1e-9);
//! ```

mod dd;
mod error;
mod hpoly;
pub mod lp;
mod union;
mod volume;
mod vpoly;

pub use error::GeometryError;
pub use hpoly::{BoundingBox, Chebyshev, HPolytope};
pub use lp::{lp_solve, LpSolution, LpStatus, Sense};
pub use union::{covers_exact, multiset_equal, EqualityMode, PolyUnion, SetEquality};
pub use volume::{halton_point, union_volume, UnionVolume, VolumeMode};
pub use vpoly::VPolytope;

use serde::{Deserialize, Serialize};

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// Numerical thresholds shared by every set operation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Constraint slack accepted by LP solutions and membership tests.
    pub eps_feas: f64,
    /// Margin for set inclusion / equality on unit-normalised rows.
    pub eps_set: f64,
    /// Relative error target for sampled union volumes.
    pub eps_vol: f64,
    /// Maximum number of pieces kept in one union.
    pub max_union: usize,
    /// Minimum number of samples drawn by Monte-Carlo estimators.
    pub mc_samples: usize,
    pub rng_seed: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_feas: 1e-9,
            eps_set: 1e-7,
            eps_vol: 0.02,
            max_union: 64,
            mc_samples: 10_000,
            rng_seed: 0x5eed,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_feas > 0.0
            && self.eps_set > 0.0
            && self.eps_vol > 0.0
            && self.max_union > 0
            && self.mc_samples > 0;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidTolerances)
        }
    }
}
