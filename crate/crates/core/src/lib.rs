//! Safe sets of linear control loops under stealthy false-data injection.
//!
//! A plant with observer-based output feedback is lifted to the augmented
//! state `z = (x, e)`. Each attack mode (which sensors and actuators are
//! corrupted) gives a linear map plus a state-dependent set of attacks that
//! keep the detector silent. An [`attack_graph::AttackGraph`] restricts which
//! modes may follow each other. [`reach`] computes the largest set of initial
//! states that no admissible attack word can drive out of the constraints,
//! and [`metrics`] compares it with the attack-free one.
//!
//! The usual entry point is a [`scenario::Scenario`]:
//!
//! ```no_run
//! use cpsafe::scenario::Scenario;
//! use cpsafe::reach::{backward_sequence, PsiMode};
//!
//! let sc = Scenario::from_path("crates/core/scenarios/twotank_sensor2.json").unwrap();
//! let sys = sc.build().unwrap();
//! let res = backward_sequence(&sys, 200, PsiMode::Exact).unwrap();
//! println!("{:?}, {} pieces", res.status, res.safe_set.len());
//! ```

pub mod attack_graph;
pub mod cli;
pub mod metrics;
pub mod model;
pub mod reach;
pub mod scenario;
pub mod sim;
pub mod stealth;

pub use cpsafe_geometry as geometry;
