//! Trajectory rollouts, adversarial falsification and sampling-based
//! certificates for computed safe sets.

use cpsafe_geometry::{lp_solve, HPolytope, LpStatus, PolyUnion, Sense, Tolerances};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::mat_vec;
use crate::reach::{MultiSet, ReachError, SwitchedSystem};
use crate::stealth::{attack_vertices, ParamPolytope, StealthError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("initial state lies outside the constraint set")]
    InitialStateOutsideZ,
    #[error("unknown graph node {0}")]
    UnknownNode(usize),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Stealth(#[from] StealthError),
    #[error(transparent)]
    Geometry(#[from] cpsafe_geometry::GeometryError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackPolicy {
    /// Vertex of the stealthy set maximising a random direction.
    Extreme,
    /// Random point of the stealthy set.
    Random,
    /// The admissible attack closest to zero.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbancePolicy {
    Vertex,
    Random,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub z: Vec<Vec<f64>>,
    pub nodes: Vec<usize>,
    pub labels: Vec<String>,
    pub attacks: Vec<Vec<f64>>,
    pub disturbances: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    /// Residual outside the detector set.
    pub alarms: Vec<bool>,
    /// Whether the step injected data into a measured output. Only these
    /// steps are covered by the residual condition of the stealth set.
    pub output_attacked: Vec<bool>,
    /// Steps where no out-edge had a stealthy attack and a zero attack was
    /// applied instead.
    pub fallback_steps: Vec<usize>,
    /// First `t` with `z(t) ∉ Z`.
    pub violation_step: Option<usize>,
}

impl Trajectory {
    /// A start outside `Z`: no steps, violation at step 0.
    fn stopped(z0: Vec<f64>, xi0: usize) -> Self {
        Self {
            z: vec![z0],
            nodes: vec![xi0],
            labels: Vec::new(),
            attacks: Vec::new(),
            disturbances: Vec::new(),
            residuals: Vec::new(),
            alarms: Vec::new(),
            output_attacked: Vec::new(),
            fallback_steps: Vec::new(),
            violation_step: Some(0),
        }
    }

    /// Alarms raised on steps with an output attack.
    pub fn attack_alarms(&self) -> usize {
        self.alarms.iter().zip(&self.output_attacked).filter(|(a, b)| **a && **b).count()
    }
}

/// Precomputed data shared by many rollouts.
struct Context<'a> {
    sys: &'a SwitchedSystem,
    h_vertices: Vec<Vec<f64>>,
    h_box: (Vec<f64>, Vec<f64>),
}

impl<'a> Context<'a> {
    fn new(sys: &'a SwitchedSystem) -> Result<Self> {
        let h_vertices = sys.constraints.h.vertices(&sys.tol)?.points().to_vec();
        let bb = sys.constraints.h.bounding_box(&sys.tol)?;
        Ok(Self {
            sys,
            h_vertices,
            h_box: (bb.lo, bb.hi),
        })
    }

    fn disturbance(&self, policy: DisturbancePolicy, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match policy {
            DisturbancePolicy::Zero => vec![0.0; self.h_box.0.len()],
            DisturbancePolicy::Vertex => self.h_vertices.choose(rng).expect("H has vertices").clone(),
            DisturbancePolicy::Random => loop {
                let p: Vec<f64> = self
                    .h_box
                    .0
                    .iter()
                    .zip(&self.h_box.1)
                    .map(|(l, h)| l + rng.gen::<f64>() * (h - l))
                    .collect();
                if self.sys.constraints.h.contains_point(&p, &self.sys.tol) {
                    break p;
                }
            },
        }
    }
}

/// Picks an attack from `A(z)` under `policy`; `None` when `A(z)` is empty.
pub fn choose_attack(
    set: &ParamPolytope,
    z: &[f64],
    policy: AttackPolicy,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    let n = set.n_attack();
    if n == 0 {
        return Ok(Some(Vec::new()));
    }
    if n == 1 {
        let Some((lo, hi)) = set.interval_at(z) else {
            return Ok(None);
        };
        let a = match policy {
            AttackPolicy::Extreme => {
                if rng.gen::<bool>() {
                    hi
                } else {
                    lo
                }
            }
            AttackPolicy::Random => lo + rng.gen::<f64>() * (hi - lo),
            AttackPolicy::Zero => 0.0f64.clamp(lo, hi),
        };
        return Ok(Some(vec![a]));
    }
    let rhs = set.rhs(z);
    match policy {
        AttackPolicy::Extreme => {
            let d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let sol = lp_solve(&d, &set.ga, &rhs, Sense::Max)?;
            Ok((sol.status == LpStatus::Optimal).then_some(sol.x))
        }
        AttackPolicy::Random => {
            let verts = attack_vertices(set, z, tol)?;
            if verts.is_empty() {
                return Ok(None);
            }
            let w: Vec<f64> = verts.iter().map(|_| rng.gen::<f64>()).collect();
            let s: f64 = w.iter().sum();
            Ok(Some(
                (0..n)
                    .map(|k| verts.iter().zip(&w).map(|(v, wi)| v[k] * wi / s).sum())
                    .collect(),
            ))
        }
        AttackPolicy::Zero => {
            let p = HPolytope::new(set.ga.clone(), rhs)?;
            if p.contains_point(&vec![0.0; n], tol) {
                return Ok(Some(vec![0.0; n]));
            }
            let c = p.chebyshev(tol)?;
            Ok((c.radius >= -tol.eps_feas).then_some(c.center))
        }
    }
}

/// Simulates `t_max` steps from `(z0, ξ0)`.
///
/// Each step picks uniformly among the out-edges whose mode admits a
/// stealthy attack at the current state (a mode with an empty attack set
/// cannot run). The returned trajectory keeps going after a constraint
/// violation; `violation_step` marks the first one.
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    sys: &SwitchedSystem,
    z0: &[f64],
    xi0: usize,
    t_max: usize,
    attack_policy: AttackPolicy,
    disturbance_policy: DisturbancePolicy,
    seed: u64,
) -> Result<Trajectory> {
    let ctx = Context::new(sys)?;
    rollout_with(&ctx, z0, xi0, t_max, attack_policy, disturbance_policy, seed)
}

fn rollout_with(
    ctx: &Context,
    z0: &[f64],
    xi0: usize,
    t_max: usize,
    attack_policy: AttackPolicy,
    disturbance_policy: DisturbancePolicy,
    seed: u64,
) -> Result<Trajectory> {
    let sys = ctx.sys;
    let tol = &sys.tol;
    if xi0 >= sys.graph.nodes().len() {
        return Err(SimError::UnknownNode(xi0));
    }
    if !sys.z_set().contains_point(z0, tol) {
        return Err(SimError::InitialStateOutsideZ);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tr = Trajectory {
        z: vec![z0.to_vec()],
        nodes: vec![xi0],
        labels: Vec::new(),
        attacks: Vec::new(),
        disturbances: Vec::new(),
        residuals: Vec::new(),
        alarms: Vec::new(),
        output_attacked: Vec::new(),
        fallback_steps: Vec::new(),
        violation_step: None,
    };
    let mut z = z0.to_vec();
    let mut node = xi0;
    for t in 0..t_max {
        let mut options = Vec::new();
        for e in sys.graph.out_edges(node) {
            let md = sys.mode(&e.label)?;
            if let Some(a) = choose_attack(&md.attack, &z, attack_policy, &mut rng, tol)? {
                options.push((e, a));
            }
        }
        let (edge, a, fallback) = if options.is_empty() {
            let all: Vec<_> = sys.graph.out_edges(node).collect();
            let e = *all.choose(&mut rng).expect("validated graphs have out-edges");
            let na = sys.mode(&e.label)?.mode.n_attack();
            (e, vec![0.0; na], true)
        } else {
            let k = rng.gen_range(0..options.len());
            let (e, a) = options.swap_remove(k);
            (e, a, false)
        };
        if fallback {
            tr.fallback_steps.push(t);
        }
        let md = sys.mode(&edge.label)?;
        let eta = ctx.disturbance(disturbance_policy, &mut rng);
        let r = md.mode.residual(&z, &a, &eta);
        tr.alarms.push(sys.detector.alarm(&r));
        tr.output_attacked.push(!fallback && md.mode.gamma_y.ncols() > 0);
        tr.residuals.push(r);
        z = md.mode.step(&z, &a, &eta);
        node = edge.dst;
        tr.labels.push(edge.label.clone());
        tr.attacks.push(a);
        tr.disturbances.push(eta);
        tr.z.push(z.clone());
        tr.nodes.push(node);
        if tr.violation_step.is_none() && sys.z_set().max_violation(&z) > tol.eps_set {
            tr.violation_step = Some(t + 1);
        }
    }
    Ok(tr)
}

/// Rejection sample from a union, using its bounding box.
pub fn sample_union(u: &PolyUnion, n: usize, rng: &mut ChaCha8Rng, tol: &Tolerances) -> Result<Vec<Vec<f64>>> {
    if u.is_empty(tol) || n == 0 {
        return Ok(Vec::new());
    }
    let pieces: Vec<&HPolytope> = u.pieces().iter().filter(|p| !p.is_empty(tol)).collect();
    let boxes = pieces.iter().map(|p| p.bounding_box(tol)).collect::<std::result::Result<Vec<_>, _>>()?;
    let weights: Vec<f64> = boxes.iter().map(|b| b.volume().max(1e-300)).collect();
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 1000 * n + 100_000 {
        attempts += 1;
        // Pick a piece by box volume, then a point in its box. Accept with
        // probability 1/(number of pieces covering it) to stay uniform.
        let mut r = rng.gen::<f64>() * total;
        let mut k = 0;
        while k + 1 < weights.len() && r > weights[k] {
            r -= weights[k];
            k += 1;
        }
        let b = &boxes[k];
        let x: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(l, h)| l + rng.gen::<f64>() * (h - l)).collect();
        if pieces[k].max_violation(&x) > 0.0 {
            continue;
        }
        let cover = pieces
            .iter()
            .zip(&boxes)
            .filter(|(p, bb)| {
                x.iter().enumerate().all(|(i, v)| *v >= bb.lo[i] && *v <= bb.hi[i]) && p.max_violation(&x) <= 0.0
            })
            .count()
            .max(1);
        if cover == 1 || rng.gen::<f64>() < 1.0 / cover as f64 {
            out.push(x);
        }
    }
    Ok(out)
}

/// Result of the one-step invariance check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub samples: usize,
    pub successors_checked: usize,
    pub failures: usize,
    /// Worst constraint excess among failures.
    pub worst_excess: f64,
}

/// Samples states of every node's set and checks that all successors under
/// extreme stealthy attacks and disturbance vertices land in the target
/// node's set. Edges whose mode admits no stealthy attack at the sample are
/// skipped.
pub fn invariance_certificate(
    sys: &SwitchedSystem,
    ms: &MultiSet,
    samples: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    let tol = &sys.tol;
    let ctx = Context::new(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sys.graph.nodes().len();
    let mut report = InvarianceReport {
        samples: 0,
        successors_checked: 0,
        failures: 0,
        worst_excess: 0.0,
    };
    let eps = 10.0 * tol.eps_set;
    for i in 0..n {
        let per_node = samples / n + usize::from(i < samples % n);
        let pts = sample_union(&ms.sets[i], per_node, &mut rng, tol)?;
        report.samples += pts.len();
        for z in &pts {
            for e in sys.graph.out_edges(i) {
                let md = sys.mode(&e.label)?;
                let attacks = attack_vertices(&md.attack, z, tol)?;
                let target = &ms.sets[e.dst];
                for a in &attacks {
                    let base = md.mode.step(z, a, &vec![0.0; md.mode.e.ncols()]);
                    for h in &ctx.h_vertices {
                        let eh = mat_vec(&md.mode.e, h);
                        let succ: Vec<f64> = base.iter().zip(&eh).map(|(x, y)| x + y).collect();
                        report.successors_checked += 1;
                        let excess = target
                            .pieces()
                            .iter()
                            .map(|p| p.max_violation(&succ))
                            .fold(f64::INFINITY, f64::min);
                        if excess > eps {
                            report.failures += 1;
                            report.worst_excess = report.worst_excess.max(excess);
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Outcome of adversarial rollouts started from a safe set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StealthReport {
    pub rollouts: usize,
    pub steps: usize,
    pub attack_alarms: usize,
    /// Residual excursions on the remaining steps, driven by noise and the
    /// estimation error.
    pub nominal_alarms: usize,
    pub z_exits: usize,
    pub fallback_steps: usize,
}

/// Runs `rollouts` adversarial trajectories of length `t_max` from points of
/// `safe`, starting at random nodes.
pub fn stealth_campaign(
    sys: &SwitchedSystem,
    safe: &PolyUnion,
    rollouts: usize,
    t_max: usize,
    seed: u64,
) -> Result<StealthReport> {
    let tol = &sys.tol;
    let ctx = Context::new(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = sample_union(safe, rollouts, &mut rng, tol)?;
    let mut rep = StealthReport {
        rollouts: 0,
        steps: 0,
        attack_alarms: 0,
        nominal_alarms: 0,
        z_exits: 0,
        fallback_steps: 0,
    };
    let n = sys.graph.nodes().len();
    let policies = [
        (AttackPolicy::Extreme, DisturbancePolicy::Vertex),
        (AttackPolicy::Random, DisturbancePolicy::Random),
        (AttackPolicy::Extreme, DisturbancePolicy::Random),
    ];
    for (k, z0) in starts.iter().enumerate() {
        let xi0 = rng.gen_range(0..n);
        let (ap, dp) = policies[k % policies.len()];
        let tr = rollout_with(&ctx, z0, xi0, t_max, ap, dp, seed.wrapping_add(k as u64 + 1))?;
        rep.rollouts += 1;
        rep.steps += tr.labels.len();
        rep.attack_alarms += tr.attack_alarms();
        rep.nominal_alarms += tr.alarms.iter().filter(|a| **a).count() - tr.attack_alarms();
        rep.z_exits += usize::from(tr.violation_step.is_some());
        rep.fallback_steps += tr.fallback_steps.len();
    }
    Ok(rep)
}

/// Outcome of [`falsify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub trials: usize,
    /// A start inside the safe set that left `Z` (a soundness failure).
    pub counterexample: Option<Trajectory>,
    /// Starts just outside the safe set that were driven out of `Z`.
    pub outside_escapes: usize,
}

/// Shoots rays from piece centres to the boundary of the safe set and runs
/// adversarial rollouts from just inside and just outside it.
pub fn falsify(sys: &SwitchedSystem, safe: &PolyUnion, budget: usize, t_max: usize, seed: u64) -> Result<FalsifyReport> {
    let tol = &sys.tol;
    let mut rep = FalsifyReport {
        trials: 0,
        counterexample: None,
        outside_escapes: 0,
    };
    if safe.is_empty(tol) {
        return Ok(rep);
    }
    let ctx = Context::new(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = safe
        .pieces()
        .iter()
        .map(|p| p.chebyshev(tol).map(|c| c.center))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let dim = sys.dim();
    let n = sys.graph.nodes().len();
    for trial in 0..budget {
        let k = rng.gen_range(0..centres.len());
        let c = &centres[k];
        let p = &safe.pieces()[k];
        let d: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let Some(t_edge) = ray_exit(p, c, &d) else { continue };
        let inside: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + 0.999 * t_edge * b).collect();
        let outside: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + 1.02 * t_edge * b).collect();
        let xi0 = rng.gen_range(0..n);
        let s = seed.wrapping_add(2 * trial as u64 + 1);
        rep.trials += 1;
        if !sys.z_set().contains_point(&inside, tol) {
            // The claimed safe set is not even inside Z.
            if rep.counterexample.is_none() {
                rep.counterexample = Some(Trajectory::stopped(inside, xi0));
            }
            continue;
        }
        let tr = rollout_with(&ctx, &inside, xi0, t_max, AttackPolicy::Extreme, DisturbancePolicy::Vertex, s)?;
        if tr.violation_step.is_some() && rep.counterexample.is_none() {
            rep.counterexample = Some(tr);
        }
        if !safe.contains_point(&outside, tol) && sys.z_set().contains_point(&outside, tol) {
            let tr = rollout_with(&ctx, &outside, xi0, t_max, AttackPolicy::Extreme, DisturbancePolicy::Vertex, s + 1)?;
            rep.outside_escapes += usize::from(tr.violation_step.is_some());
        }
    }
    Ok(rep)
}

/// Largest `t` with `c + t d` in `p`.
fn ray_exit(p: &HPolytope, c: &[f64], d: &[f64]) -> Option<f64> {
    let mut t = f64::INFINITY;
    for j in 0..p.n_rows() {
        let g = p.row(j);
        let gd: f64 = g.iter().zip(d).map(|(a, b)| a * b).sum();
        let gc: f64 = g.iter().zip(c).map(|(a, b)| a * b).sum();
        if gd > 1e-12 {
            t = t.min((p.offsets()[j] - gc) / gd);
        }
    }
    (t.is_finite() && t > 0.0).then_some(t)
}

/// Label of one grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridLabel {
    OutsideZ,
    /// An admissible trajectory leaves `Z` at the given step.
    Violates(usize),
    /// The adversary found no violation within the horizon.
    NoViolationFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub z: Vec<f64>,
    pub label: GridLabel,
}

/// Classifies a regular grid over the bounding box of `Z`.
///
/// Every point of `Z` is attacked by a targeted adversary for each
/// constraint row and horizon: the disturbance is the vertex that pushes
/// the row furthest at the horizon (the exact worst case for linear
/// dynamics), and the mode and stealthy attack are chosen greedily with the
/// same look-ahead. Reported violations are real trajectories, so any safe
/// point labelled `Violates` disproves the safe set.
pub fn grid_oracle(sys: &SwitchedSystem, resolution: usize, horizon: usize) -> Result<Vec<GridPoint>> {
    let tol = &sys.tol;
    let z = sys.z_set();
    let bb = z.bounding_box(tol)?;
    let dim = sys.dim();
    let oracle = Adversary::new(sys, horizon)?;
    let mut out = Vec::new();
    let total = resolution.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let p: Vec<f64> = (0..dim)
            .map(|k| {
                let i = rem % resolution;
                rem /= resolution;
                if resolution == 1 {
                    0.5 * (bb.lo[k] + bb.hi[k])
                } else {
                    bb.lo[k] + (bb.hi[k] - bb.lo[k]) * i as f64 / (resolution - 1) as f64
                }
            })
            .collect();
        let label = if z.max_violation(&p) > tol.eps_feas {
            GridLabel::OutsideZ
        } else {
            match oracle.first_violation(&p)? {
                Some(t) => GridLabel::Violates(t),
                None => GridLabel::NoViolationFound,
            }
        };
        out.push(GridPoint { z: p, label });
    }
    Ok(out)
}

/// Greedy worst-case search used by [`grid_oracle`].
pub struct Adversary<'a> {
    sys: &'a SwitchedSystem,
    horizon: usize,
    /// `look[j][k] = G_j A_0^k`, rows of `Z` pushed `k` steps ahead.
    look: Vec<Vec<Vec<f64>>>,
    /// Per mode label: `E h` for each disturbance vertex.
    eh: Vec<(String, Vec<Vec<f64>>)>,
    horizons: Vec<usize>,
}

impl<'a> Adversary<'a> {
    pub fn new(sys: &'a SwitchedSystem, horizon: usize) -> Result<Self> {
        let tol = &sys.tol;
        let z = sys.z_set();
        // Propagate with the attack-free matrix (shared by all modes).
        let a0 = &sys.modes.values().next().expect("at least one mode").mode.a;
        let mut look = Vec::with_capacity(z.n_rows());
        for j in 0..z.n_rows() {
            let mut row = z.row(j);
            let mut per = Vec::with_capacity(horizon + 1);
            for _ in 0..=horizon {
                per.push(row.clone());
                row = (0..row.len()).map(|c| (0..row.len()).map(|r| row[r] * a0[(r, c)]).sum()).collect();
            }
            look.push(per);
        }
        let hv = sys.constraints.h.vertices(tol)?.points().to_vec();
        let eh = sys
            .modes
            .iter()
            .map(|(l, md)| (l.clone(), hv.iter().map(|h| mat_vec(&md.mode.e, h)).collect()))
            .collect();
        let mut horizons: Vec<usize> = [1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 18, 22, 26, 30, 40, 50]
            .into_iter()
            .filter(|h| *h <= horizon)
            .collect();
        if !horizons.contains(&horizon) && horizon > 0 {
            horizons.push(horizon);
        }
        Ok(Self {
            sys,
            horizon,
            look,
            eh,
            horizons,
        })
    }

    /// First step at which some greedy adversarial run from `z0` leaves `Z`.
    pub fn first_violation(&self, z0: &[f64]) -> Result<Option<usize>> {
        let sys = self.sys;
        let z = sys.z_set();
        if z.max_violation(z0) > sys.tol.eps_set {
            return Ok(Some(0));
        }
        let mut best: Option<usize> = None;
        for xi0 in 0..sys.graph.nodes().len() {
            for j in 0..self.look.len() {
                for &h in &self.horizons {
                    if let Some(t) = self.run(z0, xi0, j, h)? {
                        best = Some(best.map_or(t, |b| b.min(t)));
                        if t == 1 {
                            return Ok(best);
                        }
                    }
                }
            }
        }
        Ok(best)
    }

    fn run(&self, z0: &[f64], xi0: usize, row: usize, target: usize) -> Result<Option<usize>> {
        let sys = self.sys;
        let tol = &sys.tol;
        let zset = sys.z_set();
        let mut z = z0.to_vec();
        let mut node = xi0;
        for t in 0..self.horizon.max(target) {
            let ahead = target.saturating_sub(t + 1).min(self.horizon);
            let w = &self.look[row][ahead];
            let mut best: Option<(f64, Vec<f64>, usize)> = None;
            for e in sys.graph.out_edges(node) {
                let md = sys.mode(&e.label)?;
                let attacks = attack_vertices(&md.attack, &z, tol)?;
                let eh = &self.eh.iter().find(|(l, _)| *l == e.label).expect("mode exists").1;
                for a in &attacks {
                    let base = md.mode.step(&z, a, &vec![0.0; md.mode.e.ncols()]);
                    for d in eh {
                        let next: Vec<f64> = base.iter().zip(d).map(|(x, y)| x + y).collect();
                        let score: f64 = w.iter().zip(&next).map(|(a, b)| a * b).sum::<f64>()
                            + 1e-3 * zset.max_violation(&next).max(-1.0);
                        if best.as_ref().is_none_or(|b| score > b.0) {
                            best = Some((score, next, e.dst));
                        }
                    }
                }
            }
            let Some((_, next, dst)) = best else {
                return Ok(None);
            };
            z = next;
            node = dst;
            if zset.max_violation(&z) > tol.eps_set {
                return Ok(Some(t + 1));
            }
        }
        Ok(None)
    }
}

/// Solves for the residual-free matrix product used in tests.
#[doc(hidden)]
pub fn matrix_power(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}
