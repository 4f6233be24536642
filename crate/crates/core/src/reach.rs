//! Forward and backward reachability over graph-constrained switching
//! dynamics, and the multi-set fixed points built from them.

use std::collections::BTreeMap;

use cpsafe_geometry::{
    covers_exact, multiset_equal, EqualityMode, GeometryError, HPolytope, PolyUnion, Tolerances, VPolytope,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack_graph::{AttackGraph, Violation};
use crate::model::{AugmentedConstraints, Detector, Mode};
use crate::stealth::{robustify, ParamPolytope, RobustifiedRow, StealthError, DEFAULT_DUAL_CAP};

/// Default iteration cap for the backward sequence.
pub const DEFAULT_LMAX: usize = 200;
/// Vertex count beyond which forward hulls switch to a template outer bound.
const FORWARD_VERTEX_CAP: usize = 160;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReachError {
    #[error("graph is invalid: {0:?}")]
    InvalidGraph(Vec<Violation>),
    #[error("mode {0:?} is not defined")]
    UnknownMode(String),
    #[error(transparent)]
    Stealth(#[from] StealthError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T, E = ReachError> = std::result::Result<T, E>;

/// A mode together with its stealthy attack set.
#[derive(Clone, Debug)]
pub struct ModeData {
    pub mode: Mode,
    pub attack: ParamPolytope,
}

/// Switching dynamics constrained by an attack graph.
#[derive(Clone, Debug)]
pub struct SwitchedSystem {
    pub modes: BTreeMap<String, ModeData>,
    pub graph: AttackGraph,
    pub constraints: AugmentedConstraints,
    pub detector: Detector,
    pub tol: Tolerances,
    pub dual_cap: usize,
}

impl SwitchedSystem {
    pub fn new(
        modes: BTreeMap<String, ModeData>,
        graph: AttackGraph,
        constraints: AugmentedConstraints,
        detector: Detector,
        tol: Tolerances,
    ) -> Result<Self> {
        let known: Vec<String> = modes.keys().cloned().collect();
        graph.validate_labels(&known).map_err(ReachError::InvalidGraph)?;
        Ok(Self {
            modes,
            graph,
            constraints,
            detector,
            tol,
            dual_cap: DEFAULT_DUAL_CAP,
        })
    }

    pub fn mode(&self, label: &str) -> Result<&ModeData> {
        self.modes.get(label).ok_or_else(|| ReachError::UnknownMode(label.to_string()))
    }

    pub fn z_set(&self) -> &HPolytope {
        &self.constraints.z
    }

    pub fn dim(&self) -> usize {
        self.constraints.z.dim()
    }
}

/// How backward images of unions are represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PsiMode {
    /// Exact union over worst-case affine pieces, including the region
    /// where no stealthy attack exists.
    #[default]
    Exact,
    /// One polytope per node: a single affine bound per row, chosen to keep
    /// the largest inscribed ball. Always a subset of the exact result.
    ConvexInner,
}

impl std::str::FromStr for PsiMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact" => Ok(PsiMode::Exact),
            "convex-inner" => Ok(PsiMode::ConvexInner),
            other => Err(format!("unknown mode {other:?} (expected exact or convex-inner)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "iteration", rename_all = "snake_case")]
pub enum ReachStatus {
    /// `B_{k+1} = B_k` at the given `k`.
    Converged(usize),
    IterationCapReached(usize),
    /// Some node's set became empty at the given iteration.
    Empty(usize),
}

/// One set per graph node, in node order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSet {
    pub sets: Vec<PolyUnion>,
}

impl MultiSet {
    pub fn uniform(n: usize, set: PolyUnion) -> Self {
        Self { sets: vec![set; n] }
    }

    /// JSON-friendly map from node name to set.
    pub fn named(&self, graph: &AttackGraph) -> BTreeMap<String, PolyUnion> {
        graph.nodes().iter().cloned().zip(self.sets.iter().cloned()).collect()
    }
}

/// Per-iteration record of the backward sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationInfo {
    pub iteration: usize,
    pub pieces: Vec<usize>,
    /// `B_{l+1} ⊆ B_l` for every node.
    pub nested: bool,
    pub nested_mode: EqualityMode,
}

#[derive(Clone, Debug)]
pub struct ReachResult {
    pub multiset: MultiSet,
    pub status: ReachStatus,
    pub safe_set: PolyUnion,
    pub equality_mode: EqualityMode,
    /// Pieces were dropped or the iteration was truncated.
    pub underapproximation: bool,
    pub psi_mode: PsiMode,
    pub history: Vec<IterationInfo>,
    pub diagnostics: Vec<String>,
}

/// Half-space row over `z` as `(normal, offset)`.
type Row = (Vec<f64>, f64);

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn row_times(row: &[f64], m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| row[i] * m[(i, j)]).sum()).collect()
}

/// Keeps the tightest offset among forms with equal normals.
fn dedupe_forms(forms: &[(Vec<f64>, f64)]) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
    for (c, d) in forms {
        match out
            .iter_mut()
            .find(|(c2, _)| c2.iter().zip(c).all(|(a, b)| (a - b).abs() < 1e-12))
        {
            Some(slot) => slot.1 = slot.1.min(*d),
            None => out.push((c.clone(), *d)),
        }
    }
    out
}

/// The constraint rows a piece imposes one step back under a mode.
struct PieceRows {
    fixed: Vec<Row>,
    /// Each entry is a disjunction: at least one of the rows must hold.
    split: Vec<Vec<Row>>,
}

fn backward_rows(sys: &SwitchedSystem, md: &ModeData, piece: &HPolytope) -> Result<PieceRows> {
    let tol = &sys.tol;
    let mode = &md.mode;
    let mut fixed = Vec::new();
    let mut split = Vec::new();
    let mut cache: Vec<(Vec<f64>, RobustifiedRow)> = Vec::new();
    for j in 0..piece.n_rows() {
        let g = piece.row(j);
        let lhs = row_times(&g, &mode.a);
        let dist = sys.constraints.h.support(&row_times(&g, &mode.e), tol)?;
        let rhs = piece.offsets()[j] - dist;
        let q = row_times(&g, &mode.b);
        if q.iter().all(|v| v.abs() < 1e-14) {
            fixed.push((lhs, rhs));
            continue;
        }
        let rob = match cache.iter().find(|(k, _)| k.iter().zip(&q).all(|(a, b)| (a - b).abs() < 1e-14)) {
            Some((_, r)) => r.clone(),
            None => {
                let r = robustify(&q, &md.attack, sys.dual_cap)?;
                cache.push((q.clone(), r.clone()));
                r
            }
        };
        let options: Vec<Row> = dedupe_forms(&rob.forms)
            .into_iter()
            .map(|(c, d)| (lhs.iter().zip(&c).map(|(a, b)| a + b).collect(), rhs - d))
            .collect();
        if options.len() == 1 {
            fixed.push(options.into_iter().next().expect("one option"));
        } else {
            split.push(options);
        }
    }
    Ok(PieceRows { fixed, split })
}

fn with_rows(base: &HPolytope, rows: &[Row]) -> Result<HPolytope> {
    if rows.is_empty() {
        return Ok(base.clone());
    }
    let extra = HPolytope::from_rows(
        base.dim(),
        &rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.1).collect::<Vec<_>>(),
    )?;
    Ok(base.intersect(&extra)?)
}

/// Radius below which a piece counts as having no interior.
fn flat_radius(tol: &Tolerances) -> f64 {
    tol.eps_set
}

/// Rows of the region where the attack set of the mode is nonempty, or
/// `None` when it is empty everywhere.
fn feasible_rows(sys: &SwitchedSystem, md: &ModeData) -> Result<Option<Vec<Row>>> {
    if md.mode.n_attack() == 0 {
        return Ok(Some(Vec::new()));
    }
    let q = vec![0.0; md.mode.n_attack()];
    let rob = robustify(&q, &md.attack, sys.dual_cap)?;
    let mut rows = Vec::new();
    for (p, s) in &rob.infeasible {
        if p.iter().all(|v| v.abs() < 1e-14) {
            if *s > sys.tol.eps_feas {
                return Ok(None);
            }
            continue;
        }
        // Reaches into the attack-free region by the same margin that
        // region is shrunk by, so the two parts share a facet.
        rows.push((p.iter().map(|v| -v).collect(), -(s - sys.tol.eps_set)));
    }
    Ok(Some(rows))
}

/// Region of `clip` where the attack set of the mode is empty, as pieces.
fn infeasible_region(sys: &SwitchedSystem, md: &ModeData, clip: &HPolytope) -> Result<Vec<HPolytope>> {
    if md.mode.n_attack() == 0 {
        return Ok(Vec::new());
    }
    let q = vec![0.0; md.mode.n_attack()];
    let rob = robustify(&q, &md.attack, sys.dual_cap)?;
    let mut out = Vec::new();
    for (p, s) in &rob.infeasible {
        // Strict inequality p·z < s, kept closed with a small margin.
        let neg: Vec<f64> = p.to_vec();
        let piece = with_rows(clip, &[(neg, s - sys.tol.eps_set)])?;
        if !piece.is_flat(flat_radius(&sys.tol), &sys.tol) {
            out.push(piece);
        }
    }
    Ok(out)
}

/// Outcome of one backward map.
#[derive(Clone, Debug)]
pub struct PsiOutput {
    pub set: PolyUnion,
    /// Pieces were discarded to respect the piece cap.
    pub truncated: bool,
}

/// One-step backward map `Ψ(σ, S)`, restricted to the constraint set.
///
/// Returns the states in `Z` whose successors under mode `label` lie in `S`
/// for every stealthy attack and every disturbance.
pub fn psi_backward(sys: &SwitchedSystem, label: &str, s: &PolyUnion, mode: PsiMode) -> Result<PsiOutput> {
    let md = sys.mode(label)?;
    let tol = &sys.tol;
    let z = sys.z_set();
    let mut pieces: Vec<HPolytope> = Vec::new();
    // Robust rows only need to hold where some stealthy attack exists.
    let feasible = match feasible_rows(sys, md)? {
        Some(rows) => with_rows(z, &rows)?,
        None => HPolytope::empty(z.dim()),
    };
    for piece in s.pieces() {
        if feasible.is_flat(flat_radius(tol), tol) {
            break;
        }
        let rows = backward_rows(sys, md, piece)?;
        let base = with_rows(&feasible, &rows.fixed)?;
        if base.is_flat(flat_radius(tol), tol) || covered_by_one(&base, &pieces, tol)? {
            continue;
        }
        let mut current = vec![base];
        for options in &rows.split {
            let mut next = Vec::new();
            for q in &current {
                for r in split_piece(q, options, mode, tol)? {
                    if !covered_by_one(&r, &pieces, tol)? {
                        next.push(r);
                    }
                }
            }
            current = next;
            if current.len() > 1 {
                current = simplify(PolyUnion::new(z.dim(), current)?, tol)?.into_pieces();
            }
            if current.is_empty() {
                break;
            }
        }
        pieces.extend(current);
    }
    if mode == PsiMode::Exact {
        pieces.extend(infeasible_region(sys, md, z)?);
    }
    let mut set = simplify(PolyUnion::new(z.dim(), pieces)?, tol)?;
    let mut truncated = false;
    if mode == PsiMode::ConvexInner && set.len() > 1 {
        set = keep_largest(set, 1, tol)?;
        truncated = true;
    }
    if set.len() > tol.max_union {
        set = keep_largest(set, tol.max_union, tol)?;
        truncated = true;
    }
    Ok(PsiOutput { set, truncated })
}

fn covered_by_one(p: &HPolytope, pieces: &[HPolytope], tol: &Tolerances) -> Result<bool> {
    for q in pieces {
        if q.contains_set(p, tol)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Intersects `q` with the disjunction `options`.
fn split_piece(q: &HPolytope, options: &[Row], mode: PsiMode, tol: &Tolerances) -> Result<Vec<HPolytope>> {
    // A single option already covering q settles the row.
    for (c, d) in options {
        match q.support(c, tol) {
            Ok(h) if h <= d + tol.eps_feas => return Ok(vec![q.clone()]),
            Ok(_) => {}
            Err(GeometryError::EmptySet) => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        }
    }
    // Drop options implied by another one on q.
    let mut live: Vec<bool> = vec![true; options.len()];
    for k in 0..options.len() {
        for m in 0..options.len() {
            if k == m || !live[m] || !live[k] {
                continue;
            }
            let diff: Vec<f64> = options[m].0.iter().zip(&options[k].0).map(|(a, b)| a - b).collect();
            match q.support(&diff, tol) {
                Ok(h) if h <= options[m].1 - options[k].1 + tol.eps_feas => live[k] = false,
                Ok(_) | Err(GeometryError::Unbounded) => {}
                Err(GeometryError::EmptySet) => return Ok(Vec::new()),
                Err(e) => return Err(e.into()),
            }
        }
    }
    let mut out = Vec::new();
    for (opt, _) in options.iter().zip(&live).filter(|(_, l)| **l) {
        let p = with_rows(q, std::slice::from_ref(opt))?;
        let c = p.chebyshev(tol)?;
        if c.radius > flat_radius(tol) {
            out.push((p, c.radius));
        }
    }
    if mode == PsiMode::ConvexInner {
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out.truncate(1);
    }
    Ok(out.into_iter().map(|(p, _)| p).collect())
}

/// Keeps the `n` pieces with the largest inscribed balls.
fn keep_largest(u: PolyUnion, n: usize, tol: &Tolerances) -> Result<PolyUnion> {
    let dim = u.dim();
    let mut scored = u
        .into_pieces()
        .into_iter()
        .map(|p| p.chebyshev(tol).map(|c| (p, c.radius)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(n);
    Ok(PolyUnion::new(dim, scored.into_iter().map(|(p, _)| p).collect())?)
}

/// Drops thin and covered pieces, then merges pairs with convex union.
fn simplify(u: PolyUnion, tol: &Tolerances) -> Result<PolyUnion> {
    let u = u.prune(flat_radius(tol), tol)?;
    if u.len() < 2 {
        return Ok(u);
    }
    Ok(u.merge_convex(tol)?)
}

/// Pairwise intersection of unions followed by simplification.
fn intersect_pruned(a: &PolyUnion, b: &PolyUnion, tol: &Tolerances) -> Result<PolyUnion> {
    simplify(a.intersect(b)?, tol)
}

/// `B_{l+1}^i = Z ∩ ⋂_{(i,d,σ)} Ψ(σ, B_l^d)` for every node.
pub fn backward_step(sys: &SwitchedSystem, current: &MultiSet, mode: PsiMode) -> Result<(MultiSet, bool)> {
    let tol = &sys.tol;
    let mut out = Vec::with_capacity(current.sets.len());
    let mut truncated = false;
    for i in 0..sys.graph.nodes().len() {
        let mut acc = PolyUnion::single(sys.z_set().clone());
        for e in sys.graph.out_edges(i) {
            let psi = psi_backward(sys, &e.label, &current.sets[e.dst], mode)?;
            truncated |= psi.truncated;
            acc = intersect_pruned(&acc, &psi.set, tol)?;
            if acc.len() > tol.max_union {
                acc = keep_largest(acc, tol.max_union, tol)?;
                truncated = true;
            }
            if acc.len() == 0 {
                break;
            }
        }
        out.push(acc);
    }
    Ok((MultiSet { sets: out }, truncated))
}

/// Containment `inner ⊆ outer` for unions: piecewise exact test, then a
/// sampled check flagged statistical.
const SUBSET_BUDGET: usize = 4096;

pub fn union_subset(inner: &PolyUnion, outer: &PolyUnion, tol: &Tolerances) -> Result<(bool, EqualityMode)> {
    if inner.is_empty(tol) {
        return Ok((true, EqualityMode::Exact));
    }
    if outer.covers_piecewise(inner, tol)? {
        return Ok((true, EqualityMode::Exact));
    }
    let mut decided = true;
    for p in inner.pieces() {
        match covers_exact(outer.pieces(), p, SUBSET_BUDGET, tol)? {
            Some(true) => {}
            Some(false) => return Ok((false, EqualityMode::Exact)),
            None => decided = false,
        }
    }
    if decided {
        return Ok((true, EqualityMode::Exact));
    }
    let joined = outer.union(inner)?;
    let eq = multiset_equal(&joined, outer, tol)?;
    Ok((eq.equal, eq.mode))
}

fn combine_modes(a: EqualityMode, b: EqualityMode) -> EqualityMode {
    if a == EqualityMode::Statistical || b == EqualityMode::Statistical {
        EqualityMode::Statistical
    } else {
        EqualityMode::Exact
    }
}

/// Iterates the backward sequence from `B_0^i = Z` until a fixed point, an
/// empty node, or `l_max` updates.
pub fn backward_sequence(sys: &SwitchedSystem, l_max: usize, mode: PsiMode) -> Result<ReachResult> {
    let tol = &sys.tol;
    let n = sys.graph.nodes().len();
    let mut current = MultiSet::uniform(n, PolyUnion::single(sys.z_set().clone()));
    let mut history = Vec::new();
    let mut underapproximation = false;
    let mut equality_mode = EqualityMode::Exact;
    let mut status = ReachStatus::IterationCapReached(l_max);

    for l in 0..l_max {
        let (next, truncated) = backward_step(sys, &current, mode)?;
        underapproximation |= truncated;
        let mut nested = true;
        let mut nested_mode = EqualityMode::Exact;
        let mut equal = true;
        for i in 0..n {
            let (sub, m) = union_subset(&next.sets[i], &current.sets[i], tol)?;
            nested &= sub;
            nested_mode = combine_modes(nested_mode, m);
            if equal {
                let eq = multiset_equal(&next.sets[i], &current.sets[i], tol)?;
                equal &= eq.equal;
                if eq.equal {
                    equality_mode = combine_modes(equality_mode, eq.mode);
                }
            }
        }
        history.push(IterationInfo {
            iteration: l + 1,
            pieces: next.sets.iter().map(|s| s.len()).collect(),
            nested,
            nested_mode,
        });
        let any_empty = next.sets.iter().any(|s| s.is_empty(tol));
        if any_empty {
            current = next;
            status = ReachStatus::Empty(l + 1);
            break;
        }
        if equal {
            // The earlier iterate is the fixed point; both describe the same set.
            status = ReachStatus::Converged(l);
            break;
        }
        current = next;
        equality_mode = EqualityMode::Exact;
    }
    if matches!(status, ReachStatus::IterationCapReached(_)) {
        underapproximation = true;
    }
    let mut diagnostics = Vec::new();
    if underapproximation {
        diagnostics.push("result is an underapproximation of the maximal safe set".to_string());
    }
    let safe_set = match status {
        ReachStatus::Empty(_) => PolyUnion::empty(sys.dim()),
        _ => maximal_safe_set(&current, tol)?,
    };
    Ok(ReachResult {
        multiset: current,
        status,
        safe_set,
        equality_mode,
        underapproximation,
        psi_mode: mode,
        history,
        diagnostics,
    })
}

/// Intersection over all nodes of the invariant multi-set.
pub fn maximal_safe_set(ms: &MultiSet, tol: &Tolerances) -> Result<PolyUnion> {
    let Some((first, rest)) = ms.sets.split_first() else {
        return Err(GeometryError::EmptySet.into());
    };
    let mut acc = first.prune(flat_radius(tol), tol)?;
    for s in rest {
        if s == first {
            continue;
        }
        acc = intersect_pruned(&acc, s, tol)?;
    }
    Ok(acc)
}

/// Convex hull of a point cloud as a V-polytope with only its vertices.
fn reduce_points(dim: usize, pts: Vec<Vec<f64>>, tol: &Tolerances) -> Result<(VPolytope, bool)> {
    let v = VPolytope::new(dim, pts);
    if v.len() <= dim + 1 {
        return Ok((v, false));
    }
    let h = v.hull(tol)?;
    let reduced = h.vertices(tol)?;
    if reduced.len() <= FORWARD_VERTEX_CAP {
        return Ok((reduced, false));
    }
    // Outer bound from supports in template directions.
    let dirs = template_directions(dim);
    let b: Vec<f64> = dirs
        .iter()
        .map(|d| v.points().iter().map(|p| dot(d, p)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let outer = HPolytope::from_rows(dim, &dirs, &b)?;
    Ok((outer.vertices(tol)?, true))
}

fn template_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; dim];
            d[i] = s;
            dirs.push(d);
        }
        for j in i + 1..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut d = vec![0.0; dim];
                d[i] = si;
                d[j] = sj;
                dirs.push(d);
            }
        }
    }
    dirs
}

/// One-step forward map `Φ(σ, S)` for a convex `S`, as a point set whose
/// hull is the image.
pub fn phi_forward(sys: &SwitchedSystem, label: &str, s: &VPolytope) -> Result<VPolytope> {
    let md = sys.mode(label)?;
    let tol = &sys.tol;
    let mode = &md.mode;
    let nz = sys.dim();
    let na = mode.n_attack();
    let images: Vec<Vec<f64>> = if na == 0 {
        s.points().iter().map(|z| mode.step(z, &[], &vec![0.0; mode.e.ncols()])).collect()
    } else {
        // Lift: {(z, a) : z ∈ hull(S), G_a a − H z ≤ h0}.
        let shull = s.hull(tol)?;
        let m_a = md.attack.n_rows();
        let ms = shull.n_rows();
        let lifted_a = DMatrix::from_fn(ms + m_a, nz + na, |i, j| {
            if i < ms {
                if j < nz {
                    shull.normals()[(i, j)]
                } else {
                    0.0
                }
            } else if j < nz {
                -md.attack.h[(i - ms, j)]
            } else {
                md.attack.ga[(i - ms, j - nz)]
            }
        });
        let lifted_b = [shull.offsets().to_vec(), md.attack.h0.clone()].concat();
        let lifted = HPolytope::new(lifted_a, lifted_b)?;
        let verts = match lifted.vertices(tol) {
            Ok(v) => v,
            Err(GeometryError::EmptySet) => return Ok(VPolytope::new(nz, Vec::new())),
            Err(e) => return Err(e.into()),
        };
        let zero_eta = vec![0.0; mode.e.ncols()];
        verts
            .points()
            .iter()
            .map(|p| mode.step(&p[..nz], &p[nz..], &zero_eta))
            .collect()
    };
    if images.is_empty() {
        return Ok(VPolytope::new(nz, Vec::new()));
    }
    let eh = sys.constraints.h.vertices(tol)?;
    let mut pts = Vec::with_capacity(images.len() * eh.len());
    for z in &images {
        for h in eh.points() {
            let shifted = crate::model::mat_vec(&mode.e, h);
            pts.push(z.iter().zip(&shifted).map(|(a, b)| a + b).collect());
        }
    }
    Ok(VPolytope::new(nz, pts))
}

#[derive(Clone, Debug)]
pub struct ForwardResult {
    /// Hull of `F_l^i` per node at the last iteration.
    pub sets: Vec<VPolytope>,
    pub iterations: usize,
    pub converged: bool,
    /// Some hull was replaced by a template outer bound.
    pub outer_approximation: bool,
    /// Some set left the divergence box.
    pub diverged: bool,
}

/// Forward sequence `F_0 = {0}`, `F_{l+1}^i = ⋃_{(s,i,σ)} Φ(σ, F_l^s)`,
/// tracked through convex hulls (an outer bound of the union).
pub fn forward_sequence(sys: &SwitchedSystem, l_max: usize, divergence_radius: f64) -> Result<ForwardResult> {
    let tol = &sys.tol;
    let nz = sys.dim();
    let n = sys.graph.nodes().len();
    let mut sets = vec![VPolytope::new(nz, vec![vec![0.0; nz]]); n];
    let mut outer = false;
    let mut diverged = false;
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..l_max {
        iterations += 1;
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let mut pts: Vec<Vec<f64>> = Vec::new();
            for e in sys.graph.in_edges(i) {
                let img = phi_forward(sys, &e.label, &sets[e.src])?;
                pts.extend(img.points().iter().cloned());
            }
            // Previous iterate is contained in the next one; keep it so
            // numerical noise cannot shrink the hull.
            pts.extend(sets[i].points().iter().cloned());
            let (v, o) = reduce_points(nz, pts, tol)?;
            outer |= o;
            if v.points().iter().any(|p| p.iter().any(|x| x.abs() > divergence_radius)) {
                diverged = true;
            }
            next.push(v);
        }
        let mut same = true;
        for i in 0..n {
            let a = next[i].hull(tol)?;
            let b = sets[i].hull(tol)?;
            if !(b.contains_set(&a, tol)? && a.contains_set(&b, tol)?) {
                same = false;
                break;
            }
        }
        sets = next;
        if same {
            converged = true;
            break;
        }
        if diverged {
            break;
        }
    }
    Ok(ForwardResult {
        sets,
        iterations,
        converged,
        outer_approximation: outer,
        diverged,
    })
}

/// Checks that the forward hulls stay inside `Z`; returns a warning if not.
pub fn minimal_set_diagnostic(sys: &SwitchedSystem, steps: usize) -> Result<Option<String>> {
    let fwd = forward_sequence(sys, steps, 1e3)?;
    for (i, v) in fwd.sets.iter().enumerate() {
        for p in v.points() {
            if !sys.z_set().contains_point(p, &sys.tol) {
                return Ok(Some(format!(
                    "forward reachable hull at node {} leaves Z; the safe set may be empty",
                    sys.graph.nodes()[i]
                )));
            }
        }
    }
    Ok(None)
}
