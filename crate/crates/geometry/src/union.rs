use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hpoly::{BoundingBox, HPolytope};
use crate::volume::{halton_point, union_volume, UnionVolume};
use crate::{GeometryError, Result, Tolerances};

/// Finite union of convex polytopes in a common space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UnionJson", into = "UnionJson")]
pub struct PolyUnion {
    dim: usize,
    pieces: Vec<HPolytope>,
}

#[derive(Serialize, Deserialize)]
struct UnionJson {
    pieces: Vec<HPolytope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<UnionJson> for PolyUnion {
    type Error = GeometryError;
    fn try_from(j: UnionJson) -> Result<Self> {
        let dim = j.dim.or_else(|| j.pieces.first().map(|p| p.dim())).unwrap_or(0);
        PolyUnion::new(dim, j.pieces)
    }
}

impl From<PolyUnion> for UnionJson {
    fn from(u: PolyUnion) -> Self {
        UnionJson {
            dim: if u.pieces.is_empty() { Some(u.dim) } else { None },
            pieces: u.pieces,
        }
    }
}

impl PolyUnion {
    pub fn new(dim: usize, pieces: Vec<HPolytope>) -> Result<Self> {
        if let Some(p) = pieces.iter().find(|p| p.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Self { dim, pieces })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, pieces: Vec::new() }
    }

    pub fn single(p: HPolytope) -> Self {
        Self {
            dim: p.dim(),
            pieces: vec![p],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn pieces(&self) -> &[HPolytope] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<HPolytope> {
        self.pieces
    }

    pub fn push(&mut self, p: HPolytope) -> Result<()> {
        if p.dim() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        self.pieces.push(p);
        Ok(())
    }

    /// True when every piece is empty (vacuously for no pieces).
    pub fn is_empty(&self, tol: &Tolerances) -> bool {
        self.pieces.iter().all(|p| p.is_empty(tol))
    }

    pub fn contains_point(&self, x: &[f64], tol: &Tolerances) -> bool {
        self.pieces.iter().any(|p| p.contains_point(x, tol))
    }

    /// Drops empty pieces, pieces thinner than `min_radius`, and pieces
    /// contained in another piece.
    pub fn prune(&self, min_radius: f64, tol: &Tolerances) -> Result<PolyUnion> {
        let mut kept: Vec<(HPolytope, BoundingBox, f64)> = Vec::new();
        for p in &self.pieces {
            let c = p.chebyshev(tol)?;
            if c.radius <= min_radius {
                continue;
            }
            let r = p.remove_redundancy(tol)?;
            let bb = r.bounding_box(tol)?;
            kept.push((r, bb, c.radius));
        }
        // Larger pieces first so containment checks hit early.
        kept.sort_by(|a, b| b.1.volume().total_cmp(&a.1.volume()));
        let mut out: Vec<(HPolytope, BoundingBox)> = Vec::with_capacity(kept.len());
        for (p, bb, _) in kept {
            let mut covered = false;
            for (q, qb) in &out {
                if qb.contains_box(&bb, tol.eps_set) && q.contains_set(&p, tol)? {
                    covered = true;
                    break;
                }
            }
            if !covered {
                out.push((p, bb));
            }
        }
        Ok(Self {
            dim: self.dim,
            pieces: out.into_iter().map(|(p, _)| p).collect(),
        })
    }

    /// Replaces pairs of pieces whose union is convex by that union.
    ///
    /// Uses the envelope of two polytopes (rows of each that the other
    /// satisfies); the pair is merged only when the envelope is bounded and
    /// covered by the two pieces, so the represented set never changes by
    /// more than `eps_feas`.
    pub fn merge_convex(&self, tol: &Tolerances) -> Result<PolyUnion> {
        if self.pieces.len() >= 3 {
            if let Some(env) = envelope(&self.pieces, tol)? {
                if covers_exact(&self.pieces, &env, MERGE_BUDGET, tol)? == Some(true) {
                    return Self::new(self.dim, vec![env.remove_redundancy(tol)?]);
                }
            }
        }
        let mut pieces: Vec<(HPolytope, BoundingBox)> = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            let bb = p.bounding_box(tol)?;
            pieces.push((p.clone(), bb));
        }
        let mut i = 0;
        while i < pieces.len() {
            let mut j = i + 1;
            let mut grew = false;
            while j < pieces.len() {
                if pieces[i].1.intersects(&pieces[j].1, tol.eps_set) {
                    if let Some(m) = convex_union(&pieces[i].0, &pieces[j].0, tol)? {
                        let bb = pieces[i].1.hull(&pieces[j].1);
                        pieces.remove(j);
                        pieces[i] = (m, bb);
                        grew = true;
                        continue;
                    }
                }
                j += 1;
            }
            // A grown piece may now absorb earlier ones.
            if grew && i > 0 {
                let (m, bb) = pieces.remove(i);
                pieces.insert(0, (m, bb));
                i = 0;
                continue;
            }
            i += 1;
        }
        Ok(Self {
            dim: self.dim,
            pieces: pieces.into_iter().map(|(p, _)| p).collect(),
        })
    }

    /// Piecewise intersection with a single polytope.
    pub fn intersect_poly(&self, p: &HPolytope) -> Result<PolyUnion> {
        let pieces = self.pieces.iter().map(|q| q.intersect(p)).collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, pieces)
    }

    /// Pairwise intersection of two unions (before pruning).
    pub fn intersect(&self, other: &PolyUnion) -> Result<PolyUnion> {
        let mut pieces = Vec::with_capacity(self.len() * other.len());
        for a in &self.pieces {
            for b in &other.pieces {
                pieces.push(a.intersect(b)?);
            }
        }
        Self::new(self.dim, pieces)
    }

    pub fn union(&self, other: &PolyUnion) -> Result<PolyUnion> {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Self::new(self.dim, pieces)
    }

    pub fn bounding_box(&self, tol: &Tolerances) -> Result<BoundingBox> {
        let mut acc: Option<BoundingBox> = None;
        for p in &self.pieces {
            if p.is_empty(tol) {
                continue;
            }
            let b = p.bounding_box(tol)?;
            acc = Some(match acc {
                None => b,
                Some(a) => a.hull(&b),
            });
        }
        acc.ok_or(GeometryError::EmptySet)
    }

    pub fn volume(&self, tol: &Tolerances) -> Result<UnionVolume> {
        union_volume(self, tol)
    }

    /// `true` when each piece of `other` lies inside a single piece of `self`.
    pub fn covers_piecewise(&self, other: &PolyUnion, tol: &Tolerances) -> Result<bool> {
        for q in &other.pieces {
            if q.is_empty(tol) {
                continue;
            }
            let mut found = false;
            for p in &self.pieces {
                if p.contains_set(q, tol)? {
                    found = true;
                    break;
                }
            }
            if !found {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `Some(P ∪ Q)` when the union of two polytopes is convex.
/// Exact test of `target ⊆ ∪ pieces` by recursive region difference.
///
/// Returns `None` when more than `budget` subproblems would be needed.
pub fn covers_exact(pieces: &[HPolytope], target: &HPolytope, budget: usize, tol: &Tolerances) -> Result<Option<bool>> {
    let refs: Vec<&HPolytope> = pieces.iter().filter(|p| !p.is_empty(tol)).collect();
    let mut left = budget;
    cover_rec(target, &refs, &mut left, tol)
}

fn cover_rec(target: &HPolytope, pieces: &[&HPolytope], left: &mut usize, tol: &Tolerances) -> Result<Option<bool>> {
    let eps = 10.0 * tol.eps_feas;
    if target.is_flat(tol.eps_set, tol) {
        return Ok(Some(true));
    }
    if *left == 0 {
        return Ok(None);
    }
    *left -= 1;
    let mut live = Vec::with_capacity(pieces.len());
    for p in pieces {
        if p.contains_set_within(target, eps, tol)? {
            return Ok(Some(true));
        }
        if !target.intersect(p)?.is_flat(tol.eps_set, tol) {
            live.push(*p);
        }
    }
    let Some((first, rest)) = live.split_first() else {
        return Ok(Some(false));
    };
    // target \ first splits into disjoint parts, one per violated row.
    let mut part = target.clone();
    for j in 0..first.n_rows() {
        let r = first.row(j);
        let neg: Vec<f64> = r.iter().map(|x| -x).collect();
        let outside = part.with_row(&neg, -first.offsets()[j])?;
        match cover_rec(&outside, rest, left, tol)? {
            Some(true) => {}
            other => return Ok(other),
        }
        part = part.with_row(&r, first.offsets()[j])?;
    }
    Ok(Some(true))
}

/// Rows of each piece valid on every other piece; `None` when unbounded.
const MERGE_BUDGET: usize = 4096;

fn envelope(pieces: &[HPolytope], tol: &Tolerances) -> Result<Option<HPolytope>> {
    let eps = 10.0 * tol.eps_feas;
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for (i, a) in pieces.iter().enumerate() {
        'row: for j in 0..a.n_rows() {
            let r = a.row(j);
            for (k, b) in pieces.iter().enumerate() {
                if k == i {
                    continue;
                }
                match b.support(&r, tol) {
                    Ok(h) if h <= a.offsets()[j] + eps => {}
                    Err(GeometryError::EmptySet) => {}
                    Ok(_) | Err(GeometryError::Unbounded) => continue 'row,
                    Err(e) => return Err(e),
                }
            }
            rows.push(r);
            offs.push(a.offsets()[j]);
        }
    }
    let env = HPolytope::from_rows(pieces[0].dim(), &rows, &offs)?;
    Ok(env.is_bounded(tol).then_some(env))
}

fn convex_union(p: &HPolytope, q: &HPolytope, tol: &Tolerances) -> Result<Option<HPolytope>> {
    let eps = 10.0 * tol.eps_feas;
    if p.contains_set_within(q, eps, tol)? {
        return Ok(Some(p.clone()));
    }
    if q.contains_set_within(p, eps, tol)? {
        return Ok(Some(q.clone()));
    }
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for (a, b) in [(p, q), (q, p)] {
        for j in 0..a.n_rows() {
            let r = a.row(j);
            match b.support(&r, tol) {
                Ok(h) if h <= a.offsets()[j] + eps => {
                    rows.push(r);
                    offs.push(a.offsets()[j]);
                }
                Ok(_) | Err(GeometryError::Unbounded) => {}
                Err(GeometryError::EmptySet) => return Ok(Some(a.clone())),
                Err(e) => return Err(e),
            }
        }
    }
    let env = HPolytope::from_rows(p.dim(), &rows, &offs)?;
    if !env.is_bounded(tol) {
        return Ok(None);
    }
    // env \ P is covered by the parts of env violating one row of P; each
    // part must lie in Q.
    for j in 0..p.n_rows() {
        let neg: Vec<f64> = p.row(j).iter().map(|x| -x).collect();
        let part = env.with_row(&neg, -p.offsets()[j])?;
        if part.is_flat(eps, tol) {
            continue;
        }
        if !q.contains_set_within(&part, eps, tol)? {
            return Ok(None);
        }
    }
    Ok(Some(env.remove_redundancy(tol)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualityMode {
    Exact,
    Statistical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetEquality {
    pub equal: bool,
    pub mode: EqualityMode,
}

/// Compares two unions as point sets.
///
/// Piecewise containment settles most cases, then a bounded exact region
/// difference. If that runs out of budget, witness points (Chebyshev centres
/// and shrunk vertices) are tried and finally the symmetric difference is
/// sampled, flagging the result statistical.
pub fn multiset_equal(a: &PolyUnion, b: &PolyUnion, tol: &Tolerances) -> Result<SetEquality> {
    let a_empty = a.is_empty(tol);
    let b_empty = b.is_empty(tol);
    if a_empty || b_empty {
        return Ok(SetEquality {
            equal: a_empty == b_empty,
            mode: EqualityMode::Exact,
        });
    }
    if a.covers_piecewise(b, tol)? && b.covers_piecewise(a, tol)? {
        return Ok(SetEquality {
            equal: true,
            mode: EqualityMode::Exact,
        });
    }
    let mut decided = true;
    for (x, y) in [(a, b), (b, a)] {
        for p in x.pieces() {
            match covers_exact(y.pieces(), p, MERGE_BUDGET, tol)? {
                Some(true) => {}
                Some(false) => {
                    return Ok(SetEquality {
                        equal: false,
                        mode: EqualityMode::Exact,
                    })
                }
                None => decided = false,
            }
        }
    }
    if decided {
        return Ok(SetEquality {
            equal: true,
            mode: EqualityMode::Exact,
        });
    }
    for (x, y) in [(a, b), (b, a)] {
        for p in x.pieces() {
            let c = p.chebyshev(tol)?;
            if c.radius <= tol.eps_set {
                continue;
            }
            // Candidates: the centre and vertices pulled slightly inwards.
            let mut candidates = vec![c.center.clone()];
            if let Ok(v) = p.vertices(tol) {
                for vx in v.points() {
                    candidates.push(vx.iter().zip(&c.center).map(|(a, m)| a + 1e-3 * (m - a)).collect());
                }
            }
            for x0 in &candidates {
                let margin = y
                    .pieces()
                    .iter()
                    .map(|q| q.max_violation(x0))
                    .fold(f64::INFINITY, f64::min);
                if margin > tol.eps_set {
                    return Ok(SetEquality {
                        equal: false,
                        mode: EqualityMode::Exact,
                    });
                }
            }
        }
    }

    let bb = a.bounding_box(tol)?.hull(&b.bounding_box(tol)?);
    let dim = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(tol.rng_seed ^ 0x9e37_79b9);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    let n = tol.mc_samples.max(1000);
    let (mut in_union, mut in_diff) = (0usize, 0usize);
    for i in 0..n {
        let s = halton_point(i as u64, dim, &shift);
        let x: Vec<f64> = (0..dim).map(|k| bb.lo[k] + s[k] * (bb.hi[k] - bb.lo[k])).collect();
        let ina = a.contains_point(&x, tol);
        let inb = b.contains_point(&x, tol);
        if ina || inb {
            in_union += 1;
        }
        if ina != inb {
            in_diff += 1;
        }
    }
    let equal = in_union == 0 || (in_diff as f64) <= tol.eps_vol * in_union as f64 * 0.5;
    Ok(SetEquality {
        equal,
        mode: EqualityMode::Statistical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_square_equals_square() {
        let tol = Tolerances::default();
        let whole = PolyUnion::single(HPolytope::box_bounds(&[0.0, 0.0], &[2.0, 1.0]));
        let split = PolyUnion::new(
            2,
            vec![
                HPolytope::box_bounds(&[0.0, 0.0], &[1.0, 1.0]),
                HPolytope::box_bounds(&[1.0, 0.0], &[2.0, 1.0]),
            ],
        )
        .unwrap();
        let eq = multiset_equal(&whole, &split, &tol).unwrap();
        assert!(eq.equal);
        assert_eq!(eq.mode, EqualityMode::Exact);
        let other = PolyUnion::single(HPolytope::box_bounds(&[0.0, 0.0], &[1.0, 1.0]));
        let ne = multiset_equal(&whole, &other, &tol).unwrap();
        assert!(!ne.equal);
        assert_eq!(ne.mode, EqualityMode::Exact);
    }

    #[test]
    fn prune_removes_contained_and_flat() {
        let tol = Tolerances::default();
        let u = PolyUnion::new(
            2,
            vec![
                HPolytope::unit_box(2, 1.0),
                HPolytope::unit_box(2, 0.5),
                HPolytope::box_bounds(&[3.0, 0.0], &[4.0, 0.0]),
                HPolytope::empty(2),
            ],
        )
        .unwrap();
        let p = u.prune(1e-9, &tol).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn json_round_trip() {
        let u = PolyUnion::single(HPolytope::unit_box(1, 1.0));
        let s = serde_json::to_string(&u).unwrap();
        assert!(s.starts_with(r#"{"pieces":[{"G""#));
        let back: PolyUnion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
    }
}
