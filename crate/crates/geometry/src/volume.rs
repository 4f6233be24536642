use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hpoly::HPolytope;
use crate::union::PolyUnion;
use crate::vpoly::{full_dim_hull, VPolytope};
use crate::{Result, Tolerances};

/// Largest union handled by exact inclusion-exclusion.
const EXACT_UNION_PIECES: usize = 8;
/// Upper bound on the number of samples drawn by the estimator.
const MAX_SAMPLES: usize = 4_000_000;
const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeMode {
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionVolume {
    pub value: f64,
    pub mode: VolumeMode,
    /// Samples drawn (zero for exact results).
    pub samples: usize,
    /// Standard error of the estimate (zero for exact results).
    pub std_err: f64,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Point `index` of the Halton sequence in `[0,1)^dim`, rotated by `shift`.
pub fn halton_point(index: u64, dim: usize, shift: &[f64]) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let v = radical_inverse(index + 1, PRIMES[k % PRIMES.len()]) + shift.get(k).copied().unwrap_or(0.0);
            v - v.floor()
        })
        .collect()
}

/// Volume of the hull of `points` in `R^dim`, by cone decomposition over facets.
pub(crate) fn vertex_volume(dim: usize, points: &[Vec<f64>], tol: &Tolerances) -> Result<f64> {
    if points.len() <= dim {
        return Ok(0.0);
    }
    match dim {
        0 => Ok(1.0),
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok(hi - lo)
        }
        2 => Ok(polygon_area(points)),
        _ => {
            let v = VPolytope::new(dim, points.to_vec());
            let c = v.centroid();
            let k = v.len();
            let centred = nalgebra::DMatrix::from_fn(k, dim, |i, j| v.points()[i][j] - c[j]);
            let sv = centred.svd(false, false).singular_values;
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            if sv.iter().filter(|s| **s > 1e-9 * smax.max(1.0)).count() < dim {
                return Ok(0.0);
            }
            let (facets, offs) = full_dim_hull(dim, v.points(), tol)?;
            let mut vol = 0.0;
            for (f, off) in facets.iter().zip(&offs) {
                let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
                let a: Vec<f64> = f.iter().map(|x| x / norm).collect();
                let b = off / norm;
                let height = b - a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
                let on: Vec<&Vec<f64>> = v
                    .points()
                    .iter()
                    .filter(|p| (a.iter().zip(p.iter()).map(|(x, y)| x * y).sum::<f64>() - b).abs() <= 1e-8 * (1.0 + b.abs()))
                    .collect();
                let basis = orth_complement(&a);
                let projected: Vec<Vec<f64>> = on
                    .iter()
                    .map(|p| basis.iter().map(|e| e.iter().zip(p.iter()).map(|(x, y)| x * y).sum()).collect())
                    .collect();
                vol += height * vertex_volume(dim - 1, &projected, tol)? / dim as f64;
            }
            Ok(vol)
        }
    }
}

/// Orthonormal basis of the hyperplane `a^⊥` (a unit-norm).
fn orth_complement(a: &[f64]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut basis: Vec<Vec<f64>> = vec![a.to_vec()];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for q in &basis {
            let p: f64 = q.iter().zip(&e).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
        let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            e.iter_mut().for_each(|x| *x /= norm);
            basis.push(e);
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

fn polygon_area(points: &[Vec<f64>]) -> f64 {
    let k = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / k;
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| {
        (a.1 - cy)
            .atan2(a.0 - cx)
            .total_cmp(&(b.1 - cy).atan2(b.0 - cx))
    });
    // Interior points would break the shoelace formula; keep the hull only.
    let hull = monotone_chain(&mut pts);
    let mut area = 0.0;
    for i in 0..hull.len() {
        let (x0, y0) = hull[i];
        let (x1, y1) = hull[(i + 1) % hull.len()];
        area += x0 * y1 - x1 * y0;
    }
    area.abs() / 2.0
}

fn monotone_chain(pts: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter() {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn exact_union_volume(pieces: &[HPolytope], tol: &Tolerances) -> Result<f64> {
    // Inclusion-exclusion, skipping supersets of empty intersections.
    fn recurse(
        pieces: &[HPolytope],
        start: usize,
        current: Option<&HPolytope>,
        depth: usize,
        tol: &Tolerances,
        acc: &mut f64,
    ) -> Result<()> {
        for i in start..pieces.len() {
            let next = match current {
                None => pieces[i].clone(),
                Some(c) => c.intersect(&pieces[i])?,
            };
            if next.is_flat(1e-12, tol) {
                continue;
            }
            let v = next.volume(tol)?;
            let sign = if depth % 2 == 0 { 1.0 } else { -1.0 };
            *acc += sign * v;
            recurse(pieces, i + 1, Some(&next), depth + 1, tol, acc)?;
        }
        Ok(())
    }
    let mut acc = 0.0;
    recurse(pieces, 0, None, 0, tol, &mut acc)?;
    Ok(acc.max(0.0))
}

/// Volume of a union of polytopes.
///
/// Small unions are measured exactly by inclusion-exclusion. Larger ones use
/// a randomly shifted Halton sequence over the bounding box, drawing enough
/// points for a 95% relative error of `eps_vol`.
pub fn union_volume(u: &PolyUnion, tol: &Tolerances) -> Result<UnionVolume> {
    let pieces: Vec<&HPolytope> = u.pieces().iter().filter(|p| !p.is_flat(1e-12, tol)).collect();
    if pieces.is_empty() {
        return Ok(UnionVolume {
            value: 0.0,
            mode: VolumeMode::Exact,
            samples: 0,
            std_err: 0.0,
        });
    }
    if pieces.len() <= EXACT_UNION_PIECES {
        let owned: Vec<HPolytope> = pieces.iter().map(|p| (*p).clone()).collect();
        return Ok(UnionVolume {
            value: exact_union_volume(&owned, tol)?,
            mode: VolumeMode::Exact,
            samples: 0,
            std_err: 0.0,
        });
    }
    let boxes = pieces.iter().map(|p| p.bounding_box(tol)).collect::<Result<Vec<_>>>()?;
    let bb = boxes.iter().skip(1).fold(boxes[0].clone(), |acc, b| acc.hull(b));
    let box_vol = bb.volume();
    let dim = u.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(tol.rng_seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();

    let mut hits = 0usize;
    let mut n = 0usize;
    let mut target = tol.mc_samples;
    let z = 1.96;
    loop {
        while n < target {
            let s = halton_point(n as u64, dim, &shift);
            let x: Vec<f64> = (0..dim).map(|k| bb.lo[k] + s[k] * (bb.hi[k] - bb.lo[k])).collect();
            let inside = pieces.iter().zip(&boxes).any(|(p, b)| {
                (0..dim).all(|k| x[k] >= b.lo[k] - 1e-12 && x[k] <= b.hi[k] + 1e-12) && p.max_violation(&x) <= 0.0
            });
            if inside {
                hits += 1;
            }
            n += 1;
        }
        let p = hits as f64 / n as f64;
        if p <= 0.0 {
            break;
        }
        let needed = (z * z * (1.0 - p) / (p * tol.eps_vol * tol.eps_vol)).ceil() as usize;
        if needed <= n || n >= MAX_SAMPLES {
            break;
        }
        target = needed.min(MAX_SAMPLES);
    }
    let p = hits as f64 / n as f64;
    Ok(UnionVolume {
        value: p * box_vol,
        mode: VolumeMode::Sampled,
        samples: n,
        std_err: box_vol * (p * (1.0 - p) / n as f64).sqrt(),
    })
}
