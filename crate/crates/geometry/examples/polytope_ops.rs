//! Basic polytope algebra: sums, erosion, hulls, volumes and unions.

use cpsafe_geometry::{multiset_equal, HPolytope, PolyUnion, Tolerances, VPolytope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerances::default();
    let square = HPolytope::unit_box(2, 1.0);
    let tri = VPolytope::new(2, vec![vec![0.0, 0.5], vec![-0.5, -0.5], vec![0.5, -0.5]]).hull(&tol)?;

    let sum = square.minkowski_sum(&tri, &tol)?;
    println!("square ⊕ triangle: {} facets, area {:.4}", sum.n_rows(), sum.volume(&tol)?);
    let back = sum.erode(&tri, &tol)?;
    println!("(square ⊕ triangle) ⊖ triangle is the square: {}", back.contains_set(&square, &tol)? && square.contains_set(&back, &tol)?);
    println!("support of the sum along (1,1): {:.4}", sum.support(&[1.0, 1.0], &tol)?);
    println!("μ(triangle, square) = {:.4}", tri.minkowski_distance(&square, &tol)?);

    let left = HPolytope::box_bounds(&[-1.0, -1.0], &[0.0, 1.0]);
    let right = HPolytope::box_bounds(&[0.0, -1.0], &[1.0, 1.0]);
    let halves = PolyUnion::new(2, vec![left, right])?;
    println!("two halves equal the square: {:?}", multiset_equal(&halves, &PolyUnion::single(square), &tol)?);
    println!("merged: {} piece(s), area {:.4}", halves.merge_convex(&tol)?.len(), halves.volume(&tol)?.value);
    Ok(())
}
