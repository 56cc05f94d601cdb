//! Mixed volumes by polarization of `λ ↦ Vol(Σ λ_j K_j)`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::Zero;

use super::{Polytope, PolytopeError};
use crate::rational::{affine_rank, factorial, solve, Rational};

/// Vertices of a Minkowski combination `Σ λ_j K_j` (bodies given by point sets).
fn minkowski_points(
    bodies: &[&[Vec<Rational>]],
    lambda: &[Rational],
    dim: usize,
) -> Result<Vec<Vec<Rational>>, PolytopeError> {
    let mut acc: Vec<Vec<Rational>> = vec![vec![Rational::zero(); dim]];
    for (body, l) in bodies.iter().zip(lambda) {
        if l.is_zero() {
            continue;
        }
        let mut next: BTreeSet<Vec<Rational>> = BTreeSet::new();
        for a in &acc {
            for p in body.iter() {
                next.insert(a.iter().zip(p).map(|(x, y)| x + y * l).collect());
            }
        }
        acc = next.into_iter().collect();
        let refs: Vec<&Vec<Rational>> = acc.iter().collect();
        if acc.len() > dim + 1 && affine_rank(&refs) == dim {
            acc = Polytope::from_vertices(acc)?.vertices().to_vec();
        }
    }
    Ok(acc)
}

/// Lebesgue volume of `Σ λ_j K_j`, zero when lower-dimensional.
pub fn minkowski_volume(bodies: &[&[Vec<Rational>]], lambda: &[Rational]) -> Result<Rational, PolytopeError> {
    let dim = bodies.iter().find_map(|b| b.first().map(|p| p.len())).ok_or(PolytopeError::DegenerateInput)?;
    let pts = minkowski_points(bodies, lambda, dim)?;
    let refs: Vec<&Vec<Rational>> = pts.iter().collect();
    if affine_rank(&refs) < dim {
        return Ok(Rational::zero());
    }
    Ok(Polytope::from_vertices(pts)?.volume())
}

/// Exponent vectors of total degree `d` in `k` variables, in lexicographic order.
fn compositions(k: usize, d: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![d]];
    }
    let mut out = Vec::new();
    for first in (0..=d).rev() {
        for mut rest in compositions(k - 1, d - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `V(K_1, …, K_n)` for `n` convex bodies in ℝⁿ given as point sets
/// (lower-dimensional bodies allowed).
pub fn mixed_volume(bodies: &[&[Vec<Rational>]]) -> Result<Rational, PolytopeError> {
    let n = bodies.len();
    let dim = bodies.iter().find_map(|b| b.first().map(|p| p.len())).ok_or(PolytopeError::DegenerateInput)?;
    if n != dim {
        return Err(PolytopeError::DimensionMismatch { expected: dim, got: n });
    }
    for b in bodies {
        if b.is_empty() {
            return Err(PolytopeError::DegenerateInput);
        }
        if let Some(p) = b.iter().find(|p| p.len() != dim) {
            return Err(PolytopeError::DimensionMismatch { expected: dim, got: p.len() });
        }
    }
    // Group equal bodies so the polarization system stays small.
    let mut distinct: Vec<BTreeSet<Vec<Rational>>> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for b in bodies {
        let s: BTreeSet<Vec<Rational>> = b.iter().cloned().collect();
        if let Some(i) = distinct.iter().position(|d| *d == s) {
            mult[i] += 1;
        } else {
            distinct.push(s);
            mult.push(1);
        }
    }
    if distinct.iter().any(|s| s.len() == 1) {
        return Ok(Rational::zero());
    }
    let owned: Vec<Vec<Vec<Rational>>> = distinct.into_iter().map(|s| s.into_iter().collect()).collect();
    let refs: Vec<&[Vec<Rational>]> = owned.iter().map(|v| v.as_slice()).collect();
    let k = refs.len();
    let monos = compositions(k, n);
    // Nodes λ = α for |α| = n form a unisolvent set for homogeneous degree-n polynomials.
    let mut rows = Vec::with_capacity(monos.len());
    let mut rhs = Vec::with_capacity(monos.len());
    for node in &monos {
        let lambda: Vec<Rational> = node.iter().map(|&a| Rational::from_integer(BigInt::from(a))).collect();
        rhs.push(minkowski_volume(&refs, &lambda)?);
        rows.push(
            monos
                .iter()
                .map(|m| {
                    m.iter().zip(node).fold(Rational::from_integer(1.into()), |acc, (&e, &x)| {
                        acc * Rational::from_integer(num_traits::pow(BigInt::from(x), e))
                    })
                })
                .collect(),
        );
    }
    let coeffs = solve(rows, rhs).ok_or(PolytopeError::SingularPolarizationSystem)?;
    let idx = monos.iter().position(|m| *m == mult).expect("multiplicity vector is a monomial");
    // Vol(Σλ K) = Σ_α n!/α! · V(K^α) λ^α
    let denom_fact = mult.iter().fold(Rational::from_integer(1.into()), |acc, &m| acc * factorial(m));
    Ok(&coeffs[idx] * denom_fact / factorial(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat, rvec};

    #[test]
    fn diagonal_is_volume() {
        let sq = Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap();
        let v = sq.vertices();
        assert_eq!(mixed_volume(&[v, v]).unwrap(), int(1));
    }

    #[test]
    fn segments() {
        let a = vec![rvec(&[0, 0]), rvec(&[3, 0])];
        let b = vec![rvec(&[0, 0]), rvec(&[0, 5])];
        assert_eq!(mixed_volume(&[&a, &b]).unwrap(), rat(15, 2));
    }

    #[test]
    fn point_summand_vanishes() {
        let sq = Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap();
        let pt = vec![rvec(&[2, 3])];
        assert_eq!(mixed_volume(&[sq.vertices(), &pt]).unwrap(), int(0));
    }

    #[test]
    fn three_dim_diagonal() {
        let t = Polytope::standard_simplex(3);
        let v = t.vertices();
        assert_eq!(mixed_volume(&[v, v, v]).unwrap(), rat(1, 6));
    }
}
