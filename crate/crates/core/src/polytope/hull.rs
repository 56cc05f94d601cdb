//! Brute-force facet enumeration over integer-scaled point sets.
//!
//! Desk-scale inputs (a few dozen points in dimension ≤ 4) make the
//! d-subset scan cheap; every candidate hyperplane is checked against all
//! points with checked `i128` arithmetic.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

use super::{Halfspace, PolytopeError};
use crate::rational::{lcm_of_denominators, Rational};

fn ck(v: Option<i128>) -> Result<i128, PolytopeError> {
    v.ok_or(PolytopeError::Overflow)
}

/// Fraction-free determinant with overflow detection.
pub(crate) fn det_i128(m: &[Vec<i128>]) -> Result<i128, PolytopeError> {
    let n = m.len();
    if n == 0 {
        return Ok(1);
    }
    let mut a = m.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&r| a[r][k] != 0) else {
                return Ok(0);
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t1 = ck(a[i][j].checked_mul(a[k][k]))?;
                let t2 = ck(a[i][k].checked_mul(a[k][j]))?;
                a[i][j] = ck(t1.checked_sub(t2))? / prev;
            }
        }
        prev = a[k][k];
    }
    Ok(sign * a[n - 1][n - 1])
}

fn gcd_vec(v: &[i128]) -> i128 {
    v.iter().fold(0i128, |g, &x| g.gcd(&x))
}

/// Integer coordinates `scale · p` for every point.
pub(crate) fn scale_points(points: &[Vec<Rational>]) -> Result<(BigInt, Vec<Vec<i128>>), PolytopeError> {
    let scale = lcm_of_denominators(points.iter().flatten());
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let mut row = Vec::with_capacity(p.len());
        for q in p {
            let z = q.numer() * (&scale / q.denom());
            row.push(z.to_i128().ok_or(PolytopeError::Overflow)?);
        }
        out.push(row);
    }
    Ok((scale, out))
}

fn combinations(
    n: usize,
    k: usize,
    mut f: impl FnMut(&[usize]) -> Result<(), PolytopeError>,
) -> Result<(), PolytopeError> {
    if k > n {
        return Ok(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx)?;
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return Ok(());
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub(crate) fn for_each_subset(
    n: usize,
    k: usize,
    f: impl FnMut(&[usize]) -> Result<(), PolytopeError>,
) -> Result<(), PolytopeError> {
    if k == 0 {
        let mut f = f;
        return f(&[]);
    }
    combinations(n, k, f)
}

/// Facet-defining halfspaces of conv(points). Caller guarantees the set is
/// full-dimensional.
pub(crate) fn facets_of_points(points: &[Vec<Rational>], dim: usize) -> Result<Vec<Halfspace>, PolytopeError> {
    let (scale, pts) = scale_points(points)?;
    let mut found: BTreeSet<(Vec<i64>, i128)> = BTreeSet::new();
    let mut raw: Vec<(Vec<i128>, i128)> = Vec::new();
    if dim == 1 {
        let lo = pts.iter().map(|p| p[0]).min().unwrap();
        let hi = pts.iter().map(|p| p[0]).max().unwrap();
        raw.push((vec![-1], -lo));
        raw.push((vec![1], hi));
    } else {
        for_each_subset(pts.len(), dim, |idx| {
            let base = &pts[idx[0]];
            let mut rows: Vec<Vec<i128>> = Vec::with_capacity(dim - 1);
            for &j in &idx[1..] {
                let mut r = Vec::with_capacity(dim);
                for c in 0..dim {
                    r.push(ck(pts[j][c].checked_sub(base[c]))?);
                }
                rows.push(r);
            }
            let mut normal = vec![0i128; dim];
            for c in 0..dim {
                let minor: Vec<Vec<i128>> = rows
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(k, _)| *k != c).map(|(_, v)| *v).collect())
                    .collect();
                let d = det_i128(&minor)?;
                normal[c] = if c % 2 == 0 { d } else { -d };
            }
            let g = gcd_vec(&normal);
            if g == 0 {
                return Ok(());
            }
            for v in normal.iter_mut() {
                *v /= g;
            }
            let off = dot_i(&normal, base)?;
            let mut pos = false;
            let mut neg = false;
            for p in &pts {
                let s = ck(dot_i(&normal, p)?.checked_sub(off))?;
                if s > 0 {
                    pos = true;
                } else if s < 0 {
                    neg = true;
                }
                if pos && neg {
                    return Ok(());
                }
            }
            if pos {
                for v in normal.iter_mut() {
                    *v = -*v;
                }
                raw.push((normal, -off));
            } else {
                raw.push((normal, off));
            }
            Ok(())
        })?;
    }
    let mut out = Vec::new();
    for (normal, off) in raw {
        let n64: Vec<i64> =
            normal.iter().map(|v| i64::try_from(*v).map_err(|_| PolytopeError::Overflow)).collect::<Result<_, _>>()?;
        if found.insert((n64.clone(), off)) {
            let offset = Rational::new(BigInt::from(off), scale.clone());
            out.push(Halfspace { normal: n64, offset });
        }
    }
    Ok(out)
}

fn dot_i(a: &[i128], b: &[i128]) -> Result<i128, PolytopeError> {
    let mut acc = 0i128;
    for (x, y) in a.iter().zip(b) {
        acc = ck(acc.checked_add(ck(x.checked_mul(*y))?))?;
    }
    Ok(acc)
}

/// Primitive form of an integer normal with its offset rescaled to match.
pub(crate) fn make_primitive(normal: &[i64], offset: &Rational) -> Option<Halfspace> {
    let g = normal.iter().fold(0i64, |g, &x| g.gcd(&x));
    if g == 0 {
        return None;
    }
    Some(Halfspace { normal: normal.iter().map(|v| v / g).collect(), offset: offset / BigInt::from(g) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_matches_hand_value() {
        let m = vec![vec![2, 0, 1], vec![1, 3, 2], vec![1, 1, 1]];
        assert_eq!(det_i128(&m).unwrap(), 2 + (1 - 3));
    }

    #[test]
    fn subsets_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| {
            seen.push(s.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 6);
        assert_eq!(seen.last().unwrap(), &vec![2, 3]);
    }
}
