use num_traits::{Signed, Zero};

use super::{Halfspace, Polytope, PolytopeError};
use crate::rational::{dot_int, Rational};

/// Cuts vertex `v` at lattice distance `eps`.
///
/// The new facet has inward normal `Σ u_i`, the sum of the inward facet
/// normals at `v`; on a Delzant vertex this is the primitive vector pairing
/// to 1 with every primitive edge direction.
pub fn corner_chop(p: &Polytope, v: usize, eps: &Rational) -> Result<Polytope, PolytopeError> {
    if v >= p.vertices().len() {
        return Err(PolytopeError::NotAVertex);
    }
    if !p.is_delzant_vertex(v) {
        return Err(PolytopeError::NonDelzantVertex(v));
    }
    if eps.is_negative() {
        return Err(PolytopeError::Malformed("negative chop parameter".into()));
    }
    if eps.is_zero() {
        return Ok(p.clone());
    }
    let n = p.dim();
    let mut outward = vec![0i64; n];
    for fi in p.incident_facets(v) {
        for (o, c) in outward.iter_mut().zip(&p.halfspaces()[fi].normal) {
            *o += c;
        }
    }
    let vert = &p.vertices()[v];
    let base = dot_int(&outward, vert);
    for (w, x) in p.vertices().iter().enumerate() {
        if w == v {
            continue;
        }
        // lattice depth of w below the corner
        if &base - dot_int(&outward, x) <= *eps {
            return Err(PolytopeError::ChopTooLarge);
        }
    }
    let mut hs: Vec<Halfspace> = p.halfspaces().to_vec();
    hs.push(Halfspace::new(outward, base - eps)?);
    Polytope::from_halfspaces(n, hs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat, rvec};

    #[test]
    fn simplex_corner() {
        let s = Polytope::standard_simplex(2);
        let v = s.vertex_index(&rvec(&[0, 0])).unwrap();
        let e = rat(1, 10);
        let c = corner_chop(&s, v, &e).unwrap();
        assert_eq!(c.volume(), rat(1, 2) - &e * &e / int(2));
        assert_eq!(c.halfspaces().len(), 4);
    }

    #[test]
    fn zero_eps_is_identity() {
        let s = Polytope::standard_simplex(2);
        assert_eq!(corner_chop(&s, 0, &int(0)).unwrap(), s);
    }

    #[test]
    fn interval_shortens() {
        let i = Polytope::cube(&rvec(&[0]), &rvec(&[1])).unwrap();
        let c = corner_chop(&i, 1, &rat(1, 4)).unwrap();
        assert_eq!(c.vertices(), &[rvec(&[0]), vec![rat(3, 4)]]);
    }

    #[test]
    fn too_large() {
        let s = Polytope::standard_simplex(2);
        assert_eq!(corner_chop(&s, 0, &int(1)).unwrap_err(), PolytopeError::ChopTooLarge);
    }
}
