use num_traits::Zero;

use super::{Polytope, PolytopeError};
use crate::pl::{AffineFn, PLConvexFn};
use crate::rational::{dot, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Lebesgue measure dμ on P.
    Interior,
    /// Lattice measure dσ on ∂P.
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub enum Integrand<'a> {
    Affine(&'a AffineFn),
    Pl(&'a PLConvexFn),
}

pub fn integrate_affine(p: &Polytope, f: &AffineFn, region: Region) -> Rational {
    let vd = p.volume_data();
    match region {
        Region::Interior => &vd.volume * f.eval(&vd.barycenter),
        Region::Boundary => {
            vd.per_facet_sigma.iter().zip(&vd.facet_centroids).fold(Rational::zero(), |acc, (s, c)| acc + s * f.eval(c))
        }
    }
}

pub fn integrate(p: &Polytope, f: Integrand<'_>, region: Region) -> Result<Rational, PolytopeError> {
    match f {
        Integrand::Affine(a) => {
            if a.gradient.len() != p.dim() {
                return Err(PolytopeError::DomainMismatch);
            }
            Ok(integrate_affine(p, a, region))
        }
        Integrand::Pl(g) => {
            if g.domain() != p {
                return Err(PolytopeError::DomainMismatch);
            }
            let mut acc = Rational::zero();
            for (i, r) in g.linearity_regions() {
                let piece = &g.pieces()[*i];
                match region {
                    Region::Interior => acc += integrate_affine(r, piece, Region::Interior),
                    Region::Boundary => {
                        let vd = r.volume_data();
                        for (fi, h) in r.halfspaces().iter().enumerate() {
                            if p.halfspaces().contains(h) {
                                let c = &vd.facet_centroids[fi];
                                acc += &vd.per_facet_sigma[fi] * (dot(&piece.gradient, c) + &piece.constant);
                            }
                        }
                    }
                }
            }
            Ok(acc)
        }
    }
}
