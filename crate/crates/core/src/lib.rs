//! Exact toric invariants and analytic slope checks for toric test
//! configurations.
//!
//! The exact half (`polytope`, `pl`, `invariants`) works over rationals; the
//! analytic half (`analysis`, `functionals`, `slope`) evaluates energy
//! functionals along symplectic-potential rays and extrapolates their slopes.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod analysis;
pub mod functionals;
pub mod invariants;
pub mod pl;
pub mod polytope;
pub mod rational;
pub mod slope;

pub use pl::{make_config, AffineFn, Normalization, PLConvexFn, Shift, ToricTestConfig};
pub use polytope::{Halfspace, Polytope, PolytopeError, VolumeData};
pub use rational::Rational;
