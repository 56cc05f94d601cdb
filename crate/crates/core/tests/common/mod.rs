//! Seeded random configurations on the interval, square and simplex.

#![allow(dead_code)]

use kstab_core::rational::{int, rat, rvec};
use kstab_core::{make_config, AffineFn, PLConvexFn, Polytope, Shift, ToricTestConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn bases() -> Vec<Polytope> {
    vec![
        Polytope::cube(&rvec(&[0]), &rvec(&[1])).unwrap(),
        Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap(),
        Polytope::standard_simplex(2),
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_piece(r: &mut ChaCha8Rng, n: usize) -> AffineFn {
    let grad = (0..n).map(|_| int(r.gen_range(-3..=3))).collect();
    AffineFn::new(grad, rat(r.gen_range(-6..=6), r.gen_range(1..=4)))
}

/// A random rational PL convex function with 1 to 3 pieces; roughly one in
/// eight draws is constant.
pub fn random_config(r: &mut ChaCha8Rng) -> ToricTestConfig {
    let base = bases()[r.gen_range(0..3)].clone();
    let n = base.dim();
    loop {
        let g = if r.gen_ratio(1, 8) {
            PLConvexFn::affine(
                AffineFn::new(vec![int(0); n], rat(r.gen_range(-6..=6), r.gen_range(1..=4))),
                base.clone(),
            )
        } else {
            let k = r.gen_range(1..=3);
            PLConvexFn::new_pruned((0..k).map(|_| random_piece(r, n)).collect(), base.clone())
        };
        if let Ok(g) = g {
            return make_config(&base, &g, Shift::Auto).unwrap();
        }
    }
}

pub fn random_constant(r: &mut ChaCha8Rng) -> kstab_core::Rational {
    rat(r.gen_range(-20..=20), r.gen_range(1..=7))
}
