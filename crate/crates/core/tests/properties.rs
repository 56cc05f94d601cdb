mod common;

use kstab_core::invariants::{am_top, donaldson_futaki, max_vertex_chow, minimum_norm};
use kstab_core::rational::{factorial, int};
use kstab_core::{make_config, Normalization, Shift};
use num_traits::{Signed, Zero};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn df_and_norm_ignore_constants(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let cfg = common::random_config(&mut r);
        let c = common::random_constant(&mut r);
        let moved = make_config(&cfg.base, &cfg.g.add_constant(&c), Shift::Auto).unwrap();
        for mode in [Normalization::MinZero, Normalization::AverageZero] {
            let (a, b) = (cfg.normalize(mode), moved.normalize(mode));
            prop_assert_eq!(donaldson_futaki(&a).unwrap().value, donaldson_futaki(&b).unwrap().value);
            prop_assert_eq!(minimum_norm(&a).unwrap().value, minimum_norm(&b).unwrap().value);
        }
    }

    #[test]
    fn norm_matches_closed_form_and_is_nonnegative(seed in any::<u64>()) {
        let cfg = common::random_config(&mut common::rng(seed)).normalize(Normalization::MinZero);
        let rep = minimum_norm(&cfg).unwrap();
        prop_assert_eq!(&rep.value, &rep.closed_form);
        prop_assert!(!rep.value.is_negative());
        prop_assert_eq!(rep.value.is_zero(), cfg.g.is_constant());
    }

    #[test]
    fn am_top_is_volume_under_the_roof(seed in any::<u64>()) {
        let cfg = common::random_config(&mut common::rng(seed));
        let n = cfg.dim();
        let expected = factorial(n + 1) * (&cfg.shift * cfg.base.volume() - cfg.g.integral());
        prop_assert_eq!(am_top(&cfg).unwrap(), expected.clone());
        prop_assert_eq!(am_top(&cfg.normalize(Normalization::AverageZero)).unwrap(), expected);
    }

    #[test]
    fn scaling_is_linear(seed in any::<u64>(), d in 1i64..6) {
        let cfg = common::random_config(&mut common::rng(seed)).normalize(Normalization::MinZero);
        let s = cfg.scale(&int(d)).unwrap();
        prop_assert_eq!(donaldson_futaki(&s).unwrap().value, donaldson_futaki(&cfg).unwrap().value * int(d));
        prop_assert_eq!(minimum_norm(&s).unwrap().value, minimum_norm(&cfg).unwrap().value * int(d));
    }

    #[test]
    fn vertex_chow_detects_nonconstant_g(seed in any::<u64>()) {
        let cfg = common::random_config(&mut common::rng(seed)).normalize(Normalization::AverageZero);
        let (_, ch) = max_vertex_chow(&cfg).unwrap();
        prop_assert!(!ch.is_negative());
        prop_assert_eq!(ch.is_positive(), !cfg.g.is_constant());
    }
}
