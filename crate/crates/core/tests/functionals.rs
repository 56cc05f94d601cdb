mod common;

use kstab_core::functionals::{
    energy_report, functional_sample, functional_trace, j_alpha_twisted, l1_norm_path, mabuchi, write_trace_csv,
    FunctionalError, PathSchedule,
};
use kstab_core::invariants::twisted_weights;
use kstab_core::pl::affine_i;
use kstab_core::rational::{int, rat, rvec, to_f64};
use kstab_core::slope::ray_engine;
use kstab_core::{make_config, Normalization, PLConvexFn, Polytope, Shift, ToricTestConfig};
use rand::Rng;

fn interval() -> Polytope {
    Polytope::cube(&rvec(&[0]), &rvec(&[1])).unwrap()
}

fn interval_x(mode: Normalization) -> ToricTestConfig {
    let p = interval();
    let g = PLConvexFn::affine(affine_i(&[1], int(0)), p.clone()).unwrap();
    make_config(&p, &g, Shift::Auto).unwrap().normalize(mode)
}

#[test]
fn tau_zero_is_all_zero() {
    let cfg = interval_x(Normalization::MinZero);
    let engine = ray_engine(&cfg, 10.0, Some(&interval())).unwrap();
    let s = functional_sample(&engine, 0.0, 10.0, &PathSchedule::default()).unwrap();
    for v in [s.am, s.a0, s.a1, s.entropy, s.l_ric, s.mabuchi_path, s.l_alpha.unwrap(), s.l1_length] {
        assert!(v.abs() < 1e-12, "{s:?}");
    }
    let e = energy_report(&s, true).unwrap();
    assert_eq!((e.i_val, e.j_val), (0.0, 0.0));
    assert_eq!(j_alpha_twisted(&s, 1.0).unwrap(), (0.0, 0.0));
}

#[test]
fn affine_interval_am_slope() {
    // AM(τ) = −(n+1)!·τ·∫g with ∫x = 1/2.
    let cfg = interval_x(Normalization::MinZero);
    let engine = ray_engine(&cfg, 10.0, None).unwrap();
    let samples = functional_trace(&engine, &PathSchedule::with_taus(vec![1.0, 2.0, 4.0])).unwrap();
    for s in samples {
        assert!((s.am / s.tau + 1.0).abs() < 1e-6, "tau {} AM {}", s.tau, s.am);
    }
}

#[test]
fn subdivisions_agree() {
    let p = interval();
    let g = PLConvexFn::new(vec![affine_i(&[1], int(0)), affine_i(&[-1], int(1))], p.clone()).unwrap();
    let cfg = make_config(&p, &g, Shift::Auto).unwrap().normalize(Normalization::MinZero);
    let engine = ray_engine(&cfg, 10.0, None).unwrap();
    let coarse = PathSchedule { max_depth: 2, ..Default::default() };
    let fine = PathSchedule { rel_tol: 1e-9, max_depth: 6, ..Default::default() };
    let a = functional_sample(&engine, 3.0, 30.0, &coarse).unwrap();
    let b = functional_sample(&engine, 3.0, 30.0, &fine).unwrap();
    for (x, y) in
        [(a.am, b.am), (a.a0, b.a0), (a.a1, b.a1), (a.mabuchi_path, b.mabuchi_path), (a.l1_length, b.l1_length)]
    {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }
}

#[test]
fn missing_alpha_is_reported() {
    let engine = ray_engine(&interval_x(Normalization::MinZero), 10.0, None).unwrap();
    let s = functional_sample(&engine, 1.0, 10.0, &PathSchedule::default()).unwrap();
    assert!(matches!(energy_report(&s, true), Err(FunctionalError::MissingAlpha)));
    assert!(matches!(j_alpha_twisted(&s, 1.0), Err(FunctionalError::MissingAlpha)));
    assert!(energy_report(&s, false).unwrap().l_alpha.is_none());
}

#[test]
fn alpha_equal_to_omega() {
    // For n = 1, L_ω' = ∫θ̇ ω, so L_ω = ∫θ ω and 𝒥_ω reduces to J.
    let cfg = interval_x(Normalization::MinZero);
    let tw = twisted_weights(&cfg, &interval()).unwrap();
    assert_eq!(tw.gamma, int(1));
    let engine = ray_engine(&cfg, 10.0, Some(&interval())).unwrap();
    for s in functional_trace(&engine, &PathSchedule::with_taus(vec![0.5, 2.0, 5.0])).unwrap() {
        let e = energy_report(&s, true).unwrap();
        let (j, twisted) = j_alpha_twisted(&s, 1.0).unwrap();
        assert!((e.l_alpha.unwrap() - s.a0).abs() < 1e-6);
        assert!((j - e.j_val).abs() < 1e-6);
        assert!((twisted - mabuchi(&s).unwrap() - j).abs() < 1e-12);
    }
}

#[test]
fn mabuchi_of_product_configuration_is_flat() {
    let engine = ray_engine(&interval_x(Normalization::MinZero), 10.0, None).unwrap();
    let samples = functional_trace(&engine, &PathSchedule::default()).unwrap();
    for s in &samples {
        assert!(mabuchi(s).unwrap().abs() < 1e-6);
    }
}

#[test]
fn sandwich_on_random_interval_configs() {
    let mut r = common::rng(31);
    let mut seen = 0;
    while seen < 5 {
        let cfg = common::random_config(&mut r);
        if cfg.dim() != 1 {
            continue;
        }
        seen += 1;
        let cfg = cfg.normalize(Normalization::MinZero);
        let engine = ray_engine(&cfg, 10.0, None).unwrap();
        let tau = r.gen_range(0.5..3.0);
        let s = functional_sample(&engine, tau, 10.0 * tau, &PathSchedule::default()).unwrap();
        let e = energy_report(&s, false).unwrap();
        let gap = e.i_val - e.j_val;
        assert!(e.j_val >= -1e-9 && e.i_val >= -1e-9);
        assert!((gap - e.j_val).abs() < 1e-8, "n = 1 forces I = 2J: {e:?}");
    }
}

#[test]
fn l1_norm() {
    let min = interval_x(Normalization::MinZero);
    let engine = ray_engine(&min, 10.0, None).unwrap();
    let s = functional_trace(&engine, &PathSchedule::with_taus(vec![1.0])).unwrap();
    assert!(matches!(l1_norm_path(&min, &s), Err(FunctionalError::NormalizationRequired(Normalization::MinZero))));

    // n!·∫|x − 1/2| = 1/4.
    let avg = interval_x(Normalization::AverageZero);
    let engine = ray_engine(&avg, 10.0, None).unwrap();
    let samples = functional_trace(&engine, &PathSchedule::default()).unwrap();
    let rep = l1_norm_path(&avg, &samples).unwrap();
    assert!((rep.limit - 0.25).abs() < 1e-3, "{rep:?}");
    assert!(rep.length > 0.0);

    let p = interval();
    let g = PLConvexFn::affine(affine_i(&[0], rat(3, 2)), p.clone()).unwrap();
    let trivial = make_config(&p, &g, Shift::Auto).unwrap().normalize(Normalization::AverageZero);
    let engine = ray_engine(&trivial, 10.0, None).unwrap();
    let samples = functional_trace(&engine, &PathSchedule::with_taus(vec![1.0, 2.0])).unwrap();
    assert_eq!(l1_norm_path(&trivial, &samples).unwrap().limit, 0.0);
}

#[test]
fn bad_schedules_are_rejected() {
    let engine = ray_engine(&interval_x(Normalization::MinZero), 10.0, None).unwrap();
    for taus in [vec![], vec![0.0, 1.0], vec![2.0, 1.0]] {
        assert!(matches!(functional_trace(&engine, &PathSchedule::with_taus(taus)), Err(FunctionalError::BadSchedule)));
    }
}

#[test]
fn csv_layout() {
    let cfg = interval_x(Normalization::MinZero);
    let pa = Polytope::cube(&rvec(&[0]), &rvec(&[2])).unwrap();
    let gamma = to_f64(&twisted_weights(&cfg, &pa).unwrap().gamma);
    let engine = ray_engine(&cfg, 10.0, Some(&pa)).unwrap();
    let samples = functional_trace(&engine, &PathSchedule::with_taus(vec![1.0, 2.0])).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&samples, Some(gamma), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,AM,I,J,L_alpha,M,J_alpha,M_twisted,err_estimate");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 9 && !l.contains(",,")));
}
