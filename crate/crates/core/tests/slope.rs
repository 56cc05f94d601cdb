mod common;

use kstab_core::functionals::PathSchedule;
use kstab_core::invariants::minimum_norm;
use kstab_core::pl::affine_i;
use kstab_core::rational::{int, rat, rvec};
use kstab_core::slope::{scan_destabilizer, verify_theorem, Candidates, Theorem, Tier, VerifyError, VerifyOptions};
use kstab_core::{make_config, Normalization, PLConvexFn, Polytope, Shift, ToricTestConfig};
use num_traits::Signed;

fn interval_cfg(grad: i64, c: i64) -> ToricTestConfig {
    let p = Polytope::cube(&rvec(&[0]), &rvec(&[1])).unwrap();
    let g = PLConvexFn::affine(affine_i(&[grad], int(c)), p.clone()).unwrap();
    make_config(&p, &g, Shift::Auto).unwrap()
}

#[test]
fn constant_g_has_no_destabilizer() {
    let rep = scan_destabilizer(&interval_cfg(0, 3), &Candidates::Vertices, &PathSchedule::default()).unwrap();
    assert!(!rep.destabilizing);
    assert_eq!(rep.best.exact.as_deref(), Some("0/1"));
}

#[test]
fn interval_line_destabilizes_at_one() {
    let rep = scan_destabilizer(&interval_cfg(1, 0), &Candidates::Vertices, &PathSchedule::default()).unwrap();
    assert!(rep.destabilizing);
    assert_eq!(rep.best.point, vec!["1/1".to_string()]);
    assert_eq!(rep.best.exact.as_deref(), Some("1/2"));
    assert_eq!(rep.candidates.len(), 2);
}

#[test]
fn positive_norm_gives_positive_vertex_weight() {
    let mut r = common::rng(44);
    for _ in 0..40 {
        let cfg = common::random_config(&mut r).normalize(Normalization::MinZero);
        if minimum_norm(&cfg).unwrap().value.is_positive() {
            let rep = scan_destabilizer(&cfg, &Candidates::Vertices, &PathSchedule::default()).unwrap();
            assert!(rep.destabilizing, "{:?}", cfg.g);
        }
    }
}

#[test]
fn grid_scan_stays_below_vertex_maximum() {
    let cfg = interval_cfg(1, 0);
    let sched = PathSchedule::with_taus(vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    let grid = Candidates::Grid(vec![vec![0.25], vec![0.5], vec![0.75]]);
    let rep = scan_destabilizer(&cfg, &grid, &sched).unwrap();
    assert_eq!(rep.candidates.len(), 3);
    assert!(rep.candidates.iter().all(|c| c.chow.is_finite() && c.chow <= 0.5 + 1e-3 && c.exact.is_none()));
}

#[test]
fn point_theorem_at_vertex() {
    let v = verify_theorem(&interval_cfg(1, 0), Theorem::Point(rvec(&[1])), &VerifyOptions::default()).unwrap();
    assert_eq!(v.theorem, "POINT(1/1)");
    assert_eq!(v.exact, "-1/2");
    assert!(v.pass, "{v:?}");
    assert_eq!(v.tier, Tier::Certified);
    assert!((v.slope + 0.5).abs() < 1e-3);
}

#[test]
fn point_theorem_rejects_non_vertices() {
    let err = verify_theorem(&interval_cfg(1, 0), Theorem::Point(vec![rat(1, 2)]), &VerifyOptions::default());
    assert!(matches!(err, Err(VerifyError::Invariant(_))));
}

#[test]
fn short_schedules_are_refused() {
    let opts = VerifyOptions { schedule: PathSchedule::with_taus(vec![1.0, 2.0, 3.0]), ..Default::default() };
    let err = verify_theorem(&interval_cfg(1, 0), Theorem::Am, &opts);
    assert!(matches!(err, Err(VerifyError::Slope(_))));
}

#[test]
fn j_alpha_needs_alpha() {
    let err = verify_theorem(&interval_cfg(1, 0), Theorem::JAlpha, &VerifyOptions::default());
    assert!(matches!(err, Err(VerifyError::MissingAlpha)));
}

#[test]
fn am_verdict_on_interval() {
    let v = verify_theorem(&interval_cfg(2, 1), Theorem::Am, &VerifyOptions::default()).unwrap();
    // Auto shift 4, so Q = {0 ≤ t ≤ 3 − 2x} and (n+1)!·Vol(Q) = 2·2.
    assert_eq!(v.exact, "4/1");
    assert!(v.pass && (v.slope - 4.0).abs() < 1e-6, "{v:?}");
    assert_eq!(v.derivative_trace().len(), 6);
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["theorem"], "AM");
    assert_eq!(json["tier"], "certified");
}
