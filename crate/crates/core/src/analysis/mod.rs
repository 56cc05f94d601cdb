//! Analytic substrate: Guillemin potentials, Abreu curvature, Legendre
//! duality and sampled states of the degeneration ray.

mod legendre;
mod potential;
pub mod quadrature;
mod ray;

pub use legendre::{legendre_solve, RayPotential};
pub use potential::{
    abreu_finite_difference, abreu_scalar_curvature, guillemin_potential, invert_spd, log_det_derivatives, raw_abreu,
    Chart, Jet, Point, Quadratic, SmoothPl, SymplecticPotential, ToricGeometry,
};
pub use quadrature::QuadConfig;
pub use ray::{ray_state, NodeData, RayEngine, RayState};

/// Normalizing constant of the Abreu expression, fixed by requiring the mean
/// scalar curvature to equal `n·μ`.
pub const KAPPA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("polytope is not Delzant")]
    NonDelzant,
    #[error("Hessian is not positive definite")]
    SingularHessian,
    #[error("Legendre inversion failed: {0}")]
    NewtonDivergence(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use super::*;
    use crate::pl::{affine_i, PLConvexFn};
    use crate::polytope::Polytope;
    use crate::rational::{int, rvec};

    fn interval() -> Polytope {
        Polytope::cube(&rvec(&[0]), &rvec(&[1])).unwrap()
    }

    #[test]
    fn guillemin_interval_values() {
        let u = guillemin_potential(&interval()).unwrap();
        let p = u.geometry.point_from_x(0, &DVector::from_vec(vec![0.5]));
        assert!((u.value(&p) + 2f64.ln() / 2.0).abs() < 1e-15);
        assert!((u.jet(&p, 2).hess[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn raw_abreu_is_four_on_interval() {
        let u = guillemin_potential(&interval()).unwrap();
        for x in [0.01, 0.3, 0.5, 0.77, 0.999] {
            let p = u.geometry.point_from_x(0, &DVector::from_vec(vec![x]));
            assert!((raw_abreu(&u.jet(&p, 4)).unwrap() - 4.0).abs() < 1e-9, "x = {x}");
        }
    }

    #[test]
    fn abreu_matches_finite_differences_on_simplex() {
        let u = guillemin_potential(&Polytope::standard_simplex(2)).unwrap();
        let x = DVector::from_vec(vec![0.2, 0.35]);
        let p = u.geometry.point_from_x(0, &x);
        let exact = raw_abreu(&u.jet(&p, 4)).unwrap();
        let fd = abreu_finite_difference(&u, &x, 1e-3).unwrap();
        assert!((exact - fd).abs() < 1e-5, "{exact} vs {fd}");
        // ℙ² with the Guillemin metric has constant scalar curvature.
        assert!((KAPPA * exact - 6.0).abs() < 1e-9);
    }

    #[test]
    fn legendre_round_trip() {
        let sq = Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap();
        for p in [interval(), sq, Polytope::standard_simplex(2)] {
            let u = guillemin_potential(&p).unwrap();
            let rp = RayPotential::reference(&u);
            let geo = &u.geometry;
            let n = geo.n;
            for t in [1e-9, 0.013, 0.25, 0.4] {
                let x = geo.barycenter.map(|b| b * (1.0 - t) + t * 0.1);
                let x = DVector::from_iterator(n, x.iter().enumerate().map(|(i, v)| v * (1.0 - 0.1 * i as f64)));
                let pt = geo.point_from_x(0, &x);
                let xi = u.jet(&pt, 1).grad;
                let back = legendre_solve(&rp, &xi).unwrap();
                assert!((&back.x - &x).norm() < 1e-10, "{x} vs {}", back.x);
                let xi2 = u.jet(&back, 1).grad;
                assert!((&xi2 - &xi).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn legendre_far_from_center() {
        let u = guillemin_potential(&Polytope::standard_simplex(2)).unwrap();
        let rp = RayPotential::reference(&u);
        for xi in [[-15.0, 3.0], [14.0, 14.0], [-16.0, -16.0], [20.0, -5.0]] {
            let xi = DVector::from_vec(xi.to_vec());
            let p = legendre_solve(&rp, &xi).unwrap();
            let back = u.jet(&p, 1).grad;
            assert!((&back - &xi).norm() < 1e-9, "{xi} -> {back}");
        }
    }

    #[test]
    fn affine_ray_matches_closed_form() {
        // On [0,1]: u' = ½ log(x/(1−x)), so y solves ½ log(y/(1−y)) = ξ − τ.
        let p = interval();
        let g = PLConvexFn::affine(affine_i(&[1], int(0)), p.clone()).unwrap();
        let u = guillemin_potential(&p).unwrap();
        let engine = RayEngine::new(u, SmoothPl::new(&g, 10.0), 2.0);
        for (xi, tau) in [(0.3, 2.0), (-4.0, 6.0), (9.0, 12.0)] {
            let d = engine.evaluate_node(&[xi], tau, 10.0).unwrap();
            let y = 1.0 / (1.0 + (-2.0 * (xi - tau)).exp());
            assert!((d.y[0] - y).abs() < 1e-10);
            assert!((d.phi_dot + y).abs() < 1e-10);
        }
    }

    #[test]
    fn reference_state_invariants() {
        let sq = Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap();
        for (p, mu_n) in [(interval(), 2.0), (sq, 4.0), (Polytope::standard_simplex(2), 6.0)] {
            let g = PLConvexFn::affine(affine_i(&vec![0; p.dim()], int(0)), p.clone()).unwrap();
            let u = guillemin_potential(&p).unwrap();
            let engine = RayEngine::new(u, SmoothPl::new(&g, 10.0), mu_n);
            let st = ray_state(&engine, 0.0, 10.0).unwrap();
            let vol = crate::rational::to_f64(&p.volume());
            assert!((st.volume_check() - vol).abs() < 1e-6 * vol);
            let mean_s = st.integrate_ref(|d| d.scalar_curvature) / st.integrate_ref(|_| 1.0);
            assert!((mean_s - mu_n).abs() < 1e-6 * mu_n, "mean S {mean_s} vs {mu_n}");
            assert!(st.nodes.iter().all(|s| s.data.phi == 0.0));
        }
    }

    #[test]
    fn ricci_trace_is_scalar_curvature_at_reference() {
        let p = Polytope::standard_simplex(2);
        let g = PLConvexFn::affine(affine_i(&[1, 0], int(0)), p.clone()).unwrap();
        let u = guillemin_potential(&p).unwrap();
        let engine = RayEngine::new(u.clone(), SmoothPl::new(&g, 10.0), 6.0).with_alpha(u);
        for xi in [[0.1, -0.3], [5.0, 5.0], [-8.0, 2.0], [12.0, 12.5]] {
            let d = engine.evaluate_node(&xi, 0.0, 10.0).unwrap();
            // roundoff in S grows like ε/slack; the slack here is about 1e-11
            let tol = if xi[0] > 10.0 { 1e-4 } else { 1e-7 };
            assert!((d.ric_trace - d.scalar_curvature).abs() < tol, "{xi:?}: {} {}", d.ric_trace, d.scalar_curvature);
            assert!((d.scalar_curvature - 6.0).abs() < tol);
            assert!((d.alpha_trace - 2.0).abs() < 1e-8);
            let d = engine.evaluate_node(&xi, 3.0, 10.0).unwrap();
            assert!(d.alpha_trace > 0.0 && d.density_tau > 0.0);
        }
    }

    #[test]
    fn theta_is_midpoint_convex_in_tau() {
        let p = Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap();
        let g = PLConvexFn::new(vec![affine_i(&[1, 0], int(0)), affine_i(&[-1, 1], int(0))], p.clone()).unwrap();
        let engine = RayEngine::new(guillemin_potential(&p).unwrap(), SmoothPl::new(&g, 10.0), 4.0);
        for xi in [[0.0, 0.0], [2.0, -1.0], [-3.0, 4.0]] {
            let f = |t: f64| engine.evaluate_node(&xi, t, 10.0).unwrap().phi;
            for (a, b) in [(0.0, 2.0), (1.0, 5.0)] {
                assert!(f(0.5 * (a + b)) <= 0.5 * (f(a) + f(b)) + 1e-10);
            }
        }
    }
}
