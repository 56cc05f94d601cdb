//! Legendre inversion `∇u(x) = ξ` by damped Newton in vertex charts.

use nalgebra::DVector;

use super::potential::{transform_jet, ChartBasis, Jet, Point, SmoothPl, SymplecticPotential};
use super::AnalysisError;

const MAX_ITER: usize = 200;

/// `u0 + τ·g_β` (with `g` absent meaning the reference potential).
#[derive(Clone, Copy)]
pub struct RayPotential<'a> {
    pub u0: &'a SymplecticPotential,
    pub g: Option<&'a SmoothPl>,
    pub tau: f64,
}

impl<'a> RayPotential<'a> {
    pub fn reference(u0: &'a SymplecticPotential) -> Self {
        RayPotential { u0, g: None, tau: 0.0 }
    }

    pub fn value(&self, p: &Point) -> f64 {
        let mut v = self.u0.value(p);
        if let Some(g) = self.g {
            if self.tau != 0.0 {
                v += self.tau * g.value(&p.x);
            }
        }
        v
    }

    pub fn jet(&self, p: &Point, order: usize) -> Jet {
        let mut j = self.u0.jet(p, order);
        if let Some(g) = self.g {
            if self.tau != 0.0 {
                j.add_scaled(&g.jet(&p.x, order), self.tau);
            }
        }
        j
    }

    /// Jet in the scaled chart coordinates of `p`.
    pub fn chart_jet(&self, p: &Point, order: usize) -> (ChartBasis, Jet) {
        let (basis, mut j) = self.u0.chart_jet(p, order);
        match self.g {
            Some(g) if self.tau != 0.0 && g.is_affine() => {
                j.value += self.tau * g.value(&p.x);
                j.grad += basis.b.tr_mul(&g.w[0]) * self.tau;
            }
            Some(g) if self.tau != 0.0 => {
                j.add_scaled(&transform_jet(&g.jet(&p.x, order), &basis.b), self.tau);
            }
            _ => {}
        }
        (basis, j)
    }

    fn g_value(&self, x: &DVector<f64>) -> f64 {
        match self.g {
            Some(g) if self.tau != 0.0 => self.tau * g.value(x),
            _ => 0.0,
        }
    }

    fn g_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.g {
            Some(g) if self.tau != 0.0 => g.jet(x, 1).grad * self.tau,
            _ => DVector::zeros(x.len()),
        }
    }

    /// `u(x) − ⟨ξ, x⟩`, the convex objective whose minimizer is `(∇u)⁻¹(ξ)`.
    fn objective(&self, p: &Point, xi: &DVector<f64>) -> f64 {
        self.value(p) - xi.dot(&p.x)
    }
}

fn anchor(rp: &RayPotential, xi: &DVector<f64>) -> usize {
    let geo = &rp.u0.geometry;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, ch) in geo.charts.iter().enumerate() {
        let score = ch.vertex.dot(xi) - rp.g_value(&ch.vertex);
        if score > best.0 {
            best = (score, i);
        }
    }
    best.1
}

/// Asymptotic guess: near the vertex `∇u ≈ ½ Σ_inc a_i (log s_i + 1) + const`.
fn initial_guess(rp: &RayPotential, xi: &DVector<f64>, chart: usize) -> Point {
    let geo = &rp.u0.geometry;
    let ch = &geo.charts[chart];
    let mut rest = xi - rp.g_grad(&ch.vertex);
    for (k, &c) in ch.c.iter().enumerate() {
        if c > 0.0 {
            rest.axpy(-0.5 * (c.ln() + 1.0), &geo.a[k], 1.0);
        }
    }
    if let Some(q) = &rp.u0.correction {
        rest -= &q.m * &ch.vertex + &q.q;
    }
    let r = ch.edges.transpose() * rest;
    let mut s = r.map(|v| (2.0 * v - 1.0).clamp(-700.0, 50.0).exp());
    for _ in 0..80 {
        let p = geo.point(chart, s.clone());
        if p.feasible() {
            return p;
        }
        s *= 0.5;
    }
    geo.point_from_x(chart, &geo.barycenter)
}

fn newton(rp: &RayPotential, xi: &DVector<f64>, start: Point) -> Result<Point, AnalysisError> {
    let geo = &rp.u0.geometry;
    let chart = start.chart;
    let mut p = start;
    for _ in 0..MAX_ITER {
        let (basis, j) = rp.chart_jet(&p, 2);
        let gs = &j.grad - basis.b.transpose() * xi;
        let Some(chol) = j.hess.cholesky() else {
            return Err(AnalysisError::SingularHessian);
        };
        let dt = -chol.solve(&gs);
        let dec = -gs.dot(&dt);
        let d = dt.component_mul(&basis.d);
        let ch = &geo.charts[chart];
        let dl: Vec<f64> = ch.a_s.iter().map(|a| a.dot(&d)).collect();
        let mut rel: f64 = 0.0;
        let mut amax = f64::INFINITY;
        for (i, &l) in p.slack.iter().enumerate() {
            rel = rel.max(dl[i].abs() / l);
            if dl[i] < 0.0 {
                amax = amax.min(-l / dl[i]);
            }
        }
        for i in 0..p.s.len() {
            rel = rel.max(d[i].abs() / p.s[i]);
            if d[i] < 0.0 {
                amax = amax.min(-p.s[i] / d[i]);
            }
        }
        if rel < 1e-13 {
            return Ok(geo.point(chart, &p.s + d));
        }
        let mut alpha = if amax > 1.0 / 0.9 { 1.0 } else { 0.9 * amax };
        let f0 = rp.objective(&p, xi);
        if dec < 1e-12 * (1.0 + f0.abs()) {
            p = geo.point(chart, &p.s + d * alpha);
            if !p.feasible() {
                return Err(AnalysisError::NewtonDivergence(format!("lost feasibility at xi = {}", xi.transpose())));
            }
            continue;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let q = geo.point(chart, &p.s + &d * alpha);
            if q.feasible() && rp.objective(&q, xi) <= f0 - 1e-4 * alpha * dec {
                p = q;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Roundoff floor: the full step is as good as we can do.
            let q = geo.point(chart, &p.s + d * alpha.max(1e-3));
            if q.feasible() {
                p = q;
            }
        }
    }
    Err(AnalysisError::NewtonDivergence(format!("no convergence at xi = {}", xi.transpose())))
}

/// Chart whose incident facets carry the smallest slacks.
fn best_chart(rp: &RayPotential, p: &Point) -> usize {
    let geo = &rp.u0.geometry;
    let mut best = (f64::INFINITY, p.chart);
    for (i, ch) in geo.charts.iter().enumerate() {
        let score: f64 =
            ch.c.iter().enumerate().filter(|(_, &c)| c == 0.0).map(|(k, _)| p.slack[k].max(1e-300).ln()).sum();
        if score < best.0 - 1e-9 {
            best = (score, i);
        }
    }
    best.1
}

/// Solves `∇u_τ(x) = ξ`.
pub fn legendre_solve(rp: &RayPotential, xi: &DVector<f64>) -> Result<Point, AnalysisError> {
    let chart = anchor(rp, xi);
    let p = newton(rp, xi, initial_guess(rp, xi, chart))?;
    let min_slack = p.slack.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_slack > 1e-6 {
        return Ok(p);
    }
    let better = best_chart(rp, &p);
    if better == p.chart {
        return Ok(p);
    }
    let geo = &rp.u0.geometry;
    let ch = &geo.charts[better];
    let s: Vec<f64> = ch.c.iter().enumerate().filter(|(_, &c)| c == 0.0).map(|(k, _)| p.slack[k]).collect();
    // incident facets are stored in increasing facet order, matching the chart's rows
    let start = geo.point(better, DVector::from_vec(s));
    let start = if start.feasible() { start } else { initial_guess(rp, xi, better) };
    newton(rp, xi, start)
}
