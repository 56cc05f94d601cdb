//! States of the ray `u_τ = u0 + τ·g_β` sampled on an adaptive ξ-grid.
//!
//! A node is a point ξ of the complex (logarithmic) coordinates.  Its
//! reference moment point is `x = (∇u0)⁻¹(ξ)` and its moment point along the
//! ray is `y = (∇u_τ)⁻¹(ξ)`.  Integrals over X of torus-invariant functions
//! are `n!·∫ F(ξ) det(D²u_τ(y))⁻¹ dξ`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::legendre::{legendre_solve, RayPotential};
use super::potential::{invert_spd, log_det_derivatives, raw_abreu, SmoothPl, SymplecticPotential};
use super::quadrature::{adaptive_box, Indicators, QuadConfig, Sample};
use super::{AnalysisError, KAPPA};

#[derive(Debug, Clone)]
pub struct NodeData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// θ_τ at the node.
    pub phi: f64,
    /// dθ_τ/dτ = −g_β(y).
    pub phi_dot: f64,
    /// log(ω_θⁿ/ωⁿ) = log det D²u0(x) − log det D²u_τ(y).
    pub log_volume_ratio: f64,
    pub density_ref: f64,
    pub density_tau: f64,
    /// Calibrated scalar curvature of ω_θ.
    pub scalar_curvature: f64,
    /// Λ_{ω_θ} Ric(ω).
    pub ric_trace: f64,
    /// Λ_{ω_θ} α when α data is present.
    pub alpha_trace: f64,
    pub hessian: DMatrix<f64>,
    pub inv_hessian: DMatrix<f64>,
    mu_n: f64,
}

impl Indicators for NodeData {
    fn indicators(&self) -> Vec<f64> {
        let dt = self.density_tau;
        let pd = self.phi_dot;
        vec![
            self.density_ref,
            dt,
            self.phi * self.density_ref,
            self.phi * dt,
            self.log_volume_ratio * dt,
            pd * dt,
            pd.abs() * dt,
            pd * self.ric_trace * dt,
            pd * (self.scalar_curvature - self.mu_n) * dt,
            pd * self.alpha_trace * dt,
        ]
    }
}

/// Everything needed to sample states of one configuration's ray.
#[derive(Debug, Clone)]
pub struct RayEngine {
    pub u0: SymplecticPotential,
    pub g: SmoothPl,
    pub alpha: Option<SymplecticPotential>,
    /// `n·μ`, subtracted from S in the Mabuchi path integrand.
    pub mu_n: f64,
    pub quad: QuadConfig,
    /// Margin added around the ξ-support, in ξ units.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct RayState {
    pub tau: f64,
    pub beta: f64,
    pub n: usize,
    pub nodes: Vec<Sample<NodeData>>,
    pub quad_error: f64,
}

fn log_det(h: &DMatrix<f64>) -> Result<f64, AnalysisError> {
    let c = h.clone().cholesky().ok_or(AnalysisError::SingularHessian)?;
    Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

impl RayEngine {
    pub fn new(u0: SymplecticPotential, g: SmoothPl, mu_n: f64) -> Self {
        let n = u0.n();
        RayEngine { u0, g, alpha: None, mu_n, quad: QuadConfig::for_dim(n), margin: 12.0 }
    }

    pub fn with_alpha(mut self, alpha: SymplecticPotential) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn n(&self) -> usize {
        self.u0.n()
    }

    fn smooth(&self, beta: f64) -> SmoothPl {
        SmoothPl { beta, ..self.g.clone() }
    }

    /// Samples all node quantities at ξ for the potential `u0 + τ g_β`.
    pub fn evaluate_node(&self, xi: &[f64], tau: f64, beta: f64) -> Result<NodeData, AnalysisError> {
        let g = self.smooth(beta);
        self.node_with(xi, tau, &g)
    }

    fn node_with(&self, xi: &[f64], tau: f64, g: &SmoothPl) -> Result<NodeData, AnalysisError> {
        let xi = DVector::from_column_slice(xi);
        let reference = RayPotential::reference(&self.u0);
        let ray = RayPotential { u0: &self.u0, g: Some(g), tau };
        let px = legendre_solve(&reference, &xi)?;
        let py = if tau == 0.0 { px.clone() } else { legendre_solve(&ray, &xi)? };
        let (b0, j0) = reference.chart_jet(&px, 4);
        let (bt, jt) = if tau == 0.0 { (b0.clone(), j0.clone()) } else { ray.chart_jet(&py, 4) };
        let ld0 = log_det(&j0.hess)? - 2.0 * b0.log_det;
        let ldt = log_det(&jt.hess)? - 2.0 * bt.log_det;
        let phi = (py.x.dot(&xi) - ray.value(&py)) - (px.x.dot(&xi) - reference.value(&px));
        let scalar_curvature = KAPPA * raw_abreu(&jt)?;
        let (h0inv, l0, d2) = log_det_derivatives(&j0)?;
        let w = &h0inv * &l0;
        let n = self.n();
        let mut dw = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let col = -(&h0inv * (&j0.d3[k] * &w)) + &h0inv * d2.column(k);
            dw.set_column(k, &col);
        }
        // D²_ξ log det D²u0 is B0·M·B0ᵀ in x-coordinates.
        let m = dw * &h0inv;
        let c = &bt.inv * &b0.b;
        let ric_trace = KAPPA * (&jt.hess * &c * m * c.transpose()).trace();
        let alpha_trace = match &self.alpha {
            Some(ua) => {
                let ra = RayPotential::reference(ua);
                let pa = legendre_solve(&ra, &xi)?;
                let (ba, ja) = ra.chart_jet(&pa, 2);
                let ca = &bt.inv * &ba.b;
                (&jt.hess * &ca * invert_spd(&ja.hess)? * ca.transpose()).trace()
            }
            None => 0.0,
        };
        let hinv_t = invert_spd(&jt.hess)?;
        let inv_hessian = &bt.b * hinv_t * bt.b.transpose();
        let hessian = bt.inv.transpose() * &jt.hess * &bt.inv;
        Ok(NodeData {
            phi,
            phi_dot: -g.value(&py.x),
            log_volume_ratio: ld0 - ldt,
            density_ref: (-ld0).exp(),
            density_tau: (-ldt).exp(),
            scalar_curvature,
            ric_trace,
            alpha_trace,
            x: px.x.iter().cloned().collect(),
            y: py.x.iter().cloned().collect(),
            hessian,
            inv_hessian,
            mu_n: self.mu_n,
        })
    }

    /// ξ-box covering the supports of both ωⁿ and ω_τⁿ.
    pub fn xi_box(&self, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let geo = &self.u0.geometry;
        let p = geo.point_from_x(0, &geo.barycenter);
        let center = self.u0.jet(&p, 1).grad;
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for d in 0..n {
            let wmin = self.g.w.iter().map(|w| w[d]).fold(f64::INFINITY, f64::min);
            let wmax = self.g.w.iter().map(|w| w[d]).fold(f64::NEG_INFINITY, f64::max);
            lo[d] = center[d] + (tau * wmin).min(0.0) - self.margin;
            hi[d] = center[d] + (tau * wmax).max(0.0) + self.margin;
        }
        (lo, hi)
    }

    pub fn state(&self, tau: f64, beta: f64) -> Result<RayState, AnalysisError> {
        let g = self.smooth(beta);
        let (lo, hi) = self.xi_box(tau);
        let (nodes, quad_error) = adaptive_box(&lo, &hi, &self.quad, |xi| self.node_with(xi, tau, &g))?;
        Ok(RayState { tau, beta, n: self.n(), nodes, quad_error })
    }
}

/// Public entry mirroring the state constructor.
pub fn ray_state(engine: &RayEngine, tau: f64, beta: f64) -> Result<RayState, AnalysisError> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(AnalysisError::InvalidParameter(format!("tau = {tau}")));
    }
    engine.state(tau, beta)
}

impl RayState {
    fn factorial(&self) -> f64 {
        (1..=self.n).map(|k| k as f64).product()
    }

    /// `n!·Σ w F` over the nodes.
    pub fn sum(&self, f: impl Fn(&NodeData) -> f64) -> f64 {
        self.factorial() * self.nodes.iter().map(|s| s.weight * f(&s.data)).sum::<f64>()
    }

    /// ∫_X F ω_θⁿ.
    pub fn integrate_tau(&self, f: impl Fn(&NodeData) -> f64) -> f64 {
        self.sum(|d| f(d) * d.density_tau)
    }

    /// ∫_X F ωⁿ.
    pub fn integrate_ref(&self, f: impl Fn(&NodeData) -> f64) -> f64 {
        self.sum(|d| f(d) * d.density_ref)
    }

    /// ∫_P exp(log ratio) dμ, which must equal Vol(P).
    pub fn volume_check(&self) -> f64 {
        self.nodes.iter().map(|s| s.weight * s.data.density_ref * s.data.log_volume_ratio.exp()).sum()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        let coords: Vec<String> = (0..self.n).map(|i| format!("x{i}")).collect();
        writeln!(w, "{},weight,phi,phi_dot,logdet,S", coords.join(","))?;
        for s in &self.nodes {
            let d = &s.data;
            let xs: Vec<String> = d.x.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(
                w,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                xs.join(","),
                s.weight * d.density_ref,
                d.phi,
                d.phi_dot,
                d.log_volume_ratio,
                d.scalar_curvature
            )?;
        }
        Ok(())
    }
}
