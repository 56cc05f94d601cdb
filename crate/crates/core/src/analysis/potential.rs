//! Symplectic potentials on Delzant polytopes and their derivative jets.
//!
//! Points are carried in vertex charts `x = v + E·s`, where the first `n`
//! slacks at `v` are exactly the chart coordinates `s`.  Slacks of far
//! facets are kept as `c_k + ⟨A_k, s⟩`, which keeps `ℓ log ℓ` accurate
//! when a node sits exponentially close to the boundary.

use nalgebra::{DMatrix, DVector};

use crate::pl::PLConvexFn;
use crate::polytope::Polytope;
use crate::rational::{dot_int, to_f64};

use super::AnalysisError;

#[derive(Debug, Clone)]
pub struct Chart {
    pub vertex: DVector<f64>,
    /// Columns are the primitive edge directions at the vertex.
    pub edges: DMatrix<f64>,
    /// `E⁻¹`, whose rows are the incident inward normals.
    pub normals: DMatrix<f64>,
    /// Slack of every facet at the vertex (exact zero on incident facets).
    pub c: Vec<f64>,
    /// `Eᵀ a_k` for every facet.
    pub a_s: Vec<DVector<f64>>,
}

/// Facet data `ℓ_k(x) = ⟨a_k, x⟩ + b_k ≥ 0` with inward primitive `a_k`.
#[derive(Debug, Clone)]
pub struct ToricGeometry {
    pub n: usize,
    pub a: Vec<DVector<f64>>,
    pub b: Vec<f64>,
    pub charts: Vec<Chart>,
    pub barycenter: DVector<f64>,
    pub volume: f64,
}

impl ToricGeometry {
    pub fn new(p: &Polytope) -> Result<Self, AnalysisError> {
        if !p.is_delzant() {
            return Err(AnalysisError::NonDelzant);
        }
        let n = p.dim();
        let a: Vec<DVector<f64>> =
            p.halfspaces().iter().map(|h| DVector::from_iterator(n, h.normal.iter().map(|&c| -(c as f64)))).collect();
        let b: Vec<f64> = p.halfspaces().iter().map(|h| to_f64(&h.offset)).collect();
        let mut charts = Vec::new();
        for (vi, v) in p.vertices().iter().enumerate() {
            let inc = p.incident_facets(vi);
            let mut u = DMatrix::<f64>::zeros(n, n);
            for (r, &k) in inc.iter().enumerate() {
                for c in 0..n {
                    u[(r, c)] = a[k][c];
                }
            }
            let normals = u.clone();
            let mut edges = u.try_inverse().ok_or(AnalysisError::NonDelzant)?;
            edges.iter_mut().for_each(|e| *e = e.round());
            let c = p
                .halfspaces()
                .iter()
                .enumerate()
                .map(|(k, h)| if inc.contains(&k) { 0.0 } else { to_f64(&(&h.offset - dot_int(&h.normal, v))) })
                .collect();
            let a_s = a.iter().map(|ak| edges.transpose() * ak).collect();
            charts.push(Chart { vertex: DVector::from_iterator(n, v.iter().map(to_f64)), edges, normals, c, a_s });
        }
        let vd = p.volume_data();
        Ok(ToricGeometry {
            n,
            a,
            b,
            charts,
            barycenter: DVector::from_iterator(n, vd.barycenter.iter().map(to_f64)),
            volume: to_f64(&vd.volume),
        })
    }

    pub fn point(&self, chart: usize, s: DVector<f64>) -> Point {
        let ch = &self.charts[chart];
        let x = &ch.vertex + &ch.edges * &s;
        let slack = ch.c.iter().zip(&ch.a_s).map(|(c, a)| c + a.dot(&s)).collect();
        Point { chart, s, x, slack }
    }

    /// Chart coordinates of an interior point given in x.
    pub fn point_from_x(&self, chart: usize, x: &DVector<f64>) -> Point {
        let ch = &self.charts[chart];
        self.point(chart, &ch.normals * (x - &ch.vertex))
    }
}

#[derive(Debug, Clone)]
pub struct Point {
    pub chart: usize,
    pub s: DVector<f64>,
    pub x: DVector<f64>,
    pub slack: Vec<f64>,
}

impl Point {
    pub fn feasible(&self) -> bool {
        self.slack.iter().all(|&l| l > 0.0) && self.s.iter().all(|&v| v > 0.0)
    }

    /// Diagonal scaling `d_i = √min(s_i, 1)` of the chart coordinates.
    pub fn scaling(&self) -> DVector<f64> {
        self.s.map(|v| v.min(1.0).sqrt())
    }
}

/// Linear coordinates `x = v + B·t` with `B = E·diag(d)`, in which the
/// Hessian of a Guillemin-type potential stays well conditioned near the
/// boundary.
#[derive(Debug, Clone)]
pub struct ChartBasis {
    pub b: DMatrix<f64>,
    pub inv: DMatrix<f64>,
    pub d: DVector<f64>,
    /// `log |det B|`.
    pub log_det: f64,
}

impl ChartBasis {
    pub fn new(geo: &ToricGeometry, p: &Point) -> Self {
        let d = p.scaling();
        let ch = &geo.charts[p.chart];
        let mut b = ch.edges.clone();
        let mut inv = ch.normals.clone();
        for (c, &dc) in d.iter().enumerate() {
            b.column_mut(c).scale_mut(dc);
            inv.row_mut(c).scale_mut(1.0 / dc);
        }
        let log_det = d.iter().map(|v| v.ln()).sum();
        ChartBasis { b, inv, d, log_det }
    }
}

/// Pulls an x-jet back to the coordinates `t` with `x = v + B·t`.
pub fn transform_jet(j: &Jet, b: &DMatrix<f64>) -> Jet {
    let n = j.grad.len();
    let bt = b.transpose();
    let mut out = Jet::zero(
        n,
        if !j.d4.is_empty() {
            4
        } else if !j.d3.is_empty() {
            3
        } else {
            2
        },
    );
    out.value = j.value;
    out.grad = &bt * &j.grad;
    out.hess = &bt * &j.hess * b;
    if !j.d3.is_empty() {
        let d3: Vec<DMatrix<f64>> = j.d3.iter().map(|m| &bt * m * b).collect();
        for k in 0..n {
            for i in 0..n {
                out.d3[k].axpy(b[(i, k)], &d3[i], 1.0);
            }
        }
    }
    if !j.d4.is_empty() {
        for i in 0..n {
            for m in 0..n {
                let t = &bt * &j.d4[i][m] * b;
                for k in 0..n {
                    for l in 0..n {
                        let w = b[(i, k)] * b[(m, l)];
                        if w != 0.0 {
                            out.d4[k][l].axpy(w, &t, 1.0);
                        }
                    }
                }
            }
        }
    }
    out
}

trait MatAxpy {
    fn axpy(&mut self, a: f64, x: &Self, b: f64);
}

impl MatAxpy for DMatrix<f64> {
    fn axpy(&mut self, a: f64, x: &Self, b: f64) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s = b * *s + a * v;
        }
    }
}

/// Value and x-derivatives up to the requested order.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    /// `d3[k] = ∂_k H`.
    pub d3: Vec<DMatrix<f64>>,
    /// `d4[k][l] = ∂_k ∂_l H`.
    pub d4: Vec<Vec<DMatrix<f64>>>,
}

impl Jet {
    pub fn zero(n: usize, order: usize) -> Self {
        Jet {
            value: 0.0,
            grad: DVector::zeros(n),
            hess: DMatrix::zeros(n, n),
            d3: if order >= 3 { vec![DMatrix::zeros(n, n); n] } else { Vec::new() },
            d4: if order >= 4 { vec![vec![DMatrix::zeros(n, n); n]; n] } else { Vec::new() },
        }
    }

    pub fn add_scaled(&mut self, other: &Jet, t: f64) {
        self.value += t * other.value;
        self.grad.axpy(t, &other.grad, 1.0);
        self.hess.axpy(t, &other.hess, 1.0);
        for (a, b) in self.d3.iter_mut().zip(&other.d3) {
            a.axpy(t, b, 1.0);
        }
        for (ra, rb) in self.d4.iter_mut().zip(&other.d4) {
            for (a, b) in ra.iter_mut().zip(rb) {
                a.axpy(t, b, 1.0);
            }
        }
    }
}

/// Convex quadratic `½ xᵀ M x + ⟨q, x⟩`, the closed-form correction hook.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub m: DMatrix<f64>,
    pub q: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct SymplecticPotential {
    pub geometry: std::sync::Arc<ToricGeometry>,
    pub correction: Option<Quadratic>,
}

pub fn guillemin_potential(p: &Polytope) -> Result<SymplecticPotential, AnalysisError> {
    Ok(SymplecticPotential { geometry: std::sync::Arc::new(ToricGeometry::new(p)?), correction: None })
}

impl SymplecticPotential {
    pub fn n(&self) -> usize {
        self.geometry.n
    }

    pub fn value(&self, p: &Point) -> f64 {
        let mut v: f64 = p.slack.iter().map(|&l| 0.5 * l * l.ln()).sum();
        if let Some(c) = &self.correction {
            v += 0.5 * p.x.dot(&(&c.m * &p.x)) + c.q.dot(&p.x);
        }
        v
    }

    pub fn jet(&self, p: &Point, order: usize) -> Jet {
        let n = self.n();
        let mut j = Jet::zero(n, order);
        for (k, &l) in p.slack.iter().enumerate() {
            let a = &self.geometry.a[k];
            j.value += 0.5 * l * l.ln();
            j.grad.axpy(0.5 * (l.ln() + 1.0), a, 1.0);
            let aa = a * a.transpose();
            j.hess.axpy(0.5 / l, &aa, 1.0);
            if order >= 3 {
                let w = -0.5 / (l * l);
                for i in 0..n {
                    j.d3[i].axpy(w * a[i], &aa, 1.0);
                }
            }
            if order >= 4 {
                let w = 1.0 / (l * l * l);
                for i in 0..n {
                    for m in 0..n {
                        j.d4[i][m].axpy(w * a[i] * a[m], &aa, 1.0);
                    }
                }
            }
        }
        if let Some(c) = &self.correction {
            j.value += 0.5 * p.x.dot(&(&c.m * &p.x)) + c.q.dot(&p.x);
            j.grad += &c.m * &p.x + &c.q;
            j.hess += &c.m;
        }
        j
    }

    /// Jet in the scaled chart coordinates of `p`, together with the basis.
    pub fn chart_jet(&self, p: &Point, order: usize) -> (ChartBasis, Jet) {
        let n = self.n();
        let basis = ChartBasis::new(&self.geometry, p);
        let ch = &self.geometry.charts[p.chart];
        let mut j = Jet::zero(n, order);
        for (k, &l) in p.slack.iter().enumerate() {
            let a = ch.a_s[k].component_mul(&basis.d);
            j.value += 0.5 * l * l.ln();
            j.grad.axpy(0.5 * (l.ln() + 1.0), &a, 1.0);
            let aa = &a * a.transpose();
            j.hess.axpy(0.5 / l, &aa, 1.0);
            if order >= 3 {
                let w = -0.5 / (l * l);
                for i in 0..n {
                    if a[i] != 0.0 {
                        j.d3[i].axpy(w * a[i], &aa, 1.0);
                    }
                }
            }
            if order >= 4 {
                let w = 1.0 / (l * l * l);
                for i in 0..n {
                    for m in 0..n {
                        if a[i] != 0.0 && a[m] != 0.0 {
                            j.d4[i][m].axpy(w * a[i] * a[m], &aa, 1.0);
                        }
                    }
                }
            }
        }
        if let Some(c) = &self.correction {
            let mut q = Jet::zero(n, order);
            q.value = 0.5 * p.x.dot(&(&c.m * &p.x)) + c.q.dot(&p.x);
            q.grad = &c.m * &p.x + &c.q;
            q.hess = c.m.clone();
            j.add_scaled(&transform_jet(&q, &basis.b), 1.0);
        }
        (basis, j)
    }
}

/// Soft maximum of affine pieces with explicit derivatives.
#[derive(Debug, Clone)]
pub struct SmoothPl {
    pub w: Vec<DVector<f64>>,
    pub c: Vec<f64>,
    pub beta: f64,
}

impl SmoothPl {
    pub fn new(g: &PLConvexFn, beta: f64) -> Self {
        let n = g.dim();
        SmoothPl {
            w: g.pieces().iter().map(|p| DVector::from_iterator(n, p.gradient.iter().map(to_f64))).collect(),
            c: g.pieces().iter().map(|p| to_f64(&p.constant)).collect(),
            beta,
        }
    }

    pub fn is_affine(&self) -> bool {
        self.w.len() == 1
    }

    fn weights(&self, x: &DVector<f64>) -> (f64, Vec<f64>) {
        let vals: Vec<f64> = self.w.iter().zip(&self.c).map(|(w, c)| w.dot(x) + c).collect();
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = vals.iter().map(|v| ((v - m) * self.beta).exp()).collect();
        let z: f64 = e.iter().sum();
        (m + z.ln() / self.beta, e.iter().map(|v| v / z).collect())
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        if self.is_affine() {
            return self.w[0].dot(x) + self.c[0];
        }
        self.weights(x).0
    }

    pub fn jet(&self, x: &DVector<f64>, order: usize) -> Jet {
        let n = x.len();
        let mut j = Jet::zero(n, order);
        if self.is_affine() {
            j.value = self.w[0].dot(x) + self.c[0];
            j.grad.copy_from(&self.w[0]);
            return j;
        }
        let (v, p) = self.weights(x);
        j.value = v;
        for (pi, w) in p.iter().zip(&self.w) {
            j.grad.axpy(*pi, w, 1.0);
        }
        let d: Vec<DVector<f64>> = self.w.iter().map(|w| w - &j.grad).collect();
        let b = self.beta;
        let mut cov = DMatrix::<f64>::zeros(n, n);
        for (pi, di) in p.iter().zip(&d) {
            cov.axpy(*pi, &(di * di.transpose()), 1.0);
        }
        j.hess = &cov * b;
        if order >= 3 {
            for (pi, di) in p.iter().zip(&d) {
                let dd = di * di.transpose();
                for k in 0..n {
                    j.d3[k].axpy(b * b * pi * di[k], &dd, 1.0);
                }
            }
        }
        if order >= 4 {
            let b3 = b * b * b;
            for (pi, di) in p.iter().zip(&d) {
                let dd = di * di.transpose();
                for k in 0..n {
                    for l in 0..n {
                        j.d4[k][l].axpy(b3 * pi * di[k] * di[l], &dd, 1.0);
                    }
                }
            }
            for k in 0..n {
                for l in 0..n {
                    for r in 0..n {
                        for s in 0..n {
                            j.d4[k][l][(r, s)] -= b3
                                * (cov[(k, l)] * cov[(r, s)] + cov[(k, r)] * cov[(l, s)] + cov[(k, s)] * cov[(l, r)]);
                        }
                    }
                }
            }
        }
        j
    }
}

/// `−Σ_{jk} ∂²u^{jk}/∂x_j∂x_k` from a fourth-order jet.
pub fn raw_abreu(j: &Jet) -> Result<f64, AnalysisError> {
    let (hinv, l, d2logdet) = log_det_derivatives(j)?;
    let v = &hinv * &l;
    Ok(-v.dot(&l) + hinv.component_mul(&d2logdet).sum())
}

/// `(H⁻¹, ∇ log det H, D² log det H)`.
pub fn log_det_derivatives(j: &Jet) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>), AnalysisError> {
    let n = j.grad.len();
    let hinv = invert_spd(&j.hess)?;
    let ht: Vec<DMatrix<f64>> = j.d3.iter().map(|t| &hinv * t).collect();
    let l = DVector::from_iterator(n, ht.iter().map(|m| m.trace()));
    let mut d2 = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        for m in 0..n {
            d2[(k, m)] = -(&ht[k] * &ht[m]).trace() + (&hinv * &j.d4[k][m]).trace();
        }
    }
    Ok((hinv, l, d2))
}

pub fn invert_spd(h: &DMatrix<f64>) -> Result<DMatrix<f64>, AnalysisError> {
    h.clone().cholesky().map(|c| c.inverse()).ok_or(AnalysisError::SingularHessian)
}

/// Abreu scalar curvature with the calibrated constant κ = 1/2.
pub fn abreu_scalar_curvature(u: &SymplecticPotential, p: &Point) -> Result<f64, AnalysisError> {
    Ok(super::KAPPA * raw_abreu(&u.chart_jet(p, 4).1)?)
}

/// Fourth-order central-difference Abreu value, used as an independent check.
pub fn abreu_finite_difference(u: &SymplecticPotential, x: &DVector<f64>, h: f64) -> Result<f64, AnalysisError> {
    let n = u.n();
    let geo = &u.geometry;
    let inv_hess = |y: &DVector<f64>| -> Result<DMatrix<f64>, AnalysisError> {
        let p = geo.point_from_x(0, y);
        invert_spd(&u.jet(&p, 2).hess)
    };
    let stencil = [(-2.0, 1.0 / 12.0), (-1.0, -2.0 / 3.0), (1.0, 2.0 / 3.0), (2.0, -1.0 / 12.0)];
    let mut total = 0.0;
    for j in 0..n {
        for k in 0..n {
            // ∂_j ∂_k u^{jk} as a nested first-derivative stencil
            let mut acc = 0.0;
            for &(a, wa) in &stencil {
                for &(b, wb) in &stencil {
                    let mut y = x.clone();
                    y[j] += a * h;
                    y[k] += b * h;
                    acc += wa * wb * inv_hess(&y)?[(j, k)];
                }
            }
            total += acc / (h * h);
        }
    }
    Ok(-total)
}
