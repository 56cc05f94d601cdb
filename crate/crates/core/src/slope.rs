//! Limit slopes of functional traces and the slope-theorem verdicts.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{guillemin_potential, AnalysisError, QuadConfig, RayEngine, RayPotential, SmoothPl};
use crate::functionals::{functional_trace, j_alpha_twisted, mabuchi, FunctionalError, FunctionalSample, PathSchedule};
use crate::invariants::{
    am_top, chow_weight, donaldson_futaki, minimum_norm, slope_mu, twisted_weights, InvariantError,
};
use crate::pl::{Normalization, ToricTestConfig};
use crate::polytope::Polytope;
use crate::rational::{factorial, fmt_rat, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SlopeError {
    #[error("need at least 6 samples with τ_max ≥ 8, got {samples} samples up to τ = {tau_max}")]
    InsufficientSamples { samples: usize, tau_max: f64 },
    #[error("τ samples must be strictly increasing")]
    NonMonotoneTau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeModel {
    WindowDiff,
    ExpFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub value: f64,
    pub model: SlopeModel,
    pub residual: f64,
    pub tau_max: f64,
    pub samples_used: usize,
}

const WINDOW: usize = 4;

/// Least-squares fit of `a + s·τ + c·e^{−τ}`; returns `s` and the largest
/// pointwise misfit.
fn exp_fit(trace: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let m = trace.len();
    let t0 = trace[0].0;
    let a = DMatrix::from_fn(m, 3, |i, j| match j {
        0 => 1.0,
        1 => trace[i].0 - t0,
        _ => (-(trace[i].0 - t0)).exp(),
    });
    let b = DVector::from_iterator(m, trace.iter().map(|t| t.1));
    let x = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let misfit = (a * &x - b).amax();
    x[1].is_finite().then_some((x[1], misfit))
}

/// Limit slope of `(τ, value, err)` samples.
///
/// The reported value is the mean difference quotient over the last four
/// intervals unless the exponential model reproduces every sample, in
/// which case the fitted slope is reported.  The residual is the distance
/// between the two.
pub fn estimate_limit_slope(trace: &[(f64, f64, f64)]) -> Result<SlopeEstimate, SlopeError> {
    if trace.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(SlopeError::NonMonotoneTau);
    }
    let tau_max = trace.last().map(|t| t.0).unwrap_or(0.0);
    if trace.len() < 6 || tau_max < 8.0 {
        return Err(SlopeError::InsufficientSamples { samples: trace.len(), tau_max });
    }
    let tail = &trace[trace.len() - WINDOW - 1..];
    let quotients: Vec<f64> = tail.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let window = quotients.iter().sum::<f64>() / quotients.len() as f64;
    let scale = trace.iter().map(|t| t.1.abs()).fold(1.0, f64::max);
    let noise = trace.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
    let (fit, misfit) = exp_fit(trace).unwrap_or((window, f64::INFINITY));
    let residual = (window - fit).abs();
    let (value, model) =
        if misfit <= 1e-10 * scale + noise { (fit, SlopeModel::ExpFit) } else { (window, SlopeModel::WindowDiff) };
    Ok(SlopeEstimate { value, model, residual, tau_max, samples_used: trace.len() })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Slope(#[from] SlopeError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("the J_alpha theorem needs an alpha polytope")]
    MissingAlpha,
    #[error("no candidate points to scan")]
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Theorem {
    Am,
    Df,
    MinNorm,
    JAlpha,
    /// Vertex of P.
    Point(Vec<Rational>),
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theorem::Am => f.write_str("AM"),
            Theorem::Df => f.write_str("DF"),
            Theorem::MinNorm => f.write_str("MINNORM"),
            Theorem::JAlpha => f.write_str("JALPHA"),
            Theorem::Point(p) => {
                let c: Vec<String> = p.iter().map(fmt_rat).collect();
                write!(f, "POINT({})", c.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Certified,
    Experimental,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub schedule: PathSchedule,
    /// Overrides the per-theorem default tolerance.
    pub tol: Option<f64>,
    pub alpha: Option<Polytope>,
    pub quad: Option<QuadConfig>,
}

/// One slope-theorem verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub theorem: String,
    pub exact: String,
    pub slope: f64,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub tier: Tier,
    #[serde(skip)]
    pub exact_value: f64,
    #[serde(skip)]
    pub estimate: Option<SlopeEstimate>,
    /// `(τ, F(τ), err)` after shift accounting.
    #[serde(skip)]
    pub trace: Vec<(f64, f64, f64)>,
}

impl Verdict {
    /// Difference quotients `(τ_mid, ΔF/Δτ)` of the trace.
    pub fn derivative_trace(&self) -> Vec<(f64, f64)> {
        self.trace.windows(2).map(|w| (0.5 * (w[0].0 + w[1].0), (w[1].1 - w[0].1) / (w[1].0 - w[0].0))).collect()
    }
}

fn default_tol(th: &Theorem, affine: bool) -> f64 {
    if !affine {
        return 3e-2;
    }
    match th {
        Theorem::Am | Theorem::Point(_) => 1e-3,
        _ => 1e-2,
    }
}

/// Ray engine for a configuration, optionally carrying α data.
pub fn ray_engine(cfg: &ToricTestConfig, beta0: f64, alpha: Option<&Polytope>) -> Result<RayEngine, VerifyError> {
    let n = cfg.dim();
    let mu_n = to_f64(&slope_mu(&cfg.base)?) * n as f64;
    let mut e = RayEngine::new(guillemin_potential(&cfg.base)?, SmoothPl::new(&cfg.g, beta0), mu_n);
    if let Some(pa) = alpha {
        e = e.with_alpha(guillemin_potential(pa)?);
    }
    Ok(e)
}

/// θ_τ at the ξ-point where x sits at `x` (interior) or, for a vertex,
/// exponentially close to it.
fn theta_probe(engine: &RayEngine, x: &[f64], vertex: Option<usize>) -> Vec<f64> {
    let geo = &engine.u0.geometry;
    let p = match vertex {
        Some(vi) => geo.point(vi, DVector::from_element(geo.n, 1e-40)),
        None => geo.point_from_x(0, &DVector::from_column_slice(x)),
    };
    RayPotential::reference(&engine.u0).jet(&p, 1).grad.iter().cloned().collect()
}

fn point_trace(engine: &RayEngine, xi: &[f64], sched: &PathSchedule) -> Result<Vec<(f64, f64, f64)>, VerifyError> {
    sched.taus.par_iter().map(|&t| Ok((t, engine.evaluate_node(xi, t, sched.beta(t))?.phi, 0.0))).collect()
}

fn verdict(
    th: &Theorem,
    exact: &Rational,
    trace: Vec<(f64, f64, f64)>,
    affine: bool,
    tol: Option<f64>,
) -> Result<Verdict, VerifyError> {
    let est = estimate_limit_slope(&trace)?;
    let tol = tol.unwrap_or_else(|| default_tol(th, affine));
    let e = to_f64(exact);
    Ok(Verdict {
        theorem: th.to_string(),
        exact: fmt_rat(exact),
        slope: est.value,
        residual: est.residual,
        tol,
        pass: est.value.is_finite() && (est.value - e).abs() <= tol * (1.0 + e.abs()),
        tier: if affine { Tier::Certified } else { Tier::Experimental },
        exact_value: e,
        estimate: Some(est),
        trace,
    })
}

/// Verdicts for several theorems sharing one functional trace.
///
/// The functional trace uses the min-zero normalization; AM values are
/// shifted by `(n+1)!·c·Vol(P)` so that they refer to Q.  POINT uses the
/// average-zero normalization, in which `lim θ̇_τ(v) = −Ch_v`.
pub fn verify_theorems(
    cfg: &ToricTestConfig,
    theorems: &[Theorem],
    opts: &VerifyOptions,
) -> Result<(Vec<Verdict>, Vec<FunctionalSample>), VerifyError> {
    let affine = cfg.g.is_affine();
    let needs_trace = theorems.iter().any(|t| !matches!(t, Theorem::Point(_)));
    let wants_alpha = theorems.contains(&Theorem::JAlpha);
    if wants_alpha && opts.alpha.is_none() {
        return Err(VerifyError::MissingAlpha);
    }
    let norm = cfg.normalize(Normalization::MinZero);
    let mut samples = Vec::new();
    if needs_trace {
        let mut engine = ray_engine(&norm, opts.schedule.beta0, if wants_alpha { opts.alpha.as_ref() } else { None })?;
        if let Some(q) = &opts.quad {
            engine.quad = q.clone();
        }
        samples = functional_trace(&engine, &opts.schedule)?;
    }
    let n = cfg.dim();
    let mut out = Vec::new();
    for th in theorems {
        let v = match th {
            Theorem::Am => {
                let shift = to_f64(&(factorial(n + 1) * &norm.shift * norm.base.volume()));
                let tr = samples.iter().map(|s| (s.tau, s.am + shift * s.tau, s.err_estimate)).collect();
                verdict(th, &am_top(&norm)?, tr, affine, opts.tol)?
            }
            Theorem::Df => {
                let tr = samples
                    .iter()
                    .map(|s| Ok((s.tau, mabuchi(s)?, s.err_estimate)))
                    .collect::<Result<Vec<_>, FunctionalError>>()?;
                verdict(th, &donaldson_futaki(&norm)?.value, tr, affine, opts.tol)?
            }
            Theorem::MinNorm => {
                let tr = samples.iter().map(|s| (s.tau, s.a0 - s.am / (n + 1) as f64, s.err_estimate)).collect();
                verdict(th, &minimum_norm(&norm)?.value, tr, affine, opts.tol)?
            }
            Theorem::JAlpha => {
                let pa = opts.alpha.as_ref().ok_or(VerifyError::MissingAlpha)?;
                let tw = twisted_weights(&norm, pa)?;
                let gamma = to_f64(&tw.gamma);
                let tr = samples
                    .iter()
                    .map(|s| Ok((s.tau, j_alpha_twisted(s, gamma)?.0, s.err_estimate)))
                    .collect::<Result<Vec<_>, FunctionalError>>()?;
                verdict(th, &tw.j_weight, tr, affine, opts.tol)?
            }
            Theorem::Point(v) => {
                let avg = cfg.normalize(Normalization::AverageZero);
                let vi = avg.base.vertex_index(v).ok_or(InvariantError::NotAVertex)?;
                let exact = -chow_weight(&avg, v)?;
                let engine = ray_engine(&avg, opts.schedule.beta0, None)?;
                let xi = theta_probe(&engine, &[], Some(vi));
                let tr = point_trace(&engine, &xi, &opts.schedule)?;
                verdict(th, &exact, tr, affine, opts.tol)?
            }
        };
        out.push(v);
    }
    Ok((out, samples))
}

pub fn verify_theorem(cfg: &ToricTestConfig, theorem: Theorem, opts: &VerifyOptions) -> Result<Verdict, VerifyError> {
    Ok(verify_theorems(cfg, &[theorem], opts)?.0.remove(0))
}

pub enum Candidates {
    Vertices,
    /// Interior points in x-coordinates.
    Grid(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateWeight {
    pub point: Vec<String>,
    /// Exact for vertices, numeric otherwise.
    pub chow: f64,
    pub exact: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DestabilizerReport {
    pub best: CandidateWeight,
    pub destabilizing: bool,
    pub candidates: Vec<CandidateWeight>,
}

/// Maximizes the Chow weight over the candidates.
pub fn scan_destabilizer(
    cfg: &ToricTestConfig,
    candidates: &Candidates,
    sched: &PathSchedule,
) -> Result<DestabilizerReport, VerifyError> {
    let avg = cfg.normalize(Normalization::AverageZero);
    let mut list = Vec::new();
    match candidates {
        Candidates::Vertices => {
            for v in avg.base.vertices() {
                let ch = chow_weight(&avg, v)?;
                list.push((
                    to_f64(&ch),
                    Some(ch.clone()),
                    CandidateWeight {
                        point: v.iter().map(fmt_rat).collect(),
                        chow: to_f64(&ch),
                        exact: Some(fmt_rat(&ch)),
                    },
                ));
            }
        }
        Candidates::Grid(points) => {
            let engine = ray_engine(&avg, sched.beta0, None)?;
            for x in points {
                let xi = theta_probe(&engine, x, None);
                let est = estimate_limit_slope(&point_trace(&engine, &xi, sched)?)?;
                list.push((
                    -est.value,
                    None,
                    CandidateWeight {
                        point: x.iter().map(|v| format!("{v}")).collect(),
                        chow: -est.value,
                        exact: None,
                    },
                ));
            }
        }
    }
    let best = list
        .iter()
        .max_by(|a, b| match (&a.1, &b.1) {
            (Some(x), Some(y)) => x.cmp(y),
            _ => a.0.total_cmp(&b.0),
        })
        .ok_or(VerifyError::NoCandidates)?;
    let destabilizing = match &best.1 {
        Some(q) => q.is_positive(),
        None => best.0 > 1e-6,
    };
    let best = best.2.clone();
    Ok(DestabilizerReport { best, destabilizing, candidates: list.into_iter().map(|c| c.2).collect() })
}
