//! Energy functionals along sampled rays: AM, I, J, L_α, the Mabuchi
//! functional by two routes, 𝒥_α, the twisted Mabuchi functional and the
//! L¹ path quantities.
//!
//! Path forms are integrated in `s ∈ [0, τ]` with adaptive (3, 7)
//! Gauss–Kronrod panels; every panel node is a full [`RayState`].

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::quadrature::gauss_kronrod_7;
use crate::analysis::{ray_state, AnalysisError, RayEngine, RayState, KAPPA};
use crate::pl::{Normalization, ToricTestConfig};
use crate::slope::{estimate_limit_slope, SlopeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FunctionalError {
    #[error("L_α requested but no α class was supplied")]
    MissingAlpha,
    #[error("Mabuchi routes disagree at τ = {tau}: explicit {explicit}, path {path}")]
    RouteMismatch { tau: f64, explicit: f64, path: f64 },
    #[error("configuration must be average-zero normalized, found {0}")]
    NormalizationRequired(Normalization),
    #[error("τ schedule must be nonempty, positive and increasing")]
    BadSchedule,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Slope(#[from] SlopeError),
}

/// τ samples and the smoothing schedule `β(τ) = β₀·τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSchedule {
    pub taus: Vec<f64>,
    pub beta0: f64,
    /// Relative accuracy requested from the s-quadrature.
    pub rel_tol: f64,
    pub max_depth: usize,
}

impl Default for PathSchedule {
    fn default() -> Self {
        PathSchedule { taus: vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0], beta0: 10.0, rel_tol: 1e-7, max_depth: 4 }
    }
}

impl PathSchedule {
    pub fn with_taus(taus: Vec<f64>) -> Self {
        PathSchedule { taus, ..Default::default() }
    }

    pub fn beta(&self, tau: f64) -> f64 {
        (self.beta0 * tau).max(self.beta0)
    }

    fn validate(&self) -> Result<(), FunctionalError> {
        let ok = !self.taus.is_empty()
            && self.taus[0] > 0.0
            && self.taus.windows(2).all(|w| w[1] > w[0])
            && self.taus.iter().all(|t| t.is_finite());
        if ok {
            Ok(())
        } else {
            Err(FunctionalError::BadSchedule)
        }
    }
}

/// Everything known about the functionals at one τ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalSample {
    pub tau: f64,
    pub beta: f64,
    pub n: usize,
    pub am: f64,
    /// `∫ θ ωⁿ`.
    pub a0: f64,
    /// `∫ θ ω_θⁿ`.
    pub a1: f64,
    /// `∫ log(ω_θⁿ/ωⁿ) ω_θⁿ`.
    pub entropy: f64,
    pub l_ric: f64,
    /// `−∫₀^τ ∫ θ̇ (S − nμ) ω_sⁿ ds`.
    pub mabuchi_path: f64,
    /// `n·μ` used in the Mabuchi forms.
    pub mu_n: f64,
    pub l_alpha: Option<f64>,
    /// `‖θ̇_τ‖₁ = ∫ |θ̇| ω_θⁿ`.
    pub l1_rate: f64,
    /// `ℓ₁` of the path up to τ.
    pub l1_length: f64,
    pub err_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub am: f64,
    pub i_val: f64,
    pub j_val: f64,
    pub l_alpha: Option<f64>,
    pub tau: f64,
}

const AM: usize = 0;
const RIC: usize = 1;
const CURV: usize = 2;
const ALPHA: usize = 3;
const L1: usize = 4;
const WIDTH: usize = 5;

/// Path integrands `d/ds` of AM, L_Ric, −M, L_α and ℓ₁ at one state.
fn rates(st: &RayState, mu_n: f64) -> [f64; WIDTH] {
    let n1 = (st.n + 1) as f64;
    let mut r = [0.0; WIDTH];
    r[AM] = n1 * st.integrate_tau(|d| d.phi_dot);
    r[RIC] = st.integrate_tau(|d| d.phi_dot * d.ric_trace);
    r[CURV] = st.integrate_tau(|d| d.phi_dot * (d.scalar_curvature - mu_n));
    r[ALPHA] = st.integrate_tau(|d| d.phi_dot * d.alpha_trace);
    r[L1] = st.integrate_tau(|d| d.phi_dot.abs());
    r
}

/// Gauss–Kronrod integral of the rate vector over `[a, b]` with bisection.
fn gk_segment(
    engine: &RayEngine,
    beta: f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    depth: usize,
) -> Result<([f64; WIDTH], f64), FunctionalError> {
    let (x, wk, wg) = gauss_kronrod_7();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let vals: Vec<[f64; WIDTH]> = x
        .par_iter()
        .map(|t| Ok(rates(&ray_state(engine, mid + half * t, beta)?, engine.mu_n)))
        .collect::<Result<_, FunctionalError>>()?;
    let mut k = [0.0; WIDTH];
    let mut g = [0.0; WIDTH];
    for (i, v) in vals.iter().enumerate() {
        for c in 0..WIDTH {
            k[c] += half * wk[i] * v[c];
            g[c] += half * wg[i] * v[c];
        }
    }
    let scale = k.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    // |K − G| measures the Gauss error; the usual power rescaling turns it
    // into a realistic Kronrod error.
    let raw = (0..WIDTH).map(|c| (k[c] - g[c]).abs()).fold(0.0, f64::max);
    let err = raw * (200.0 * raw / scale).powf(1.5).min(1.0);
    if err <= rel_tol * scale || depth == 0 {
        return Ok((k, err));
    }
    let (l, el) = gk_segment(engine, beta, a, mid, rel_tol, depth - 1)?;
    let (r, er) = gk_segment(engine, beta, mid, b, rel_tol, depth - 1)?;
    let mut out = [0.0; WIDTH];
    for c in 0..WIDTH {
        out[c] = l[c] + r[c];
    }
    Ok((out, el + er))
}

/// Splits `[a, b]` into panels of length at most 2, graded geometrically
/// towards `s = 0` at the scale `1/β` when the smoothing is active.
fn breakpoints(engine: &RayEngine, beta: f64, a: f64, b: f64) -> Vec<f64> {
    let mut pts = vec![a];
    if !engine.g.is_affine() {
        let mut s = 1.0 / beta;
        while s < b.min(2.0) {
            if s > a {
                pts.push(s);
            }
            s *= 2.0;
        }
    }
    let mut out = vec![a];
    pts.push(b);
    pts.dedup();
    for w in pts.windows(2) {
        let pieces = ((w[1] - w[0]) / 2.0).ceil().max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        for i in 1..=pieces {
            out.push(if i == pieces { w[1] } else { w[0] + h * i as f64 });
        }
    }
    out
}

fn path_integral(
    engine: &RayEngine,
    beta: f64,
    a: f64,
    b: f64,
    sched: &PathSchedule,
) -> Result<([f64; WIDTH], f64), FunctionalError> {
    let mut total = [0.0; WIDTH];
    let mut err = 0.0;
    for w in breakpoints(engine, beta, a, b).windows(2) {
        let (v, e) = gk_segment(engine, beta, w[0], w[1], sched.rel_tol, sched.max_depth)?;
        for c in 0..WIDTH {
            total[c] += v[c];
        }
        err += e;
    }
    Ok((total, err))
}

fn close_sample(
    engine: &RayEngine,
    tau: f64,
    beta: f64,
    path: [f64; WIDTH],
    path_err: f64,
) -> Result<FunctionalSample, FunctionalError> {
    let st = ray_state(engine, tau, beta)?;
    Ok(FunctionalSample {
        tau,
        beta,
        n: st.n,
        am: path[AM],
        a0: st.integrate_ref(|d| d.phi),
        a1: st.integrate_tau(|d| d.phi),
        entropy: st.integrate_tau(|d| d.log_volume_ratio),
        l_ric: path[RIC],
        mabuchi_path: -path[CURV],
        mu_n: engine.mu_n,
        l_alpha: engine.alpha.as_ref().map(|_| path[ALPHA]),
        l1_rate: st.integrate_tau(|d| d.phi_dot.abs()),
        l1_length: path[L1],
        err_estimate: path_err + st.quad_error,
    })
}

/// Functional values at every τ of the schedule.
///
/// For affine `g` the smoothing is inert and one cumulative path serves all
/// samples; otherwise each τ gets its own path at the fixed `β(τ)`.
pub fn functional_trace(engine: &RayEngine, sched: &PathSchedule) -> Result<Vec<FunctionalSample>, FunctionalError> {
    sched.validate()?;
    if engine.g.is_affine() {
        let beta = sched.beta0;
        let mut acc = [0.0; WIDTH];
        let mut err = 0.0;
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(sched.taus.len());
        for &tau in &sched.taus {
            let (v, e) = path_integral(engine, beta, prev, tau, sched)?;
            for c in 0..WIDTH {
                acc[c] += v[c];
            }
            err += e;
            prev = tau;
            out.push(close_sample(engine, tau, sched.beta(tau), acc, err)?);
        }
        return Ok(out);
    }
    sched
        .taus
        .par_iter()
        .map(|&tau| {
            let beta = sched.beta(tau);
            let (v, e) = path_integral(engine, beta, 0.0, tau, sched)?;
            close_sample(engine, tau, beta, v, e)
        })
        .collect()
}

/// Single-τ evaluation with a prescribed β.
pub fn functional_sample(
    engine: &RayEngine,
    tau: f64,
    beta: f64,
    sched: &PathSchedule,
) -> Result<FunctionalSample, FunctionalError> {
    if tau == 0.0 {
        return close_sample(engine, 0.0, beta, [0.0; WIDTH], 0.0);
    }
    let (v, e) = path_integral(engine, beta, 0.0, tau, sched)?;
    close_sample(engine, tau, beta, v, e)
}

pub fn energy_report(s: &FunctionalSample, with_alpha: bool) -> Result<EnergyReport, FunctionalError> {
    if with_alpha && s.l_alpha.is_none() {
        return Err(FunctionalError::MissingAlpha);
    }
    Ok(EnergyReport {
        am: s.am,
        i_val: s.a0 - s.a1,
        j_val: s.a0 - s.am / (s.n + 1) as f64,
        l_alpha: if with_alpha { s.l_alpha } else { None },
        tau: s.tau,
    })
}

/// Explicit form `κ·Ent + n/(n+1)·μ·AM − L_Ric` (the entropy carries the
/// same constant as the curvature).
pub fn mabuchi_explicit(s: &FunctionalSample) -> f64 {
    KAPPA * s.entropy + s.mu_n / (s.n + 1) as f64 * s.am - s.l_ric
}

/// Mabuchi energy by the explicit formula, checked against the path route.
pub fn mabuchi(s: &FunctionalSample) -> Result<f64, FunctionalError> {
    let a = mabuchi_explicit(s);
    let b = s.mabuchi_path;
    if (a - b).abs() > 1e-4 * (1.0 + a.abs()) {
        return Err(FunctionalError::RouteMismatch { tau: s.tau, explicit: a, path: b });
    }
    Ok(a)
}

/// `(𝒥_α, M + 𝒥_α)` with `𝒥_α = L_α − n/(n+1)·γ·AM`.
pub fn j_alpha_twisted(s: &FunctionalSample, gamma: f64) -> Result<(f64, f64), FunctionalError> {
    let l = s.l_alpha.ok_or(FunctionalError::MissingAlpha)?;
    let n = s.n as f64;
    let j = l - n / (n + 1.0) * gamma * s.am;
    Ok((j, mabuchi(s)? + j))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Report {
    /// Extrapolated `lim ‖θ̇_τ‖₁`.
    pub limit: f64,
    /// `ℓ₁` of the path up to the largest τ.
    pub length: f64,
}

/// L¹ norm of the configuration from samples at increasing τ.
pub fn l1_norm_path(cfg: &ToricTestConfig, samples: &[FunctionalSample]) -> Result<L1Report, FunctionalError> {
    if cfg.normalization != Normalization::AverageZero {
        return Err(FunctionalError::NormalizationRequired(cfg.normalization));
    }
    let last = samples.last().ok_or(FunctionalError::BadSchedule)?;
    let limit = if cfg.trivial {
        0.0
    } else if samples.len() >= 6 {
        // d/dτ ℓ₁ = ‖θ̇_τ‖₁, so the limit is the slope of the length trace.
        let trace: Vec<(f64, f64, f64)> = samples.iter().map(|s| (s.tau, s.l1_length, s.err_estimate)).collect();
        estimate_limit_slope(&trace)?.value
    } else {
        last.l1_rate
    };
    Ok(L1Report { limit, length: last.l1_length })
}

/// Writes `tau,AM,I,J,L_alpha,M,J_alpha,M_twisted,err_estimate`; absent
/// quantities are left empty.
pub fn write_trace_csv(samples: &[FunctionalSample], gamma: Option<f64>, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "tau,AM,I,J,L_alpha,M,J_alpha,M_twisted,err_estimate")?;
    for s in samples {
        let e = energy_report(s, false).expect("no alpha requested");
        let m = mabuchi_explicit(s);
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.12e}")).unwrap_or_default();
        let (ja, mt) = match (gamma, s.l_alpha) {
            (Some(g), Some(_)) => {
                let n = s.n as f64;
                let j = s.l_alpha.unwrap_or(0.0) - n / (n + 1.0) * g * s.am;
                (Some(j), Some(m + j))
            }
            _ => (None, None),
        };
        writeln!(
            w,
            "{:.6},{:.12e},{:.12e},{:.12e},{},{:.12e},{},{},{:.3e}",
            s.tau,
            e.am,
            e.i_val,
            e.j_val,
            opt(s.l_alpha),
            m,
            opt(ja),
            opt(mt),
            s.err_estimate
        )?;
    }
    Ok(())
}
