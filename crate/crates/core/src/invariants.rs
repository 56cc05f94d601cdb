//! Exact algebraic invariants of toric test configurations.
//!
//! Conventions: `[ω]ⁿ = n!·Vol(P)`, `c₁·[ω]ⁿ⁻¹ = (n−1)!·Volσ(∂P)` and
//! `[Ω]ⁿ⁺¹ = (n+1)!·Vol(Q)`.

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::pl::{affine_i, make_config, ConfigError, Normalization, PLConvexFn, Shift, ToricTestConfig};
use crate::polytope::{corner_chop, mixed_volume, Polytope, PolytopeError};
use crate::rational::{factorial, fmt_rat, int, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantError {
    #[error("polytope is not Delzant")]
    NonDelzant,
    #[error("configuration must be normalized first")]
    NotNormalized,
    #[error("point is not a vertex of P")]
    NotAVertex,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} distinct nonzero chop parameters, got {got}")]
    TooFewEpsilons { needed: usize, got: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    BoundaryFormula,
    MixedVolume,
    BothAgree,
}

pub fn slope_mu(p: &Polytope) -> Result<Rational, InvariantError> {
    if !p.is_delzant() {
        return Err(InvariantError::NonDelzant);
    }
    let vd = p.volume_data();
    Ok(&vd.boundary_sigma_volume / (&vd.volume * BigInt::from(p.dim())))
}

/// `∫_∂P g dσ − (Volσ(∂P)/Vol(P))·∫_P g dμ`.
pub fn boundary_functional(g: &PLConvexFn) -> Rational {
    let vd = g.domain().volume_data();
    g.boundary_integral() - &vd.boundary_sigma_volume / &vd.volume * g.integral()
}

/// `[Ω]ⁿ⁺¹ = (n+1)!·V(Q,…,Q)`.
pub fn am_top(cfg: &ToricTestConfig) -> Result<Rational, InvariantError> {
    let q = cfg.cayley.vertices();
    let bodies: Vec<&[Vec<Rational>]> = vec![q; cfg.dim() + 1];
    Ok(factorial(cfg.dim() + 1) * mixed_volume(&bodies)?)
}

/// `n/(n+1)·μ·[Ω]ⁿ⁺¹ − (c₁(𝒳) − π*c₁(ℙ¹))·[Ω]ⁿ` evaluated on Q: every facet of
/// Q is a toric divisor contributing `n!·Volσ`, and each fibre contributes
/// `n!·Vol(P)`.
pub fn intersection_df(cfg: &ToricTestConfig) -> Result<Rational, InvariantError> {
    let n = cfg.dim();
    let mu = slope_mu(&cfg.base)?;
    let top = am_top(cfg)?;
    let qv = cfg.cayley.volume_data();
    let pv = cfg.base.volume_data();
    let c1 = factorial(n) * (&qv.boundary_sigma_volume - &pv.volume * int(2));
    Ok(Rational::from_integer(BigInt::from(n)) / BigInt::from(n + 1) * mu * top - c1)
}

/// Reference configuration `[0,1]ⁿ`, `g = max(0, 2x₁ − 1)`; its boundary
/// functional is 1/2 in every dimension.
fn calibration_config(n: usize) -> Result<ToricTestConfig, InvariantError> {
    let p = Polytope::cube(&vec![int(0); n], &vec![int(1); n])?;
    let mut grad = vec![0i64; n];
    let zero = affine_i(&grad, int(0));
    grad[0] = 2;
    let g = PLConvexFn::new(vec![zero, affine_i(&grad, int(-1))], p.clone())?;
    Ok(make_config(&p, &g, Shift::Auto)?.normalize(Normalization::MinZero))
}

/// Dimensional constant `C_n` relating the boundary functional to the
/// intersection-theoretic DF; computed once per dimension.
pub fn calibration_constant(n: usize) -> Result<Rational, InvariantError> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Rational>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(c) = cache.lock().expect("calibration cache").get(&n) {
        return Ok(c.clone());
    }
    let cfg = calibration_config(n)?;
    let c = intersection_df(&cfg)? / boundary_functional(&cfg.g);
    cache.lock().expect("calibration cache").insert(n, c.clone());
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfReport {
    pub value: Rational,
    pub boundary_value: Rational,
    pub intersection_value: Rational,
    pub calibration: Rational,
    pub provenance: Provenance,
}

pub fn donaldson_futaki(cfg: &ToricTestConfig) -> Result<DfReport, InvariantError> {
    cfg.require_normalized().map_err(|_| InvariantError::NotNormalized)?;
    let c = calibration_constant(cfg.dim())?;
    let value = &c * boundary_functional(&cfg.g);
    let intersection_value = intersection_df(cfg)?;
    let provenance = if intersection_value == value { Provenance::BothAgree } else { Provenance::BoundaryFormula };
    Ok(DfReport { boundary_value: value.clone(), value, intersection_value, calibration: c, provenance })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormReport {
    pub value: Rational,
    pub closed_form: Rational,
    pub provenance: Provenance,
}

/// `[Ω].[q*ω]ⁿ − [Ω]ⁿ⁺¹/(n+1)` with `[Ω].[q*ω]ⁿ = (n+1)!·V(Q, P×0, …, P×0)`.
pub fn minimum_norm(cfg: &ToricTestConfig) -> Result<NormReport, InvariantError> {
    cfg.require_normalized().map_err(|_| InvariantError::NotNormalized)?;
    let n = cfg.dim();
    let flat = lifted(&cfg.base);
    let mut bodies: Vec<&[Vec<Rational>]> = vec![cfg.cayley.vertices()];
    bodies.extend(std::iter::repeat_n(flat.as_slice(), n));
    let mixed = factorial(n + 1) * mixed_volume(&bodies)?;
    let value = mixed - factorial(n) * cfg.cayley.volume();
    let closed_form = factorial(n) * (cfg.g.integral() - cfg.g.min_value() * cfg.base.volume());
    let provenance = if value == closed_form { Provenance::BothAgree } else { Provenance::MixedVolume };
    Ok(NormReport { value, closed_form, provenance })
}

fn lifted(p: &Polytope) -> Vec<Vec<Rational>> {
    p.vertices().iter().map(|v| v.iter().cloned().chain(std::iter::once(Rational::zero())).collect()).collect()
}

/// `Ch_v = g(v) − avg_P g`.
pub fn chow_weight(cfg: &ToricTestConfig, v: &[Rational]) -> Result<Rational, InvariantError> {
    if cfg.base.vertex_index(v).is_none() {
        return Err(InvariantError::NotAVertex);
    }
    Ok(cfg.g.eval(v) - cfg.g.average())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwistedWeights {
    pub gamma: Rational,
    pub j_weight: Rational,
    pub twisted_df: Rational,
}

pub fn twisted_weights(cfg: &ToricTestConfig, p_alpha: &Polytope) -> Result<TwistedWeights, InvariantError> {
    let n = cfg.dim();
    if p_alpha.dim() != n {
        return Err(InvariantError::DimensionMismatch { expected: n, got: p_alpha.dim() });
    }
    let p = cfg.base.vertices();
    let mut bodies: Vec<&[Vec<Rational>]> = vec![p_alpha.vertices()];
    bodies.extend(std::iter::repeat_n(p, n - 1));
    let gamma = mixed_volume(&bodies)? / cfg.base.volume();
    let a_flat = lifted(p_alpha);
    let mut qb: Vec<&[Vec<Rational>]> = vec![cfg.cayley.vertices(); n];
    qb.push(a_flat.as_slice());
    let cross = factorial(n + 1) * mixed_volume(&qb)?;
    let top = am_top(cfg)?;
    let j_weight = cross - Rational::from_integer(BigInt::from(n)) / BigInt::from(n + 1) * &gamma * top;
    let df = donaldson_futaki(cfg)?.value;
    Ok(TwistedWeights { twisted_df: df + &j_weight, gamma, j_weight })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlowupReport {
    pub vertex: Vec<Rational>,
    /// `(ε, DF(P_ε, g|P_ε))` for every requested ε.
    pub values: Vec<(Rational, Rational)>,
    /// Coefficient of `ε^{n−1}` in `DF(ε) − DF(0)`.
    pub coefficient: Rational,
    /// `−n(n−1)·Ch_v`.
    pub expected: Rational,
    pub matches: bool,
}

/// Lagrange interpolation; returns monomial coefficients.
fn interpolate(xs: &[Rational], ys: &[Rational]) -> Vec<Rational> {
    let m = xs.len();
    let mut coeffs = vec![Rational::zero(); m];
    for i in 0..m {
        let mut basis = vec![Rational::one()];
        let mut denom = Rational::one();
        for j in 0..m {
            if j == i {
                continue;
            }
            let mut next = vec![Rational::zero(); basis.len() + 1];
            for (k, b) in basis.iter().enumerate() {
                next[k + 1] += b;
                next[k] -= b * &xs[j];
            }
            basis = next;
            denom *= &xs[i] - &xs[j];
        }
        for (k, b) in basis.iter().enumerate() {
            coeffs[k] += b * &ys[i] / &denom;
        }
    }
    coeffs
}

fn series_mul(a: &[Rational], b: &[Rational], order: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        for (j, y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn series_inv(a: &[Rational], order: usize) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); order + 1];
    out[0] = a[0].recip();
    for k in 1..=order {
        let mut s = Rational::zero();
        for j in 1..=k.min(a.len() - 1) {
            s += &a[j] * &out[k - j];
        }
        out[k] = -s * &out[0];
    }
    out
}

pub fn blowup_expansion(
    cfg: &ToricTestConfig,
    v: &[Rational],
    epsilons: &[Rational],
) -> Result<BlowupReport, InvariantError> {
    let n = cfg.dim();
    let vi = cfg.base.vertex_index(v).ok_or(InvariantError::NotAVertex)?;
    let c = calibration_constant(n)?;
    let mut xs = vec![Rational::zero()];
    let mut vol = vec![cfg.base.volume()];
    let mut sig = vec![cfg.base.volume_data().boundary_sigma_volume.clone()];
    let mut int_g = vec![cfg.g.integral()];
    let mut bnd_g = vec![cfg.g.boundary_integral()];
    let mut values = Vec::new();
    for e in epsilons {
        let pe = corner_chop(&cfg.base, vi, e)?;
        let ge = cfg.g.restrict(&pe)?;
        let vd = pe.volume_data();
        let (i, b) = (ge.integral(), ge.boundary_integral());
        values.push((e.clone(), &c * (&b - &vd.boundary_sigma_volume / &vd.volume * &i)));
        if !e.is_zero() && !xs.contains(e) {
            xs.push(e.clone());
            vol.push(vd.volume.clone());
            sig.push(vd.boundary_sigma_volume.clone());
            int_g.push(i);
            bnd_g.push(b);
        }
    }
    // Each measure is a polynomial of degree ≤ n+1 in ε for small chops.
    if xs.len() < n + 2 {
        return Err(InvariantError::TooFewEpsilons { needed: n + 1, got: xs.len() - 1 });
    }
    let order = n.saturating_sub(1);
    let p_vol = interpolate(&xs, &vol);
    let p_sig = interpolate(&xs, &sig);
    let p_int = interpolate(&xs, &int_g);
    let p_bnd = interpolate(&xs, &bnd_g);
    let ratio = series_mul(&series_mul(&p_sig, &p_int, order), &series_inv(&p_vol, order), order);
    let mut df_series: Vec<Rational> =
        (0..=order).map(|k| &c * (p_bnd.get(k).cloned().unwrap_or_default() - &ratio[k])).collect();
    df_series[0] = Rational::zero();
    let coefficient = df_series[order].clone();
    let ch = chow_weight(cfg, v)?;
    let expected = -Rational::from_integer(BigInt::from(n * (n.max(1) - 1))) * ch;
    Ok(BlowupReport { vertex: v.to_vec(), matches: coefficient == expected, values, coefficient, expected })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantReport {
    pub df: DfReport,
    pub minimum_norm: NormReport,
    pub slope_mu: Rational,
    pub am_top: Rational,
    pub normalization_note: Normalization,
    pub trivial: bool,
}

pub fn invariant_report(cfg: &ToricTestConfig) -> Result<InvariantReport, InvariantError> {
    let df = donaldson_futaki(cfg)?;
    let minimum_norm = minimum_norm(cfg)?;
    Ok(InvariantReport {
        df,
        minimum_norm,
        slope_mu: slope_mu(&cfg.base)?,
        am_top: am_top(cfg)?,
        normalization_note: cfg.normalization,
        trivial: cfg.trivial,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RationalJson {
    pub value: String,
    pub decimal: f64,
}

impl From<&Rational> for RationalJson {
    fn from(q: &Rational) -> Self {
        RationalJson { value: fmt_rat(q), decimal: to_f64(q) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReportJson {
    pub df: RationalJson,
    pub df_intersection: RationalJson,
    pub calibration_constant: RationalJson,
    pub minimum_norm: RationalJson,
    pub slope_mu: RationalJson,
    pub am_top: RationalJson,
    pub normalization_note: Normalization,
    pub trivial: bool,
    pub provenance: BTreeMap<String, Provenance>,
}

impl InvariantReport {
    pub fn to_json(&self) -> InvariantReportJson {
        let mut provenance = BTreeMap::new();
        provenance.insert("df".to_string(), self.df.provenance);
        provenance.insert("minimum_norm".to_string(), self.minimum_norm.provenance);
        provenance.insert("slope_mu".to_string(), Provenance::BoundaryFormula);
        provenance.insert("am_top".to_string(), Provenance::MixedVolume);
        InvariantReportJson {
            df: (&self.df.value).into(),
            df_intersection: (&self.df.intersection_value).into(),
            calibration_constant: (&self.df.calibration).into(),
            minimum_norm: (&self.minimum_norm.value).into(),
            slope_mu: (&self.slope_mu).into(),
            am_top: (&self.am_top).into(),
            normalization_note: self.normalization_note,
            trivial: self.trivial,
            provenance,
        }
    }
}

/// Positive part check used by the destabilizer dichotomy.
pub fn max_vertex_chow(cfg: &ToricTestConfig) -> Result<(Vec<Rational>, Rational), InvariantError> {
    let mut best: Option<(Vec<Rational>, Rational)> = None;
    for v in cfg.base.vertices() {
        let ch = chow_weight(cfg, v)?;
        if best.as_ref().is_none_or(|(_, b)| ch > *b) {
            best = Some((v.clone(), ch));
        }
    }
    Ok(best.expect("polytope has vertices"))
}
