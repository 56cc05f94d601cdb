//! Rational piecewise-linear convex functions and toric test configurations.
//!
//! The configuration datum is the convex function `g`; the concave height
//! of the degeneration is `f = c − g` with `c` the shift.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::polytope::{integrate_affine, Halfspace, Polytope, PolytopeError, PolytopeJson, Region};
use crate::rational::{dot, fmt_rat, int, lcm_of_denominators, parse_rat, to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("pieces do not form an irredundant convex maximum: {0}")]
    NotConvex(String),
    #[error("shift {shift} must exceed max g = {max}")]
    ShiftTooSmall { shift: String, max: String },
    #[error("configuration must be normalized first")]
    NotNormalized,
    #[error("malformed configuration: {0}")]
    Malformed(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineFn {
    pub gradient: Vec<Rational>,
    pub constant: Rational,
}

impl AffineFn {
    pub fn new(gradient: Vec<Rational>, constant: Rational) -> Self {
        AffineFn { gradient, constant }
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        dot(&self.gradient, x) + &self.constant
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.gradient.iter().zip(x).map(|(a, b)| to_f64(a) * b).sum::<f64>() + to_f64(&self.constant)
    }
}

impl fmt::Display for AffineFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g: Vec<String> = self.gradient.iter().map(fmt_rat).collect();
        write!(f, "<({}), x> + {}", g.join(", "), fmt_rat(&self.constant))
    }
}

/// `g = max_i piece_i` on a polytope, with every piece attaining the max on a
/// full-dimensional region.
#[derive(Debug, Clone)]
pub struct PLConvexFn {
    pieces: Vec<AffineFn>,
    domain: Polytope,
    regions: Vec<(usize, Polytope)>,
}

impl PartialEq for PLConvexFn {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces && self.domain == other.domain
    }
}

/// Integer-normal halfspace `⟨a, x⟩ ≤ b` for rational `a`.
fn rational_halfspace(a: &[Rational], b: &Rational) -> Result<Option<Halfspace>, PolytopeError> {
    if a.iter().all(|x| x.is_zero()) {
        return Ok(None);
    }
    let l = Rational::from_integer(lcm_of_denominators(a.iter()));
    let mut normal = Vec::with_capacity(a.len());
    for x in a {
        let z = (x * &l).to_integer();
        normal.push(i64::try_from(z).map_err(|_| PolytopeError::Overflow)?);
    }
    Ok(Some(Halfspace::new(normal, b * &l)?))
}

fn region_of(pieces: &[AffineFn], domain: &Polytope, i: usize) -> Result<Option<Polytope>, ConfigError> {
    let mut hs = domain.halfspaces().to_vec();
    let pi = &pieces[i];
    for (j, pj) in pieces.iter().enumerate() {
        if j == i {
            continue;
        }
        // p_j ≤ p_i  ⇔  ⟨a_j − a_i, x⟩ ≤ b_i − b_j
        let diff: Vec<Rational> = pj.gradient.iter().zip(&pi.gradient).map(|(a, b)| a - b).collect();
        let off = &pi.constant - &pj.constant;
        match rational_halfspace(&diff, &off)? {
            Some(h) => hs.push(h),
            None => {
                if off.is_negative() {
                    return Ok(None);
                }
                if off.is_zero() {
                    return Err(ConfigError::NotConvex(format!("duplicate piece {pi}")));
                }
            }
        }
    }
    match Polytope::from_halfspaces(domain.dim(), hs) {
        Ok(p) => Ok(Some(p)),
        Err(PolytopeError::DegenerateInput) | Err(PolytopeError::InconsistentInput(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

impl PLConvexFn {
    pub fn new(pieces: Vec<AffineFn>, domain: Polytope) -> Result<Self, ConfigError> {
        if pieces.is_empty() {
            return Err(ConfigError::NotConvex("no pieces".into()));
        }
        if let Some(p) = pieces.iter().find(|p| p.gradient.len() != domain.dim()) {
            return Err(ConfigError::Polytope(PolytopeError::DimensionMismatch {
                expected: domain.dim(),
                got: p.gradient.len(),
            }));
        }
        let mut regions = Vec::with_capacity(pieces.len());
        for i in 0..pieces.len() {
            match region_of(&pieces, &domain, i)? {
                Some(r) => regions.push((i, r)),
                None => return Err(ConfigError::NotConvex(format!("piece {} is redundant", pieces[i]))),
            }
        }
        Ok(PLConvexFn { pieces, domain, regions })
    }

    /// Builds `max` of the pieces after discarding those that never attain
    /// the maximum on a full-dimensional region of `domain`.
    pub fn new_pruned(pieces: Vec<AffineFn>, domain: Polytope) -> Result<Self, ConfigError> {
        let mut uniq: Vec<AffineFn> = Vec::new();
        for p in pieces {
            if !uniq.contains(&p) {
                uniq.push(p);
            }
        }
        let mut keep = Vec::new();
        for i in 0..uniq.len() {
            if region_of(&uniq, &domain, i)?.is_some() {
                keep.push(uniq[i].clone());
            }
        }
        Self::new(keep, domain)
    }

    pub fn affine(f: AffineFn, domain: Polytope) -> Result<Self, ConfigError> {
        Self::new(vec![f], domain)
    }

    pub fn pieces(&self) -> &[AffineFn] {
        &self.pieces
    }

    pub fn domain(&self) -> &Polytope {
        &self.domain
    }

    pub fn linearity_regions(&self) -> impl Iterator<Item = &(usize, Polytope)> {
        self.regions.iter()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_affine(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn is_constant(&self) -> bool {
        self.is_affine() && self.pieces[0].gradient.iter().all(|x| x.is_zero())
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.pieces.iter().map(|p| p.eval(x)).max().expect("nonempty")
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.pieces.iter().map(|p| p.eval_f64(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> Rational {
        self.regions
            .iter()
            .flat_map(|(i, r)| r.vertices().iter().map(move |v| self.pieces[*i].eval(v)))
            .min()
            .expect("nonempty")
    }

    pub fn max_value(&self) -> Rational {
        self.domain.vertices().iter().map(|v| self.eval(v)).max().expect("nonempty")
    }

    /// ∫_P g dμ.
    pub fn integral(&self) -> Rational {
        self.regions.iter().map(|(i, r)| integrate_affine(r, &self.pieces[*i], Region::Interior)).sum()
    }

    /// ∫_∂P g dσ.
    pub fn boundary_integral(&self) -> Rational {
        crate::polytope::integrate(&self.domain, crate::polytope::Integrand::Pl(self), Region::Boundary)
            .expect("domain matches")
    }

    pub fn average(&self) -> Rational {
        self.integral() / self.domain.volume()
    }

    /// ∫_P |g| dμ.
    pub fn abs_integral(&self) -> Rational {
        let mut acc = Rational::zero();
        for (i, r) in &self.regions {
            let p = &self.pieces[*i];
            let pos = PLConvexFn::new_pruned(
                vec![p.clone(), AffineFn::new(vec![Rational::zero(); r.dim()], int(0))],
                r.clone(),
            )
            .expect("pruned max is valid");
            // |p| = 2·max(p, 0) − p
            acc += pos.integral() * int(2) - integrate_affine(r, p, Region::Interior);
        }
        acc
    }

    pub fn add_constant(&self, c: &Rational) -> Self {
        PLConvexFn {
            pieces: self.pieces.iter().map(|p| AffineFn::new(p.gradient.clone(), &p.constant + c)).collect(),
            domain: self.domain.clone(),
            regions: self.regions.clone(),
        }
    }

    /// `d·g` for positive `d`.
    pub fn scale(&self, d: &Rational) -> Self {
        assert!(d.is_positive(), "scale factor must be positive");
        PLConvexFn {
            pieces: self
                .pieces
                .iter()
                .map(|p| AffineFn::new(p.gradient.iter().map(|x| x * d).collect(), &p.constant * d))
                .collect(),
            domain: self.domain.clone(),
            regions: self.regions.clone(),
        }
    }

    pub fn restrict(&self, domain: &Polytope) -> Result<Self, ConfigError> {
        Self::new_pruned(self.pieces.clone(), domain.clone())
    }

    /// Soft maximum `(1/β) log Σ exp(β p_i(x))`.
    pub fn smooth_eval(&self, x: &[f64], beta: f64) -> f64 {
        if self.is_affine() {
            return self.pieces[0].eval_f64(x);
        }
        let vals: Vec<f64> = self.pieces.iter().map(|p| p.eval_f64(x)).collect();
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + vals.iter().map(|v| ((v - m) * beta).exp()).sum::<f64>().ln() / beta
    }

    pub fn pl_json(&self) -> Vec<Vec<String>> {
        self.pieces
            .iter()
            .map(|p| p.gradient.iter().chain(std::iter::once(&p.constant)).map(fmt_rat).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    MinZero,
    AverageZero,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Raw => "raw",
            Normalization::MinZero => "min_zero",
            Normalization::AverageZero => "average_zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shift {
    Auto,
    Value(Rational),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToricTestConfig {
    pub base: Polytope,
    pub g: PLConvexFn,
    pub shift: Rational,
    pub cayley: Polytope,
    pub trivial: bool,
    pub normalization: Normalization,
}

/// Q = {(x, t) : x ∈ P, 0 ≤ t ≤ c − g(x)} as a halfspace system.
fn cayley_polytope(p: &Polytope, g: &PLConvexFn, c: &Rational) -> Result<Polytope, PolytopeError> {
    let n = p.dim();
    let mut hs = Vec::new();
    for h in p.halfspaces() {
        let mut normal = h.normal.clone();
        normal.push(0);
        hs.push(Halfspace { normal, offset: h.offset.clone() });
    }
    let mut bottom = vec![0i64; n];
    bottom.push(-1);
    hs.push(Halfspace { normal: bottom, offset: Rational::zero() });
    for piece in g.pieces() {
        let mut a = piece.gradient.clone();
        a.push(Rational::one());
        hs.push(rational_halfspace(&a, &(c - &piece.constant))?.expect("t-component is nonzero"));
    }
    Polytope::from_halfspaces(n + 1, hs)
}

pub fn make_config(p: &Polytope, g: &PLConvexFn, shift: Shift) -> Result<ToricTestConfig, ConfigError> {
    if g.domain() != p {
        return Err(ConfigError::Polytope(PolytopeError::DomainMismatch));
    }
    let max = g.max_value();
    let c = match shift {
        Shift::Auto => &max + int(1),
        Shift::Value(c) => {
            if c <= max {
                return Err(ConfigError::ShiftTooSmall { shift: fmt_rat(&c), max: fmt_rat(&max) });
            }
            c
        }
    };
    let cayley = cayley_polytope(p, g, &c)?;
    Ok(ToricTestConfig {
        base: p.clone(),
        g: g.clone(),
        shift: c,
        cayley,
        trivial: g.is_constant(),
        normalization: Normalization::Raw,
    })
}

impl ToricTestConfig {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Subtracts `min g` or `avg g`; the shift moves with `g` so `f` and Q are unchanged.
    pub fn normalize(&self, mode: Normalization) -> ToricTestConfig {
        let m = match mode {
            Normalization::Raw => return self.clone(),
            Normalization::MinZero => self.g.min_value(),
            Normalization::AverageZero => self.g.average(),
        };
        ToricTestConfig {
            base: self.base.clone(),
            g: self.g.add_constant(&-m.clone()),
            shift: &self.shift - m,
            cayley: self.cayley.clone(),
            trivial: self.trivial,
            normalization: mode,
        }
    }

    pub fn require_normalized(&self) -> Result<(), ConfigError> {
        if self.normalization == Normalization::Raw {
            return Err(ConfigError::NotNormalized);
        }
        Ok(())
    }

    /// `d·g`, rebuilding Q with the shift scaled alike.
    pub fn scale(&self, d: &Rational) -> Result<ToricTestConfig, ConfigError> {
        let g = self.g.scale(d);
        let shift = &self.shift * d;
        let max = g.max_value();
        let c = if shift > max { shift } else { max + int(1) };
        let mut cfg = make_config(&self.base, &g, Shift::Value(c))?;
        cfg.normalization = self.normalization;
        Ok(cfg)
    }

    pub fn to_json(&self) -> ConfigJson {
        ConfigJson {
            polytope: self.base.to_json(),
            pl: self.g.pl_json().into_iter().map(|r| r.into_iter().map(Value::String).collect()).collect(),
            shift: Value::String(fmt_rat(&self.shift)),
        }
    }

    pub fn from_json(j: &ConfigJson) -> Result<ToricTestConfig, ConfigError> {
        let p = Polytope::from_json(&j.polytope)?;
        let g = pl_from_json(&j.pl, &p)?;
        let shift = match &j.shift {
            Value::String(s) if s == "auto" => Shift::Auto,
            Value::Null => Shift::Auto,
            v => Shift::Value(rat_from_value(v)?),
        };
        make_config(&p, &g, shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub polytope: PolytopeJson,
    pub pl: Vec<Vec<Value>>,
    #[serde(default)]
    pub shift: Value,
}

/// Accepts `"p/q"` strings and JSON numbers.
pub fn rat_from_value(v: &Value) -> Result<Rational, ConfigError> {
    let s = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => return Err(ConfigError::Malformed(format!("expected rational, found {other}"))),
    };
    parse_rat(&s).map_err(|e| ConfigError::Malformed(e.to_string()))
}

pub fn pl_from_json(rows: &[Vec<Value>], p: &Polytope) -> Result<PLConvexFn, ConfigError> {
    let mut pieces = Vec::new();
    for row in rows {
        if row.len() != p.dim() + 1 {
            return Err(ConfigError::Malformed(format!("pl row has {} entries, expected {}", row.len(), p.dim() + 1)));
        }
        let vals: Vec<Rational> = row.iter().map(rat_from_value).collect::<Result<_, _>>()?;
        let (g, c) = vals.split_at(p.dim());
        pieces.push(AffineFn::new(g.to_vec(), c[0].clone()));
    }
    PLConvexFn::new(pieces, p.clone())
}

/// Integer-gradient affine function, a convenience for tests and scenarios.
pub fn affine_i(grad: &[i64], c: Rational) -> AffineFn {
    AffineFn::new(grad.iter().map(|&x| Rational::from_integer(BigInt::from(x))).collect(), c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rvec};

    fn interval() -> Polytope {
        Polytope::cube(&rvec(&[0]), &rvec(&[1])).unwrap()
    }

    fn vee() -> PLConvexFn {
        PLConvexFn::new(vec![affine_i(&[1], int(0)), affine_i(&[-1], int(1))], interval()).unwrap()
    }

    #[test]
    fn trivial_config_is_square() {
        let g = PLConvexFn::affine(affine_i(&[0], int(0)), interval()).unwrap();
        let cfg = make_config(&interval(), &g, Shift::Value(int(1))).unwrap();
        assert!(cfg.trivial);
        assert_eq!(cfg.cayley, Polytope::cube(&rvec(&[0, 0]), &rvec(&[1, 1])).unwrap());
    }

    #[test]
    fn linear_config() {
        let g = PLConvexFn::affine(affine_i(&[1], int(0)), interval()).unwrap();
        let cfg = make_config(&interval(), &g, Shift::Auto).unwrap();
        assert_eq!(cfg.shift, int(2));
        assert!(!cfg.trivial);
        let v: Vec<Vec<Rational>> = cfg.cayley.vertices().to_vec();
        assert_eq!(v, vec![rvec(&[0, 0]), rvec(&[0, 2]), rvec(&[1, 0]), rvec(&[1, 1])]);
    }

    #[test]
    fn vee_config_has_five_facets() {
        let cfg = make_config(&interval(), &vee(), Shift::Auto).unwrap();
        assert_eq!(cfg.cayley.halfspaces().len(), 5);
    }

    #[test]
    fn pl_integrals() {
        let g = vee();
        assert_eq!(g.integral(), rat(3, 4));
        assert_eq!(g.boundary_integral(), int(2));
        assert_eq!(g.min_value(), rat(1, 2));
        assert_eq!(g.max_value(), int(1));
    }

    #[test]
    fn redundant_piece_rejected() {
        let r = PLConvexFn::new(vec![affine_i(&[1], int(0)), affine_i(&[1], int(-1))], interval());
        assert!(matches!(r, Err(ConfigError::NotConvex(_))));
        let r = PLConvexFn::new(vec![affine_i(&[1], int(0)), affine_i(&[1], int(0))], interval());
        assert!(matches!(r, Err(ConfigError::NotConvex(_))));
    }

    #[test]
    fn normalization_modes() {
        let g = PLConvexFn::affine(affine_i(&[1], int(5)), interval()).unwrap();
        let cfg = make_config(&interval(), &g, Shift::Auto).unwrap().normalize(Normalization::MinZero);
        assert_eq!(cfg.g.pieces()[0], affine_i(&[1], int(0)));
        let cfg = make_config(&interval(), &vee(), Shift::Auto).unwrap().normalize(Normalization::AverageZero);
        assert_eq!(cfg.g.pieces()[0].constant, rat(-3, 4));
        assert_eq!(cfg.normalize(Normalization::AverageZero).g, cfg.g);
    }

    #[test]
    fn smoothing_at_kink() {
        let b = 3.0;
        let v = vee().smooth_eval(&[0.5], b);
        assert!((v - (0.5 + 2f64.ln() / b)).abs() < 1e-14);
    }

    #[test]
    fn abs_integral_of_centered_line() {
        let g = PLConvexFn::affine(AffineFn::new(vec![int(1)], rat(-1, 2)), interval()).unwrap();
        assert_eq!(g.abs_integral(), rat(1, 4));
    }

    #[test]
    fn json_round_trip() {
        let cfg = make_config(&interval(), &vee(), Shift::Auto).unwrap();
        let s = serde_json::to_string(&cfg.to_json()).unwrap();
        let back = ToricTestConfig::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
