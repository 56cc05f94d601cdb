//! Tensor Gauss–Legendre panels with adaptive bisection on a box.

use rayon::prelude::*;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = order as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[order - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[order - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Debug, Clone)]
pub struct QuadConfig {
    /// Gauss–Legendre points per panel and direction.
    pub order: usize,
    /// Initial panel width.
    pub panel: f64,
    /// Absolute tolerance on every indicator, summed over the domain.
    pub tol: f64,
    pub max_depth: usize,
    /// Lower order used as an on-panel error check; `None` compares each
    /// panel against its bisected children instead.
    pub check_order: Option<usize>,
}

impl QuadConfig {
    pub fn for_dim(n: usize) -> Self {
        match n {
            1 => QuadConfig { order: 12, panel: 2.0, tol: 1e-11, max_depth: 8, check_order: Some(10) },
            2 => QuadConfig { order: 10, panel: 3.0, tol: 1e-7, max_depth: 3, check_order: Some(8) },
            _ => QuadConfig { order: 6, panel: 3.0, tol: 1e-6, max_depth: 2, check_order: Some(4) },
        }
    }
}

/// One accepted quadrature sample.
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub xi: Vec<f64>,
    pub weight: f64,
    pub data: T,
}

pub trait Indicators {
    fn indicators(&self) -> Vec<f64>;
}

struct Panel<T> {
    samples: Vec<Sample<T>>,
    sums: Vec<f64>,
}

fn panel_samples<T, F, E>(lo: &[f64], hi: &[f64], rule: &(Vec<f64>, Vec<f64>), f: &F) -> Result<Panel<T>, E>
where
    T: Indicators,
    F: Fn(&[f64]) -> Result<T, E>,
{
    let n = lo.len();
    let m = rule.0.len();
    let total = m.pow(n as u32);
    let mut samples = Vec::with_capacity(total);
    let mut sums: Vec<f64> = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let mut xi = vec![0.0; n];
        let mut w = 1.0;
        for d in 0..n {
            let k = r % m;
            r /= m;
            let half = 0.5 * (hi[d] - lo[d]);
            xi[d] = lo[d] + half * (rule.0[k] + 1.0);
            w *= half * rule.1[k];
        }
        let data = f(&xi)?;
        let ind = data.indicators();
        if sums.is_empty() {
            sums = vec![0.0; ind.len()];
        }
        for (s, v) in sums.iter_mut().zip(&ind) {
            *s += w * v;
        }
        samples.push(Sample { xi, weight: w, data });
    }
    Ok(Panel { samples, sums })
}

fn children(lo: &[f64], hi: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = lo.len();
    (0..1usize << n)
        .map(|mask| {
            let mut a = lo.to_vec();
            let mut b = hi.to_vec();
            for d in 0..n {
                let mid = 0.5 * (lo[d] + hi[d]);
                if mask >> d & 1 == 0 {
                    b[d] = mid;
                } else {
                    a[d] = mid;
                }
            }
            (a, b)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn refine<T, F, E>(
    lo: &[f64],
    hi: &[f64],
    parent: Panel<T>,
    rule: &(Vec<f64>, Vec<f64>),
    tol: f64,
    depth: usize,
    f: &F,
    out: &mut Vec<Sample<T>>,
    err: &mut f64,
) -> Result<(), E>
where
    T: Indicators,
    F: Fn(&[f64]) -> Result<T, E>,
{
    let negligible = parent.sums.iter().all(|s| s.abs() < 1e-3 * tol)
        && parent.samples.iter().all(|s| s.data.indicators().iter().all(|v| (v * s.weight).abs() < 1e-3 * tol));
    if depth == 0 || negligible {
        out.extend(parent.samples);
        return Ok(());
    }
    let kids = children(lo, hi);
    let mut panels = Vec::with_capacity(kids.len());
    let mut sums = vec![0.0; parent.sums.len()];
    for (a, b) in &kids {
        let p = panel_samples(a, b, rule, f)?;
        for (s, v) in sums.iter_mut().zip(&p.sums) {
            *s += v;
        }
        panels.push(p);
    }
    let diff = sums.iter().zip(&parent.sums).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if diff <= tol {
        *err += diff;
        for p in panels {
            out.extend(p.samples);
        }
        return Ok(());
    }
    let child_tol = tol / (1usize << lo.len()) as f64;
    for ((a, b), p) in kids.iter().zip(panels) {
        refine(a, b, p, rule, child_tol.max(tol * 0.25), depth - 1, f, out, err)?;
    }
    Ok(())
}

/// Indicator sums of the check rule on a panel.
fn check_sums<T, F, E>(lo: &[f64], hi: &[f64], rule: &(Vec<f64>, Vec<f64>), f: &F) -> Result<Vec<f64>, E>
where
    T: Indicators,
    F: Fn(&[f64]) -> Result<T, E>,
{
    Ok(panel_samples(lo, hi, rule, f)?.sums)
}

#[allow(clippy::too_many_arguments)]
fn refine_checked<T, F, E>(
    lo: &[f64],
    hi: &[f64],
    main: &(Vec<f64>, Vec<f64>),
    check: &(Vec<f64>, Vec<f64>),
    tol: f64,
    depth: usize,
    f: &F,
    out: &mut Vec<Sample<T>>,
    err: &mut f64,
) -> Result<(), E>
where
    T: Indicators,
    F: Fn(&[f64]) -> Result<T, E>,
{
    let p = panel_samples(lo, hi, main, f)?;
    let negligible = p.sums.iter().all(|s| s.abs() < 1e-3 * tol)
        && p.samples.iter().all(|s| s.data.indicators().iter().all(|v| (v * s.weight).abs() < 1e-3 * tol));
    if negligible {
        out.extend(p.samples);
        return Ok(());
    }
    let c = check_sums(lo, hi, check, f)?;
    let diff = c.iter().zip(&p.sums).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if diff <= tol || depth == 0 {
        *err += diff;
        out.extend(p.samples);
        return Ok(());
    }
    let child_tol = (tol / (1usize << lo.len()) as f64).max(tol * 0.25);
    for (a, b) in children(lo, hi) {
        refine_checked(&a, &b, main, check, child_tol, depth - 1, f, out, err)?;
    }
    Ok(())
}

/// Adaptive tensor quadrature of `f` over the box `[lo, hi]`; returns the
/// accepted samples (in a fixed order) and the summed refinement differences.
pub fn adaptive_box<T, F, E>(lo: &[f64], hi: &[f64], cfg: &QuadConfig, f: F) -> Result<(Vec<Sample<T>>, f64), E>
where
    T: Indicators + Send,
    F: Fn(&[f64]) -> Result<T, E> + Sync,
    E: Send,
{
    let n = lo.len();
    let rule = gauss_legendre(cfg.order);
    let check = cfg.check_order.map(gauss_legendre);
    let counts: Vec<usize> = (0..n).map(|d| (((hi[d] - lo[d]) / cfg.panel).ceil() as usize).max(1)).collect();
    let total: usize = counts.iter().product();
    let tol = cfg.tol / total as f64;
    let results: Vec<Result<(Vec<Sample<T>>, f64), E>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut r = idx;
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            for d in 0..n {
                let k = r % counts[d];
                r /= counts[d];
                let h = (hi[d] - lo[d]) / counts[d] as f64;
                a[d] = lo[d] + h * k as f64;
                b[d] = a[d] + h;
            }
            let mut out = Vec::new();
            let mut err = 0.0;
            match &check {
                Some(check) => refine_checked(&a, &b, &rule, check, tol, cfg.max_depth, &f, &mut out, &mut err)?,
                None => {
                    let parent = panel_samples(&a, &b, &rule, &f)?;
                    refine(&a, &b, parent, &rule, tol, cfg.max_depth, &f, &mut out, &mut err)?
                }
            }
            Ok((out, err))
        })
        .collect();
    let mut samples = Vec::new();
    let mut err = 0.0;
    for r in results {
        let (s, e) = r?;
        samples.extend(s);
        err += e;
    }
    Ok((samples, err))
}

/// Gauss–Kronrod (3, 7) nodes and weights on [-1, 1], returned as
/// `(x, kronrod, gauss)` with zero Gauss weight at the Kronrod-only nodes.
#[allow(clippy::excessive_precision)]
pub fn gauss_kronrod_7() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let xk = [0.960_491_268_708_020_3, 0.774_596_669_241_483_4, 0.434_243_749_346_802_54];
    let wk = [0.104_656_226_026_467_26, 0.268_488_089_868_333_45, 0.401_397_414_775_962_25];
    let w0 = 0.450_916_538_658_474_14;
    let mut x = Vec::with_capacity(7);
    let mut k = Vec::with_capacity(7);
    let mut g = Vec::with_capacity(7);
    for i in 0..3 {
        x.push(-xk[i]);
        k.push(wk[i]);
        g.push(if i == 1 { 5.0 / 9.0 } else { 0.0 });
    }
    x.push(0.0);
    k.push(w0);
    g.push(8.0 / 9.0);
    for i in (0..3).rev() {
        x.push(xk[i]);
        k.push(wk[i]);
        g.push(if i == 1 { 5.0 / 9.0 } else { 0.0 });
    }
    (x, k, g)
}

/// Gauss–Kronrod (7, 15) nodes and weights on [-1, 1].
#[allow(clippy::excessive_precision)]
pub fn gauss_kronrod_15() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let xk = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_5,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_48,
        0.000000000000000000000000000000000,
    ];
    let wk = [
        0.022_935_322_010_529_224,
        0.063_092_092_629_978_56,
        0.104_790_010_322_250_19,
        0.140_653_259_715_525_92,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_42,
        0.204_432_940_075_298_89,
        0.209_482_141_084_727_82,
    ];
    let wg = [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];
    let mut x = Vec::with_capacity(15);
    let mut k = Vec::with_capacity(15);
    let mut g = Vec::with_capacity(15);
    for i in 0..7 {
        x.push(-xk[i]);
        k.push(wk[i]);
        g.push(if i % 2 == 1 { wg[i / 2] } else { 0.0 });
    }
    x.push(0.0);
    k.push(wk[7]);
    g.push(wg[3]);
    for i in (0..7).rev() {
        x.push(xk[i]);
        k.push(wk[i]);
        g.push(if i % 2 == 1 { wg[i / 2] } else { 0.0 });
    }
    (x, k, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct V(f64);
    impl Indicators for V {
        fn indicators(&self) -> Vec<f64> {
            vec![self.0]
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod7_is_exact_to_degree_eleven() {
        let (x, k, g) = gauss_kronrod_7();
        let s: f64 = x.iter().zip(&k).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let s: f64 = x.iter().zip(&g).map(|(x, w)| w * x.powi(4)).sum();
        assert!((s - 2.0 / 5.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_weights_sum() {
        let (x, k, g) = gauss_kronrod_15();
        assert!((k.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!((g.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let s: f64 = x.iter().zip(&g).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_gaussian_and_kink() {
        let cfg = QuadConfig { order: 8, panel: 2.0, tol: 1e-12, max_depth: 12, check_order: None };
        let (s, _) = adaptive_box(&[-20.0], &[20.0], &cfg, |x: &[f64]| Ok::<_, ()>(V((-x[0] * x[0]).exp()))).unwrap();
        let v: f64 = s.iter().map(|s| s.weight * s.data.0).sum();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let (s, _) = adaptive_box(&[-1.0], &[1.3], &cfg, |x: &[f64]| Ok::<_, ()>(V(x[0].abs()))).unwrap();
        let v: f64 = s.iter().map(|s| s.weight * s.data.0).sum();
        assert!((v - (0.5 + 0.845)).abs() < 1e-10);
    }

    #[test]
    fn adaptive_two_dim() {
        let cfg = QuadConfig { order: 8, panel: 2.0, tol: 1e-10, max_depth: 4, check_order: None };
        let (s, _) = adaptive_box(&[-10.0, -10.0], &[10.0, 10.0], &cfg, |x: &[f64]| {
            Ok::<_, ()>(V((-x[0] * x[0] - 2.0 * x[1] * x[1]).exp()))
        })
        .unwrap();
        let v: f64 = s.iter().map(|s| s.weight * s.data.0).sum();
        assert!((v - std::f64::consts::PI / 2f64.sqrt()).abs() < 1e-10);
    }
}
