//! Task execution.

use kstab_core::analysis::QuadConfig;
use kstab_core::functionals::{functional_trace, l1_norm_path, FunctionalError, FunctionalSample, PathSchedule};
use kstab_core::invariants::{
    blowup_expansion, invariant_report, minimum_norm, twisted_weights, InvariantError, InvariantReportJson,
    RationalJson,
};
use kstab_core::pl::ConfigJson;
use kstab_core::rational::{fmt_rat, int, to_f64, Rational};
use kstab_core::slope::{
    ray_engine, scan_destabilizer, verify_theorems, Candidates, DestabilizerReport, SlopeError, Theorem, Verdict,
    VerifyError, VerifyOptions,
};
use kstab_core::{Normalization, Polytope, ToricTestConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::{ScheduleSpec, Task, Validated};
use crate::CliError;

/// Command-line overrides applied on top of the scenario.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOptions {
    pub tau_max: Option<f64>,
    pub quad_order: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskResult {
    Invariants(InvariantReportJson),
    Slopes {
        schedule: PathSchedule,
        verdicts: Vec<Verdict>,
        #[serde(skip)]
        samples: Vec<FunctionalSample>,
        #[serde(skip)]
        gamma: Option<f64>,
    },
    Stoppa {
        vertex: Vec<String>,
        values: Vec<(RationalJson, RationalJson)>,
        coefficient: RationalJson,
        expected: RationalJson,
        pass: bool,
    },
    Scan(DestabilizerReport),
    L1 {
        limit: f64,
        length: f64,
        minimum_norm: RationalJson,
        /// `limit > 0` exactly when the minimum norm is positive.
        consistent: bool,
    },
}

impl TaskResult {
    /// `None` for tasks without a verdict.
    pub fn pass(&self) -> Option<bool> {
        match self {
            TaskResult::Slopes { verdicts, .. } => Some(verdicts.iter().all(|v| v.pass)),
            TaskResult::Stoppa { pass, .. } => Some(*pass),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub config: ConfigJson,
    pub options: RunOptions,
    pub tasks: Vec<TaskResult>,
    pub pass: bool,
}

impl From<InvariantError> for CliError {
    fn from(e: InvariantError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<FunctionalError> for CliError {
    fn from(e: FunctionalError) -> Self {
        match e {
            FunctionalError::BadSchedule
            | FunctionalError::MissingAlpha
            | FunctionalError::NormalizationRequired(_)
            | FunctionalError::Slope(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Slope(SlopeError::InsufficientSamples { .. } | SlopeError::NonMonotoneTau) => {
                CliError::Validation(e.to_string())
            }
            VerifyError::Functional(f) => f.into(),
            VerifyError::Invariant(i) => i.into(),
            VerifyError::MissingAlpha | VerifyError::NoCandidates => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn schedule(spec: &ScheduleSpec, opts: &RunOptions) -> PathSchedule {
    let mut s = PathSchedule::default();
    if let Some(t) = &spec.taus {
        s.taus = t.clone();
    }
    if let Some(b) = spec.beta0 {
        s.beta0 = b;
    }
    if let Some(max) = opts.tau_max {
        s.taus.retain(|&t| t <= max);
        let mut last = s.taus.last().copied().unwrap_or(0.0);
        while last + 2.0 <= max {
            last += 2.0;
            s.taus.push(last);
        }
    }
    s
}

fn quad(cfg: &ToricTestConfig, opts: &RunOptions) -> Option<QuadConfig> {
    opts.quad_order.map(|order| {
        let base = QuadConfig::for_dim(cfg.dim());
        QuadConfig { order, check_order: (order > 2).then(|| order - 2), ..base }
    })
}

fn rj(q: &Rational) -> RationalJson {
    q.into()
}

/// Interior points drawn uniformly from the bounding box of P.
fn random_interior(p: &Polytope, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = p.dim();
    let verts: Vec<Vec<f64>> = p.vertices().iter().map(|v| v.iter().map(to_f64).collect()).collect();
    let lo: Vec<f64> = (0..n).map(|i| verts.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..n).map(|i| verts.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: Vec<f64> = (0..n).map(|i| r.gen_range(lo[i]..hi[i])).collect();
        let inside = p.halfspaces().iter().all(|h| {
            let lhs: f64 = h.normal.iter().zip(&x).map(|(a, b)| *a as f64 * b).sum();
            lhs < to_f64(&h.offset) - 1e-3
        });
        if inside {
            out.push(x);
        }
    }
    out
}

fn run_task(v: &Validated, task: &Task, opts: &RunOptions) -> Result<TaskResult, CliError> {
    let cfg = &v.config;
    let norm = cfg.normalize(Normalization::MinZero);
    Ok(match task {
        Task::Invariants => TaskResult::Invariants(invariant_report(&norm)?.to_json()),
        Task::Slopes { theorems, schedule: spec, tol } => {
            let vo = VerifyOptions {
                schedule: schedule(spec, opts),
                tol: *tol,
                alpha: if theorems.contains(&Theorem::JAlpha) { v.alpha.clone() } else { None },
                quad: quad(cfg, opts),
            };
            let gamma = match &vo.alpha {
                Some(pa) => Some(to_f64(&twisted_weights(&norm, pa)?.gamma)),
                None => None,
            };
            let (verdicts, samples) = verify_theorems(cfg, theorems, &vo)?;
            TaskResult::Slopes { schedule: vo.schedule, verdicts, samples, gamma }
        }
        Task::Stoppa { vertex, epsilons } => {
            let rep = blowup_expansion(&norm, vertex, epsilons)?;
            TaskResult::Stoppa {
                vertex: vertex.iter().map(fmt_rat).collect(),
                values: rep.values.iter().map(|(e, d)| (rj(e), rj(d))).collect(),
                coefficient: rj(&rep.coefficient),
                expected: rj(&rep.expected),
                pass: rep.matches,
            }
        }
        Task::Scan { grid, random_points, schedule: spec } => {
            let sched = schedule(spec, opts);
            let mut points = grid.clone();
            points.extend(random_interior(&cfg.base, *random_points, opts.seed));
            let mut rep = scan_destabilizer(cfg, &Candidates::Vertices, &sched)?;
            if !points.is_empty() {
                let grid = scan_destabilizer(cfg, &Candidates::Grid(points), &sched)?;
                rep.candidates.extend(grid.candidates);
            }
            TaskResult::Scan(rep)
        }
        Task::L1 { schedule: spec } => {
            let avg = cfg.normalize(Normalization::AverageZero);
            let mut engine = ray_engine(&avg, schedule(spec, opts).beta0, None)?;
            if let Some(q) = quad(cfg, opts) {
                engine.quad = q;
            }
            let samples = functional_trace(&engine, &schedule(spec, opts))?;
            let rep = l1_norm_path(&avg, &samples)?;
            let mn = minimum_norm(&norm)?.value;
            let positive = mn > int(0);
            TaskResult::L1 {
                limit: rep.limit,
                length: rep.length,
                minimum_norm: rj(&mn),
                consistent: (rep.limit > 1e-6) == positive,
            }
        }
    })
}

/// Runs every task in order.
pub fn run_scenario(v: &Validated, opts: &RunOptions) -> Result<ScenarioResult, CliError> {
    let tasks = v.tasks.iter().map(|t| run_task(v, t, opts)).collect::<Result<Vec<_>, _>>()?;
    let pass = tasks.iter().filter_map(TaskResult::pass).all(|p| p);
    Ok(ScenarioResult { name: v.name.clone(), config: v.config.to_json(), options: opts.clone(), tasks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_max_truncates_and_extends() {
        let spec = ScheduleSpec::default();
        let short = schedule(&spec, &RunOptions { tau_max: Some(8.0), ..Default::default() });
        assert_eq!(short.taus, vec![1.0, 2.0, 4.0, 6.0, 8.0]);
        let long = schedule(&spec, &RunOptions { tau_max: Some(16.0), ..Default::default() });
        assert_eq!(long.taus.last(), Some(&16.0));
        assert_eq!(long.taus.len(), 9);
    }

    #[test]
    fn random_points_are_interior_and_seeded() {
        let p = Polytope::standard_simplex(2);
        let a = random_interior(&p, 5, 7);
        assert_eq!(a, random_interior(&p, 5, 7));
        assert!(a.iter().all(|x| x[0] > 0.0 && x[1] > 0.0 && x[0] + x[1] < 1.0));
    }
}
