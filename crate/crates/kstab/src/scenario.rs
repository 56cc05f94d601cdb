//! Scenario files: schema, parsing and validation.

use std::path::PathBuf;

use kstab_core::pl::{rat_from_value, ConfigJson};
use kstab_core::polytope::PolytopeJson;
use kstab_core::rational::{int, parse_rat, Rational};
use kstab_core::slope::Theorem;
use kstab_core::{Polytope, ToricTestConfig};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub polytope: PolytopeJson,
    /// Rows `[a_1, …, a_n, c]` of the pieces `⟨a, x⟩ + c`.
    pub pl: Vec<Vec<Value>>,
    #[serde(default)]
    pub shift: Value,
    #[serde(default)]
    pub alpha: Option<PolytopeJson>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub taus: Option<Vec<f64>>,
    pub beta0: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Invariants,
    Slopes {
        theorems: Vec<String>,
        #[serde(default)]
        schedule: ScheduleSpec,
        #[serde(default)]
        tol: Option<f64>,
    },
    Stoppa {
        vertex: Vec<Value>,
        epsilons: Vec<Value>,
    },
    Scan {
        #[serde(default)]
        grid: Option<Vec<Vec<f64>>>,
        /// Extra interior points drawn with the run seed.
        #[serde(default)]
        random_points: usize,
        #[serde(default)]
        schedule: ScheduleSpec,
    },
    L1 {
        #[serde(default)]
        schedule: ScheduleSpec,
    },
}

/// A task after validation, with every rational and theorem resolved.
#[derive(Debug, Clone)]
pub enum Task {
    Invariants,
    Slopes { theorems: Vec<Theorem>, schedule: ScheduleSpec, tol: Option<f64> },
    Stoppa { vertex: Vec<Rational>, epsilons: Vec<Rational> },
    Scan { grid: Vec<Vec<f64>>, random_points: usize, schedule: ScheduleSpec },
    L1 { schedule: ScheduleSpec },
}

#[derive(Debug, Clone)]
pub struct Validated {
    pub name: String,
    pub config: ToricTestConfig,
    pub alpha: Option<Polytope>,
    pub tasks: Vec<Task>,
    pub output_dir: Option<PathBuf>,
}

/// Parses scenario text; errors carry the byte offset of the failure.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let offset = byte_offset(text, e.line(), e.column());
        let msg = e.to_string();
        let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
        CliError::Parse { offset, line: e.line(), column: e.column(), msg }
    })
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn parse_theorem(s: &str) -> Result<Theorem, String> {
    let t = s.trim();
    match t.to_ascii_uppercase().as_str() {
        "AM" => return Ok(Theorem::Am),
        "DF" => return Ok(Theorem::Df),
        "MINNORM" => return Ok(Theorem::MinNorm),
        "JALPHA" => return Ok(Theorem::JAlpha),
        _ => {}
    }
    let inner = t
        .strip_prefix("POINT(")
        .or_else(|| t.strip_prefix("point("))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("unknown theorem {t:?}"))?;
    let coords = inner.split(',').map(|c| parse_rat(c.trim()).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    Ok(Theorem::Point(coords))
}

fn rationals(vals: &[Value]) -> Result<Vec<Rational>, String> {
    vals.iter().map(|v| rat_from_value(v).map_err(|e| e.to_string())).collect()
}

fn check_schedule(s: &ScheduleSpec) -> Result<(), String> {
    if let Some(b) = s.beta0 {
        if !(b.is_finite() && b > 0.0) {
            return Err(format!("beta0 must be positive, got {b}"));
        }
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<Validated, CliError> {
        let bad = |m: String| CliError::Validation(m);
        if self.tasks.is_empty() {
            return Err(bad("task list is empty".into()));
        }
        let cj = ConfigJson { polytope: self.polytope.clone(), pl: self.pl.clone(), shift: self.shift.clone() };
        let config = ToricTestConfig::from_json(&cj).map_err(|e| bad(e.to_string()))?;
        if !config.base.is_delzant() {
            return Err(bad("polytope is not Delzant".into()));
        }
        let n = config.dim();
        let alpha = match &self.alpha {
            Some(a) => {
                let p = Polytope::from_json(a).map_err(|e| bad(format!("alpha: {e}")))?;
                if p.dim() != n {
                    return Err(bad(format!("alpha has dimension {}, expected {n}", p.dim())));
                }
                Some(p)
            }
            None => None,
        };
        let is_vertex = |v: &[Rational]| config.base.vertex_index(v).is_some();
        let mut tasks = Vec::new();
        for (i, t) in self.tasks.iter().enumerate() {
            let ctx = |m: String| bad(format!("task {i}: {m}"));
            tasks.push(match t {
                TaskSpec::Invariants => Task::Invariants,
                TaskSpec::Slopes { theorems, schedule, tol } => {
                    if theorems.is_empty() {
                        return Err(ctx("no theorems listed".into()));
                    }
                    let ths = theorems.iter().map(|s| parse_theorem(s)).collect::<Result<Vec<_>, _>>().map_err(ctx)?;
                    for th in &ths {
                        match th {
                            Theorem::Point(v) if !is_vertex(v) => {
                                return Err(ctx(format!("{th} is not a vertex of P")))
                            }
                            Theorem::JAlpha if alpha.is_none() => {
                                return Err(ctx("JALPHA needs an alpha polytope".into()))
                            }
                            _ => {}
                        }
                    }
                    check_schedule(schedule).map_err(ctx)?;
                    Task::Slopes { theorems: ths, schedule: schedule.clone(), tol: *tol }
                }
                TaskSpec::Stoppa { vertex, epsilons } => {
                    let v = rationals(vertex).map_err(ctx)?;
                    if !is_vertex(&v) {
                        return Err(ctx("stoppa vertex is not a vertex of P".into()));
                    }
                    let eps = rationals(epsilons).map_err(ctx)?;
                    let distinct: std::collections::BTreeSet<_> = eps.iter().filter(|e| **e != int(0)).collect();
                    if distinct.len() < n + 1 {
                        return Err(ctx(format!("need at least {} distinct nonzero epsilons", n + 1)));
                    }
                    Task::Stoppa { vertex: v, epsilons: eps }
                }
                TaskSpec::Scan { grid, random_points, schedule } => {
                    let grid = grid.clone().unwrap_or_default();
                    if grid.iter().any(|p| p.len() != n) {
                        return Err(ctx(format!("grid points must have {n} coordinates")));
                    }
                    check_schedule(schedule).map_err(ctx)?;
                    Task::Scan { grid, random_points: *random_points, schedule: schedule.clone() }
                }
                TaskSpec::L1 { schedule } => {
                    check_schedule(schedule).map_err(ctx)?;
                    Task::L1 { schedule: schedule.clone() }
                }
            });
        }
        Ok(Validated { name: self.name.clone(), config, alpha, tasks, output_dir: self.output_dir.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem_names() {
        assert_eq!(parse_theorem("am").unwrap(), Theorem::Am);
        assert_eq!(parse_theorem("MINNORM").unwrap(), Theorem::MinNorm);
        let p = parse_theorem("POINT(1/2, 0)").unwrap();
        assert_eq!(p.to_string(), "POINT(1/2,0/1)");
        assert!(parse_theorem("XYZ").is_err());
    }

    #[test]
    fn offsets_count_bytes() {
        let text = "{\n  \"name\": \"x\",\n  oops\n}";
        match parse_scenario(text) {
            Err(CliError::Parse { offset, line, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(&text[offset..offset + 1], "o");
            }
            other => panic!("{other:?}"),
        }
    }
}
