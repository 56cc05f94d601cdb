//! Bundled acceptance scenarios for `kstab check-suite`.

use std::path::Path;

use crate::{emit_outputs, parse_scenario, run_scenario, CliError, RunOptions, ScenarioResult};

pub const BUNDLED: &[(&str, &str)] = &[
    ("interval_line", include_str!("../scenarios/interval_line.json")),
    ("interval_vee", include_str!("../scenarios/interval_vee.json")),
    ("interval_jflow", include_str!("../scenarios/interval_jflow.json")),
    ("simplex_blowup", include_str!("../scenarios/simplex_blowup.json")),
    ("square_line", include_str!("../scenarios/square_line.json")),
];

/// Runs the bundled scenarios whose name contains `filter`, writing each
/// into `out/<name>`.
pub fn check_suite(
    out: &Path,
    filter: Option<&str>,
    opts: &RunOptions,
    mut on_done: impl FnMut(&str, &Result<ScenarioResult, CliError>, f64),
) -> usize {
    let mut failures = 0;
    for (name, text) in BUNDLED.iter().filter(|(n, _)| filter.is_none_or(|f| n.contains(f))) {
        let t = std::time::Instant::now();
        let res = parse_scenario(text).and_then(|s| s.validate()).and_then(|v| {
            let r = run_scenario(&v, opts)?;
            emit_outputs(&r, &out.join(name))?;
            Ok(r)
        });
        failures += usize::from(!matches!(&res, Ok(r) if r.pass));
        on_done(name, &res, t.elapsed().as_secs_f64());
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, text) in BUNDLED {
            let v = parse_scenario(text).and_then(|s| s.validate()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&v.name, name);
        }
    }
}
