use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kstab::run::TaskResult;
use kstab::suite::check_suite;
use kstab::{run_file, RunOptions, ScenarioResult};

#[derive(Parser)]
#[command(name = "kstab", version, about = "K-stability lab for toric test configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory (default: the scenario's output_dir, else kstab-out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest τ sample.
        #[arg(long)]
        tau_max: Option<f64>,
        /// Gauss–Legendre order of the ξ-quadrature.
        #[arg(long)]
        quad_order: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the bundled acceptance scenarios.
    CheckSuite {
        #[arg(long, default_value = "kstab-suite")]
        out: PathBuf,
        /// Only scenarios whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn init_threads() {
    if let Some(n) = std::env::var("KSTAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn summarize(res: &ScenarioResult) {
    for (i, t) in res.tasks.iter().enumerate() {
        match t {
            TaskResult::Invariants(r) => {
                println!("task {i} invariants: DF {} minimum norm {}", r.df.value, r.minimum_norm.value)
            }
            TaskResult::Slopes { verdicts, .. } => {
                for v in verdicts {
                    println!(
                        "task {i} {:<12} slope {:>14.8} exact {:>8} residual {:.1e} tol {:.0e} {}",
                        v.theorem,
                        v.slope,
                        v.exact,
                        v.residual,
                        v.tol,
                        if v.pass { "PASS" } else { "FAIL" }
                    );
                }
            }
            TaskResult::Stoppa { coefficient, expected, pass, .. } => println!(
                "task {i} stoppa: coefficient {} expected {} {}",
                coefficient.value,
                expected.value,
                if *pass { "PASS" } else { "FAIL" }
            ),
            TaskResult::Scan(r) => println!(
                "task {i} scan: best ({}) Chow weight {} destabilizing {}",
                r.best.point.join(", "),
                r.best.exact.clone().unwrap_or_else(|| format!("{:.6}", r.best.chow)),
                r.destabilizing
            ),
            TaskResult::L1 { limit, minimum_norm, .. } => {
                println!("task {i} l1: limit {limit:.6} minimum norm {}", minimum_norm.value)
            }
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    match Cli::parse().command {
        Command::Run { scenario, out, tau_max, quad_order, seed } => {
            let opts = RunOptions { tau_max, quad_order, seed };
            match run_file(&scenario, out, &opts) {
                Ok((res, dir)) => {
                    summarize(&res);
                    println!("report written to {}", dir.join("report.json").display());
                    ExitCode::from(if res.pass { 0 } else { 1 })
                }
                Err(e) => {
                    eprintln!("kstab: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
        Command::CheckSuite { out, filter } => {
            let failures = check_suite(&out, filter.as_deref(), &RunOptions::default(), |name, res, secs| match res {
                Ok(r) => println!("{name:<16} {} ({secs:.1} s)", if r.pass { "PASS" } else { "FAIL" }),
                Err(e) => println!("{name:<16} ERROR ({secs:.1} s) {e}"),
            });
            ExitCode::from(u8::from(failures > 0))
        }
    }
}
