//! `levelset` — build optimal sampling tables and run the experiments.
//!
//! Subcommands: `solve` (build and save a value table), `trace` (one
//! optimal-policy rollout as JSON lines), `compare` (cost sweep of optimal
//! vs one-step lookahead, CSV), `budget` (expected-budget bounds, CSV).
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use levelset_core::budget::{expected_budget_csv, hard_budget_csv, DualSolver};
use levelset_core::policy::{run, PolicyContext, PolicyKind};
use levelset_core::sim::{sweep_cost, sweep_csv};
use levelset_core::{KernelCache, ObservationHistory, ValueTable};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "levelset", version, about = "Adaptive sampling policies for superlevel-set estimation")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the value table for a configuration and write it to disk.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the optimal policy once and emit a JSON-lines trace.
    Trace {
        /// Table file produced by `solve`.
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial observed value at the left endpoint.
        #[arg(long, default_value_t = 0.0)]
        ya: f64,
        /// Initial observed value at the right endpoint.
        #[arg(long, default_value_t = 0.0)]
        yb: f64,
    },
    /// Sweep sampling costs, comparing optimal and one-step lookahead.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated ascending costs.
        #[arg(long, default_value = "0.01,0.02,0.05,0.1,0.2")]
        costs: String,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Expected-budget value and hard-budget sandwich per budget.
    Budget {
        #[arg(long)]
        config: PathBuf,
        /// Output prefix; writes `<out>_expected.csv` and `<out>_region.csv`.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated expected-sample budgets.
        #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10")]
        budgets: String,
        #[arg(long, default_value_t = 50_000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Golden-section tolerance on the cost multiplier.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Bracket floor for the cost multiplier.
        #[arg(long, default_value_t = 1e-3)]
        lambda_floor: f64,
        /// Bracket ceiling; default is twice the reward bound over the interval.
        #[arg(long)]
        lambda_cap: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_err() {
            eprintln!("error: could not configure the thread pool");
            return ExitCode::from(3);
        }
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.is::<ConfigError>() { 2 } else { 3 };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Solve { config, out } => cmd_solve(&config, &out),
        Cmd::Trace { table, out, seed, ya, yb } => cmd_trace(&table, &out, seed, ya, yb),
        Cmd::Compare { config, out, costs, reps, seed } => {
            cmd_compare(&config, &out, &costs, reps, seed)
        }
        Cmd::Budget { config, out, budgets, reps, seed, tol, lambda_floor, lambda_cap } => {
            cmd_budget(&config, &out, &budgets, reps, seed, tol, lambda_floor, lambda_cap)
        }
    }
}

fn parse_list(text: &str, what: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError(format!("{what} entry {t:?} is not a number")).into())
        })
        .collect()
}

fn cmd_solve(config: &Path, out: &Path) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let sc = cfg.scenario()?;
    let t0 = Instant::now();
    let table =
        ValueTable::build(&sc.prior, &sc.grid, &sc.reward, sc.cost, sc.initial.a(), sc.initial.b())?;
    let build_secs = t0.elapsed().as_secs_f64();
    table.save(out)?;
    let checksum = hex::encode(Sha256::digest(std::fs::read(out)?));
    println!("built table in {build_secs:.2}s");
    println!("initial-state value: {}", table.value_of_history(&sc.initial)?);
    println!("wrote {} (sha256 {checksum})", out.display());
    Ok(())
}

fn cmd_trace(table_path: &Path, out: &Path, seed: u64, ya: f64, yb: f64) -> anyhow::Result<()> {
    let table = ValueTable::load(table_path)?;
    let meta = table.meta().clone();
    let h0 = ObservationHistory::from_endpoints(meta.a, meta.b, ya, yb)?;
    let kernels = KernelCache::new(meta.prior.clone(), meta.grid.clone());
    let ctx = PolicyContext {
        prior: &meta.prior,
        grid: &meta.grid,
        reward: &meta.reward,
        stops: table.stops(),
        kernels: &kernels,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = run(&PolicyKind::Optimal(&table), &ctx, &h0, meta.cost, &mut rng)?;
    // Replay the steps to report the running value and stop-reward levels.
    let mut lines = String::new();
    let mut h = h0;
    for (i, obs) in trace.steps.iter().enumerate() {
        h = h.insert(*obs)?;
        let record = json!({
            "step": i,
            "x": obs.x,
            "y": obs.y,
            "value": table.value_of_history(&h)?,
            "stop_reward": table.stop_of_history(&h)?,
        });
        lines.push_str(&record.to_string());
        lines.push('\n');
    }
    std::fs::write(out, lines)?;
    println!(
        "trace: {} samples, final reward {}, performance {}",
        trace.tau, trace.final_reward, trace.performance
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_compare(config: &Path, out: &Path, costs: &str, reps: usize, seed: u64) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let sc = cfg.scenario()?;
    let costs = parse_list(costs, "costs")?;
    let rows = sweep_cost(&sc, &costs, reps, seed)?;
    for r in &rows {
        println!(
            "c={}: optimal {:.6} (se {:.2e}), lookahead {:.6} (se {:.2e}), ratio {:.4}",
            r.cost, r.optimal_value, r.optimal_se, r.lookahead_value, r.lookahead_se, r.ratio
        );
    }
    std::fs::write(out, sweep_csv(&rows))?;
    println!("wrote {}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_budget(
    config: &Path,
    out: &Path,
    budgets: &str,
    reps: usize,
    seed: u64,
    tol: f64,
    lambda_floor: f64,
    lambda_cap: Option<f64>,
) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let sc = cfg.scenario()?;
    let budgets = parse_list(budgets, "budgets")?;
    let span = sc.initial.b() - sc.initial.a();
    let cap = lambda_cap.unwrap_or(2.0 * sc.reward.bound() * span);
    let mut solver = DualSolver::new(&sc, tol)?;
    let results = solver.sweep(&budgets, (lambda_floor, cap), reps, seed)?;
    for r in &results {
        let flag = if r.lambda_at_floor { "  [minimizer at bracket floor]" } else { "" };
        println!(
            "T={}: upper {:.6} (lambda* {:.4}), lower {:.6} (se {:.2e}){flag}",
            r.budget, r.upper_value, r.lambda_star, r.lower_value, r.lower_se
        );
    }
    let expected_path = suffixed(out, "_expected.csv");
    let region_path = suffixed(out, "_region.csv");
    std::fs::write(&expected_path, expected_budget_csv(&results))?;
    std::fs::write(&region_path, hard_budget_csv(&results))?;
    println!("wrote {} and {}", expected_path.display(), region_path.display());
    Ok(())
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    prefix.with_file_name(name)
}
