//! Command-line front end: `solve`, `certify` and `simulate`.
//!
//! Exit codes: 0 on success, 1 when a certification check fails, 2 on usage
//! or input errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::certify::{certify, CertificationReport, CertifyOptions};
use crate::config::InstanceConfig;
use crate::market::MarketInstance;
use crate::pricing::{
    compare_profits, profit_upper_bound, social_optimum, solve_quantity_based, solve_time_dependent,
    ProfitComparison, QuantityEquilibrium, SocialOptimum, TimeDependentEquilibrium,
};
use crate::response::default_count_cap;
use crate::simulation::{round_sig12, run_monte_carlo, write_csv, MonteCarloSummary, ScenarioDistribution};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "FRESHMARKET_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "freshmarket", version, about = "Equilibrium pricing for fresh-data markets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve both pricing schemes and the social optimum for one instance.
    Solve(SolveArgs),
    /// Check the analytic equilibria against the brute-force grid oracle.
    Certify(CertifyArgs),
    /// Run the Monte Carlo scheme comparison.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Update-count cap for the threshold and social-optimum scans.
    #[arg(long)]
    pub k_cap: Option<u32>,
    #[arg(long)]
    pub epsilon_rel: Option<f64>,
    /// Also write the report to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Oracle grid points (at least 100).
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Oracle update-count cap (default max(ceil(2n/10), 32)).
    #[arg(long)]
    pub k_cap: Option<u32>,
    #[arg(long)]
    pub epsilon_rel: Option<f64>,
    /// Number of random adversarial price grids.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-trial records.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Summary block.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub schema_version: u32,
    pub instance: MarketInstance,
    pub viable: bool,
    pub degenerate: bool,
    pub warning: Option<String>,
    pub time_dependent: TimeDependentEquilibrium,
    pub quantity_based: QuantityEquilibrium,
    pub social_optimum: SocialOptimum,
    pub profit_upper_bound: f64,
    pub profit_comparison: ProfitComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyOutput {
    pub schema_version: u32,
    pub report: CertificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOutput {
    pub schema_version: u32,
    pub summary: MonteCarloSummary,
}

/// Failure carrying the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl ToString) -> Failure {
    Failure { code: EXIT_USAGE, message: message.to_string() }
}

/// Rounds every float to 12 significant digits, leaving integers and the
/// echoed instance untouched.
fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig12).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if key != "instance" {
                    round_floats(v);
                }
            }
        }
        _ => {}
    }
}

/// Pretty JSON with floats at 12 significant digits.
pub fn to_output_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    round_floats(&mut v);
    serde_json::to_string_pretty(&v).expect("values serialize")
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<InstanceConfig, Failure> {
    InstanceConfig::load(path).map_err(usage)
}

fn check_epsilon(eps: f64) -> Result<f64, Failure> {
    if eps.is_finite() && eps > 0.0 {
        Ok(eps)
    } else {
        Err(usage(format!("--epsilon-rel must be positive, got {eps}")))
    }
}

pub fn solve_report(instance: &MarketInstance, k_cap: u32, epsilon_rel: f64) -> crate::Result<SolveReport> {
    let viable = instance.is_viable();
    let time_dependent = solve_time_dependent(instance);
    let quantity_based = solve_quantity_based(instance, k_cap, epsilon_rel)?;
    let degenerate = time_dependent.degenerate || quantity_based.degenerate;
    let warning = (!viable).then(|| {
        "one update costs more than it is worth to the destination; no updates are traded".to_string()
    });
    Ok(SolveReport {
        schema_version: SCHEMA_VERSION,
        instance: instance.clone(),
        viable,
        degenerate,
        warning,
        social_optimum: social_optimum(instance, k_cap),
        profit_upper_bound: profit_upper_bound(instance, k_cap),
        profit_comparison: compare_profits(instance, k_cap, epsilon_rel)?,
        time_dependent,
        quantity_based,
    })
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let config = load(&args.config)?;
    let k_cap = args.k_cap.unwrap_or(config.solver.k_cap);
    let eps = check_epsilon(args.epsilon_rel.unwrap_or(config.solver.epsilon_rel))?;
    let instance = config.instance().map_err(usage)?;
    let report = solve_report(&instance, k_cap, eps).map_err(usage)?;
    let text = to_output_json(&report);
    if let Some(path) = &args.json {
        write_file(path, &text)?;
    }
    writeln!(out, "{text}").map_err(usage)?;
    Ok(EXIT_OK)
}

fn cmd_certify(args: &CertifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let config = load(&args.config)?;
    let grid_n = args.grid_n.unwrap_or(config.solver.grid_n);
    if grid_n < 100 {
        return Err(usage(format!("--grid-n must be at least 100, got {grid_n}")));
    }
    let opts = CertifyOptions {
        grid_n,
        oracle_k_cap: args.k_cap.unwrap_or_else(|| default_count_cap(grid_n)),
        scan_k_cap: config.solver.k_cap,
        epsilon_rel: check_epsilon(args.epsilon_rel.unwrap_or(config.solver.epsilon_rel))?,
        adversarial_trials: args.trials,
        seed: args.seed,
    };
    let instance = config.instance().map_err(usage)?;
    let report = certify(&instance, &opts).map_err(usage)?;
    let passed = report.passed;
    let failing: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let text = to_output_json(&CertifyOutput { schema_version: SCHEMA_VERSION, report });
    if let Some(path) = &args.json {
        write_file(path, &text)?;
    }
    writeln!(out, "{text}").map_err(usage)?;
    if passed {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: format!("certification failed: {}", failing.join(", ")),
        })
    }
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let dist = ScenarioDistribution { trials: args.trials, seed: args.seed, ..Default::default() };
    dist.validate().map_err(usage)?;
    // open outputs first so bad paths fail before the run
    let csv_file = args
        .csv
        .as_ref()
        .map(|p| File::create(p).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))))
        .transpose()?;
    if let Some(p) = &args.json {
        File::create(p).map_err(|e| usage(format!("cannot write {}: {e}", p.display())))?;
    }

    let (records, summary) = run_monte_carlo(&dist).map_err(usage)?;
    if let Some(file) = csv_file {
        write_csv(BufWriter::new(file), &records).map_err(|e| usage(format!("writing CSV: {e}")))?;
    }
    let text = to_output_json(&SimulateOutput { schema_version: SCHEMA_VERSION, summary: summary.clone() });
    if let Some(p) = &args.json {
        write_file(p, &text)?;
    }
    let headline = serde_json::json!({
        "trials": summary.trials,
        "seed": summary.seed,
        "profit_ratio": round_sig12(summary.profit_ratio),
        "social_cost_ratio": round_sig12(summary.social_cost_ratio),
        "aggregate_aoi_ratio": round_sig12(summary.aggregate_aoi_ratio),
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&headline).expect("json")).map_err(usage)?;
    Ok(EXIT_OK)
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| usage(format!("cannot start worker threads: {e}")))
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let mut buf: Vec<u8> = Vec::new();
    let result = thread_pool().and_then(|pool| {
        pool.install(|| match &cli.command {
            Command::Solve(a) => cmd_solve(a, &mut buf),
            Command::Certify(a) => cmd_certify(a, &mut buf),
            Command::Simulate(a) => cmd_simulate(a, &mut buf),
        })
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
