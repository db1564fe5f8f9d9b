//! `sysrisk`: optimal protection against adversarial shocks on network
//! equilibria.
//!
//! Exit codes: 0 success, 1 input error, 2 budget below `sqrt(n)`,
//! 3 verification failure.

mod config;
mod run;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sysrisk::io;

use config::{GridSpec, OracleKind, RunArgs, RunConfig};
use run::{Destination, VerifyOptions};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    stage: &'static str,
    message: String,
}

impl CliError {
    pub fn input(stage: &'static str, message: impl Display) -> Self {
        Self { code: 1, stage, message: message.to_string() }
    }

    pub fn infeasible(message: impl Display) -> Self {
        Self { code: 2, stage: "solver", message: message.to_string() }
    }

    pub fn verification(message: impl Display) -> Self {
        Self { code: 3, stage: "verify", message: message.to_string() }
    }

    pub fn output(path: &Path, message: impl Display) -> Self {
        Self { code: 1, stage: "output", message: format!("{}: {message}", path.display()) }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

#[derive(Parser)]
#[command(name = "sysrisk", version, about = "Optimal protection allocation on network equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for one budget and write the per-node protection.
    Solve(#[command(flatten)] RunArgs),
    /// Solve over a budget grid and write the comparison with the diffuse
    /// allocation.
    Sweep(SweepArgs),
    /// Check the solver against independent oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write per-node protection for every budget.
    #[arg(long)]
    trajectories: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Oracles to run (default: all that apply).
    #[arg(long, value_enum, value_delimiter = ',')]
    verify: Vec<OracleKind>,
    /// Grid step for the brute-force oracle.
    #[arg(long, default_value_t = 0.005)]
    resolution: f64,
    /// Subgradient iterations.
    #[arg(long, default_value_t = 100_000)]
    iters: usize,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Shock variances for Monte Carlo, summing to one (default uniform).
    #[arg(long, value_delimiter = ',')]
    shock_var: Option<Vec<f64>>,
}

fn single_budget(cfg: &RunConfig, n: usize) -> Result<f64, CliError> {
    if cfg.grid.is_some() {
        return Err(CliError::input("config", "this command takes --budget, not --budget-grid"));
    }
    let spec = cfg.budget.ok_or_else(|| CliError::input("config", "--budget is required"))?;
    Ok(spec.resolve(n))
}

fn cmd_solve(args: RunArgs) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let prep = run::prepare(&cfg)?;
    let c = single_budget(&cfg, prep.n())?;
    let (sol, cert) = run::solve(&prep, c)?;
    eprintln!(
        "solve: n={} C={} lambda*={} regime={} k_active={} kkt={:.2e}",
        prep.n(),
        sol.budget,
        sol.lambda_star,
        sol.regime,
        sol.k_active,
        cert.max_violation
    );
    if !cert.valid {
        return Err(run::kkt_failure(&cert));
    }
    let default_name = match cfg.format {
        Some(config::Format::Csv) => "solution.csv",
        _ => "solution.json",
    };
    let dest = Destination::resolve(cfg.output.as_deref(), default_name);
    let mut buf = Vec::new();
    let format = run::solution_format(&cfg, &dest);
    io::write_solution(&mut buf, &sol, &prep.values, prep.labels.as_deref(), format)
        .map_err(|e| CliError::input("output", e))?;
    dest.write(&buf)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = args.run.resolve()?;
    if cfg.budget.is_some() {
        return Err(CliError::input("config", "sweep takes --budget-grid, not --budget"));
    }
    if matches!(cfg.format, Some(config::Format::Json)) {
        return Err(CliError::input("config", "sweep output is CSV only"));
    }
    let prep = run::prepare(&cfg)?;
    let budgets = cfg.grid.unwrap_or(GridSpec::DEFAULT).budgets(prep.n());
    let rows = run::sweep(&prep, &budgets)?;
    eprintln!("sweep: n={} points={}", prep.n(), rows.len());

    let mut buf = Vec::new();
    io::write_sweep(&mut buf, &rows).map_err(|e| CliError::input("output", e))?;
    if let Some(path) = &args.trajectories {
        let mut traj = Vec::new();
        io::write_trajectories(&mut traj, &rows, prep.labels.as_deref()).map_err(|e| CliError::input("output", e))?;
        io::write_atomic(path, &traj).map_err(|e| CliError::output(path, e))?;
    }
    Destination::resolve(cfg.output.as_deref(), "sweep.csv").write(&buf)
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let cfg = args.run.resolve()?;
    let prep = run::prepare(&cfg)?;
    let c = single_budget(&cfg, prep.n())?;
    let (sol, cert) = run::solve(&prep, c)?;
    let opts = VerifyOptions {
        oracles: args.verify,
        resolution: args.resolution,
        iters: args.iters,
        samples: args.samples,
        shock_var: args.shock_var,
    };
    let checks = run::verify(&prep, &sol, cfg.seed, &opts)?;

    eprintln!("verify: kkt max violation {:.3e} ({})", cert.max_violation, if cert.valid { "ok" } else { "FAIL" });
    for c in &checks {
        eprintln!(
            "verify: {} {}: oracle={} solver={} gap={:.3e} tol={:.3e} {}",
            c.report.method,
            c.quantity,
            c.report.oracle_value,
            c.report.solver_value,
            c.report.gap(),
            c.tolerance,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    Destination::resolve(cfg.output.as_deref(), "verify.json").write(run::verify_json(&sol, &cert, &checks).as_bytes())?;

    if !cert.valid {
        return Err(run::kkt_failure(&cert));
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} {}", c.report.method, c.quantity))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::verification(format!("gap above tolerance: {}", failed.join(", "))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {}", e.stage, e.message);
            ExitCode::from(e.code)
        }
    }
}
