use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sysrisk::centrality::{bonacich_values, ell_values, CentralityKind, CentralityVector};
use sysrisk::io::{self, format_g17, EdgeListOptions, OutputFormat, ZeroInfluenceFilter};
use sysrisk::model::{self, InfluenceOperator, NetworkModel, Provenance};
use sysrisk::oracle::{self, OracleReport, GRID_MAX_NODES};
use sysrisk::waterfill::{self, KktCertificate, ProtectionSolution, SolveError, SweepRow, Thresholds};

use crate::config::{Format, InputFormat, ModelKind, Objective, OracleKind, RunConfig, Source};
use crate::CliError;

/// Largest scaled KKT residual accepted from the solver.
pub const KKT_TOL: f64 = 1e-9;
/// Absolute gap allowed against the grid oracle.
pub const GRID_TOL: f64 = 0.02;
/// Relative gap allowed against the subgradient oracle.
pub const SUBGRAD_TOL: f64 = 1e-4;
/// Monte Carlo estimates must sit within this many standard errors.
pub const MC_SIGMAS: f64 = 4.0;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SYSRISK_OUTPUT_DIR";

/// Centralities for a run, in node order.
pub struct Prepared {
    pub values: Vec<f64>,
    pub labels: Option<Vec<String>>,
    pub op: Option<InfluenceOperator>,
    filter: ZeroInfluenceFilter,
    reduced: CentralityVector,
}

impl Prepared {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    fn reduced_budget(&self, c: f64) -> f64 {
        self.filter.reduced_budget(c)
    }

    /// Maps a budget of the reduced problem back to the full one.
    fn full_budget(&self, c: f64) -> f64 {
        (c * c + self.filter.dropped.len() as f64).sqrt()
    }
}

fn read_file<T>(path: &Path, what: &'static str, f: impl FnOnce(File) -> Result<T, io::IoError>) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::input(what, format!("{}: {e}", path.display())))?;
    f(file).map_err(|e| CliError::input(what, format!("{}: {e}", path.display())))
}

fn require<T: Copy>(value: Option<T>, flag: &str, model: ModelKind) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::input("config", format!("--{flag} is required for the {model:?} model")))
}

/// The network as a nonnegative matrix: adjacency for edge lists, the grid
/// itself for matrices.
fn read_network(cfg: &RunConfig, model: ModelKind) -> Result<DMatrix<f64>, CliError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::input("config", format!("--input is required for the {model:?} model")))?;
    match cfg.input_format {
        InputFormat::Edges => {
            let opts = EdgeListOptions { directed: cfg.directed, one_based: cfg.one_based, n: cfg.nodes };
            read_file(path, "input", |f| io::read_edge_list(f, opts)).map(|g| g.adjacency())
        }
        InputFormat::Matrix => read_file(path, "input", io::read_io_matrix),
    }
}

pub fn build_model(cfg: &RunConfig, kind: ModelKind) -> Result<NetworkModel, CliError> {
    let model = match kind {
        ModelKind::Star => {
            let leaves = require(cfg.leaves, "leaves", kind)?;
            model::build_star(leaves, require(cfg.beta, "beta", kind)?)
        }
        ModelKind::Production => {
            let beta = require(cfg.beta, "beta", kind)?;
            let p = io::normalize_rows(&read_network(cfg, kind)?).map_err(|e| CliError::input("input", e))?;
            model::build_production(beta, &p)
        }
        ModelKind::Coordination => {
            let w = read_network(cfg, kind)?;
            let path = cfg
                .rho_file
                .as_deref()
                .ok_or_else(|| CliError::input("config", "--rho-file is required for the coordination model"))?;
            let rho = read_file(path, "rho", io::read_vector)?;
            model::build_coordination(&w, &rho)
        }
        ModelKind::Quadratic => {
            let beta = require(cfg.beta, "beta", kind)?;
            model::build_quadratic(beta, &read_network(cfg, kind)?)
        }
        ModelKind::Raw => {
            let lambda = match (&cfg.input, cfg.nodes) {
                (Some(_), _) => read_network(cfg, kind)?,
                (None, Some(n)) => DMatrix::zeros(n, n),
                (None, None) => return Err(CliError::input("config", "--input or --nodes is required for the raw model")),
            };
            let n = lambda.nrows();
            NetworkModel::new(lambda, DVector::from_element(n, 1.0), Provenance::Raw)
        }
    };
    model.map_err(|e| CliError::input("model", e))
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let (values, kind, op) = match &cfg.source {
        Source::Given(y) => (y.clone(), CentralityKind::Given, None),
        Source::Model(kind) => {
            let model = build_model(cfg, *kind)?;
            let op = model::influence(&model).map_err(|e| CliError::input("model", e))?;
            let (values, kind) = match cfg.objective {
                Objective::TotalVar => (ell_values(&op), CentralityKind::Ell),
                Objective::MeanVar => (bonacich_values(&op), CentralityKind::Bonacich),
            };
            (values, kind, Some(op))
        }
    };
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(CliError::input("centrality", format!("y[{i}] = {v} must be finite and nonnegative")));
    }
    let filter = ZeroInfluenceFilter::new(&values);
    if filter.kept.is_empty() {
        return Err(CliError::input("centrality", "every node has zero centrality"));
    }
    let reduced = CentralityVector::from_unsorted(&filter.kept_values(&values), kind)
        .map_err(|e| CliError::input("centrality", e))?;

    let labels = match &cfg.labels {
        Some(path) => {
            let labels = read_file(path, "labels", io::read_labels)?;
            if labels.len() != values.len() {
                return Err(CliError::input(
                    "labels",
                    format!("expected {} labels, found {}", values.len(), labels.len()),
                ));
            }
            Some(labels)
        }
        None => None,
    };
    Ok(Prepared { values, labels, op, filter, reduced })
}

fn solve_error(e: SolveError) -> CliError {
    match e {
        SolveError::BudgetBelowMinimum { .. } => CliError::infeasible(e),
        other => CliError::input("solver", other),
    }
}

/// Solves at budget `c`; nodes with zero centrality keep `q = 1`.
pub fn solve(prep: &Prepared, c: f64) -> Result<(ProtectionSolution, KktCertificate), CliError> {
    waterfill::check_grid(prep.n(), &[c]).map_err(solve_error)?;
    let sol = waterfill::solve(&prep.reduced, prep.reduced_budget(c)).map_err(solve_error)?;
    let cert = waterfill::kkt_verify(&prep.reduced, &sol, KKT_TOL).map_err(solve_error)?;
    let full = ProtectionSolution {
        q_star: prep.filter.expand(&sol.q_star),
        budget: c,
        thresholds: Thresholds {
            low: prep.full_budget(sol.thresholds.low),
            high: prep.full_budget(sol.thresholds.high),
        },
        ..sol
    };
    Ok((full, cert))
}

pub fn kkt_failure(cert: &KktCertificate) -> CliError {
    CliError::verification(format!(
        "KKT certificate failed: {} residual {:.3e} > {KKT_TOL:e}",
        cert.worst, cert.max_violation
    ))
}

pub fn sweep(prep: &Prepared, budgets: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    waterfill::check_grid(prep.n(), budgets).map_err(solve_error)?;
    let reduced: Vec<f64> = budgets.iter().map(|&c| prep.reduced_budget(c)).collect();
    let rows = waterfill::sweep(&prep.reduced, &reduced).map_err(solve_error)?;
    Ok(rows
        .into_iter()
        .zip(budgets)
        .map(|(row, &c)| SweepRow { budget: c, q_star: prep.filter.expand(&row.q_star), ..row })
        .collect())
}

/// One oracle comparison with its pass/fail verdict.
pub struct Check {
    pub quantity: &'static str,
    pub report: OracleReport,
    pub tolerance: f64,
    pub passed: bool,
}

pub struct VerifyOptions {
    pub oracles: Vec<OracleKind>,
    pub resolution: f64,
    pub iters: usize,
    pub samples: usize,
    pub shock_var: Option<Vec<f64>>,
}

fn oracle_error(e: oracle::OracleError) -> CliError {
    match e {
        oracle::OracleError::EmptyGrid { .. } | oracle::OracleError::Solve(SolveError::BudgetBelowMinimum { .. }) => {
            CliError::infeasible(e)
        }
        other => CliError::input("oracle", other),
    }
}

pub fn verify(prep: &Prepared, sol: &ProtectionSolution, seed: u64, opts: &VerifyOptions) -> Result<Vec<Check>, CliError> {
    let c_red = prep.reduced_budget(sol.budget);
    let oracles = if opts.oracles.is_empty() {
        let mut all = Vec::new();
        if prep.reduced.len() <= GRID_MAX_NODES {
            all.push(OracleKind::Grid);
        }
        all.push(OracleKind::Subgrad);
        if prep.op.is_some() {
            all.push(OracleKind::Mc);
        }
        all
    } else {
        opts.oracles.clone()
    };

    let mut checks = Vec::new();
    for kind in oracles {
        match kind {
            OracleKind::Grid => {
                let report = oracle::brute_force_minmax(&prep.reduced, c_red, opts.resolution).map_err(oracle_error)?;
                let passed = report.gap() <= GRID_TOL;
                checks.push(Check { quantity: "lambda", report, tolerance: GRID_TOL, passed });
            }
            OracleKind::Subgrad => {
                let report = oracle::subgradient_minmax(&prep.reduced, c_red, opts.iters).map_err(oracle_error)?;
                let passed = report.relative_gap() <= SUBGRAD_TOL;
                let tolerance = SUBGRAD_TOL * report.solver_value;
                checks.push(Check { quantity: "lambda", report, tolerance, passed });
            }
            OracleKind::Mc => {
                let op = prep
                    .op
                    .as_ref()
                    .ok_or_else(|| CliError::input("oracle", "Monte Carlo needs a network model, not --y"))?;
                let n = prep.n();
                let sigma: Vec<f64> = match &opts.shock_var {
                    Some(var) => var.iter().map(|v| v.max(0.0).sqrt()).collect(),
                    None => vec![(1.0 / n as f64).sqrt(); n],
                };
                let est = oracle::monte_carlo_variance(op, &sol.q_star, &sigma, opts.samples, seed)
                    .map_err(oracle_error)?;
                let (total, mean) = oracle::analytic_variances(op, &sol.q_star, &sigma);
                let [rt, rm] = est.reports(total, mean);
                for (quantity, report, se) in
                    [("total_variance", rt, est.total_stderr), ("mean_variance", rm, est.mean_stderr)]
                {
                    let tolerance = MC_SIGMAS * se;
                    let passed = report.gap() <= tolerance;
                    checks.push(Check { quantity, report, tolerance, passed });
                }
            }
        }
    }
    Ok(checks)
}

pub fn verify_json(sol: &ProtectionSolution, cert: &KktCertificate, checks: &[Check]) -> String {
    let passed = cert.valid && checks.iter().all(|c| c.passed);
    let mut s = String::from("{\n");
    let _ = writeln!(s, "  \"budget\": {},", format_g17(sol.budget));
    let _ = writeln!(s, "  \"lambda_star\": {},", format_g17(sol.lambda_star));
    let _ = writeln!(s, "  \"kkt_max_violation\": {},", format_g17(cert.max_violation));
    let _ = writeln!(s, "  \"passed\": {passed},");
    s.push_str("  \"reports\": [\n");
    for (k, c) in checks.iter().enumerate() {
        let r = &c.report;
        let _ = write!(
            s,
            "    {{\"method\": \"{}\", \"quantity\": \"{}\", \"oracle_value\": {}, \"solver_value\": {}, \
             \"gap\": {}, \"tolerance\": {}, \"samples_or_resolution\": {}, \"converged\": {}, \"passed\": {}}}",
            r.method,
            c.quantity,
            format_g17(r.oracle_value),
            format_g17(r.solver_value),
            format_g17(r.gap()),
            format_g17(c.tolerance),
            format_g17(r.samples_or_resolution),
            r.converged,
            c.passed
        );
        s.push_str(if k + 1 < checks.len() { ",\n" } else { "\n" });
    }
    s.push_str("  ]\n}\n");
    s
}

pub fn solution_format(cfg: &RunConfig, dest: &Destination) -> OutputFormat {
    match cfg.format {
        Some(Format::Json) => OutputFormat::Json,
        Some(Format::Csv) => OutputFormat::Csv,
        None => match dest {
            Destination::File(p) if p.extension().is_some_and(|e| e == "csv") => OutputFormat::Csv,
            _ => OutputFormat::Json,
        },
    }
}

pub enum Destination {
    File(PathBuf),
    Stdout,
}

impl Destination {
    /// `--output`, else `$SYSRISK_OUTPUT_DIR/<default_name>`, else stdout.
    pub fn resolve(output: Option<&Path>, default_name: &str) -> Self {
        if let Some(p) = output {
            return Destination::File(p.to_path_buf());
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Destination::File(PathBuf::from(dir).join(default_name)),
            _ => Destination::Stdout,
        }
    }

    pub fn write(&self, bytes: &[u8]) -> Result<(), CliError> {
        match self {
            Destination::File(p) => io::write_atomic(p, bytes).map_err(|e| CliError::output(p, e)),
            Destination::Stdout => {
                use std::io::Write;
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::input("output", e))
            }
        }
    }
}
