use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::Deserialize;
use sysrisk::waterfill::Spacing;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Production,
    Coordination,
    Quadratic,
    Raw,
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Sum of node variances (centrality ℓ).
    #[default]
    TotalVar,
    /// Variance of the mean (Bonacich centrality v).
    MeanVar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Edges,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Grid,
    Subgrad,
    Mc,
}

/// A budget given as a number or relative to the node count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetSpec {
    Value(f64),
    SqrtN,
    N,
}

impl BudgetSpec {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            BudgetSpec::Value(c) => c,
            BudgetSpec::SqrtN => (n as f64).sqrt(),
            BudgetSpec::N => n as f64,
        }
    }
}

impl FromStr for BudgetSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "sqrtn" => Ok(BudgetSpec::SqrtN),
            "n" => Ok(BudgetSpec::N),
            other => match other.parse::<f64>() {
                Ok(c) if c.is_finite() && c > 0.0 => Ok(BudgetSpec::Value(c)),
                _ => Err(format!("invalid budget {other:?} (expected a positive number, `sqrtn` or `n`)")),
            },
        }
    }
}

/// `min:max:points[:log|:lin]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: BudgetSpec,
    pub max: BudgetSpec,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    /// Log-spaced from `sqrt(n)` to `n`.
    pub const DEFAULT: GridSpec = GridSpec {
        min: BudgetSpec::SqrtN,
        max: BudgetSpec::N,
        points: 50,
        spacing: Spacing::Log,
    };

    pub fn budgets(&self, n: usize) -> Vec<f64> {
        sysrisk::waterfill::budget_grid(self.min.resolve(n), self.max.resolve(n), self.points, self.spacing)
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("invalid grid {s:?} (expected min:max:points[:log])"));
        }
        let points: usize = parts[2].parse().map_err(|_| format!("invalid point count {:?}", parts[2]))?;
        if points == 0 {
            return Err("grid needs at least one point".into());
        }
        let spacing = match parts.get(3).copied() {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(format!("invalid spacing {other:?}")),
        };
        Ok(GridSpec { min: parts[0].parse()?, max: parts[1].parse()?, points, spacing })
    }
}

/// Flags shared by every subcommand. Unset flags fall back to `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Anchor strengths for the coordination model, one per node.
    #[arg(long)]
    pub rho_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
    /// Budget C: a number, `sqrtn` or `n`.
    #[arg(long)]
    pub budget: Option<BudgetSpec>,
    /// `min:max:points[:log]`; bounds accept `sqrtn` and `n`.
    #[arg(long)]
    pub budget_grid: Option<GridSpec>,
    /// Edge list or matrix describing the network.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
    /// Node labels, one per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Treat the edge list as directed.
    #[arg(long)]
    pub directed: bool,
    /// Node indices in the edge list start at 1.
    #[arg(long)]
    pub one_based: bool,
    /// Leaf count for the star model.
    #[arg(long)]
    pub leaves: Option<usize>,
    /// Node count for the raw model without input (Λ = 0, D = I).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Centralities given directly, comma-separated; skips the model.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub y: Option<Vec<f64>>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Same fields as [`RunArgs`], read from TOML.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    model: Option<ModelKind>,
    beta: Option<f64>,
    rho_file: Option<PathBuf>,
    objective: Option<Objective>,
    budget: Option<String>,
    budget_grid: Option<String>,
    input: Option<PathBuf>,
    input_format: Option<InputFormat>,
    labels: Option<PathBuf>,
    directed: Option<bool>,
    one_based: Option<bool>,
    leaves: Option<usize>,
    nodes: Option<usize>,
    y: Option<Vec<f64>>,
    output: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
}

/// Where the network comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Given(Vec<f64>),
    Model(ModelKind),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub beta: Option<f64>,
    pub rho_file: Option<PathBuf>,
    pub objective: Objective,
    pub budget: Option<BudgetSpec>,
    pub grid: Option<GridSpec>,
    pub input: Option<PathBuf>,
    pub input_format: InputFormat,
    pub labels: Option<PathBuf>,
    pub directed: bool,
    pub one_based: bool,
    pub leaves: Option<usize>,
    pub nodes: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: u64,
}

/// Paths in a config file are relative to the file.
fn rebase(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

impl RunArgs {
    /// Merges flags over the config file (flags win).
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
                let mut f: FileConfig =
                    toml::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("."));
                f.rho_file = rebase(base, f.rho_file);
                f.input = rebase(base, f.input);
                f.labels = rebase(base, f.labels);
                f.output = rebase(base, f.output);
                f
            }
            None => FileConfig::default(),
        };
        let file_budget = file
            .budget
            .map(|s| s.parse::<BudgetSpec>())
            .transpose()
            .map_err(|e| CliError::input("config", e))?;
        let file_grid = file
            .budget_grid
            .map(|s| s.parse::<GridSpec>())
            .transpose()
            .map_err(|e| CliError::input("config", e))?;

        let y = self.y.or(file.y);
        let model = self.model.or(file.model);
        let source = match (y, model) {
            (Some(_), Some(_)) => {
                return Err(CliError::input("config", "--y and --model are mutually exclusive"));
            }
            (Some(y), None) => Source::Given(y),
            (None, Some(m)) => Source::Model(m),
            (None, None) => return Err(CliError::input("config", "one of --model or --y is required")),
        };

        // A budget given on the command line overrides a grid from the file,
        // and vice versa.
        let (budget, grid) = match (self.budget, self.budget_grid) {
            (None, None) => (file_budget, file_grid),
            flags => flags,
        };

        Ok(RunConfig {
            source,
            beta: self.beta.or(file.beta),
            rho_file: self.rho_file.or(file.rho_file),
            objective: self.objective.or(file.objective).unwrap_or_default(),
            budget,
            grid,
            input: self.input.or(file.input),
            input_format: self.input_format.or(file.input_format).unwrap_or_default(),
            labels: self.labels.or(file.labels),
            directed: self.directed || file.directed.unwrap_or(false),
            one_based: self.one_based || file.one_based.unwrap_or(false),
            leaves: self.leaves.or(file.leaves),
            nodes: self.nodes.or(file.nodes),
            output: self.output.or(file.output),
            format: self.format.or(file.format),
            seed: self.seed.or(file.seed).unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_keywords() {
        assert_eq!("sqrtn".parse::<BudgetSpec>().unwrap().resolve(9), 3.0);
        assert_eq!("n".parse::<BudgetSpec>().unwrap().resolve(9), 9.0);
        assert_eq!("2.5".parse::<BudgetSpec>().unwrap().resolve(9), 2.5);
        assert!("-1".parse::<BudgetSpec>().is_err());
        assert!("abc".parse::<BudgetSpec>().is_err());
    }

    #[test]
    fn grid_specs() {
        let g: GridSpec = "sqrtn:n:5:log".parse().unwrap();
        assert_eq!(g.spacing, Spacing::Log);
        let b = g.budgets(4);
        assert_eq!(b.len(), 5);
        assert_eq!(b[0], 2.0);
        assert_eq!(b[4], 4.0);
        assert_eq!("2:4:2".parse::<GridSpec>().unwrap().budgets(3), vec![2.0, 4.0]);
        assert!("2:4".parse::<GridSpec>().is_err());
        assert!("2:4:0".parse::<GridSpec>().is_err());
        assert!("2:4:3:cubic".parse::<GridSpec>().is_err());
        assert_eq!(GridSpec::DEFAULT.budgets(16).len(), 50);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "model = \"star\"\nleaves = 20\nbeta = 0.3\nbudget = \"n\"\nobjective = \"mean-var\"\ninput = \"g.csv\"\n",
        )
        .unwrap();
        let args = RunArgs { config: Some(path), beta: Some(0.58), ..Default::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.source, Source::Model(ModelKind::Star));
        assert_eq!(cfg.beta, Some(0.58));
        assert_eq!(cfg.leaves, Some(20));
        assert_eq!(cfg.budget, Some(BudgetSpec::N));
        assert_eq!(cfg.objective, Objective::MeanVar);
        assert_eq!(cfg.input, Some(dir.path().join("g.csv")));
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "modle = \"star\"\n").unwrap();
        let err = RunArgs { config: Some(path), ..Default::default() }.resolve().unwrap_err();
        assert_eq!(err.code(), 1);
    }

    #[test]
    fn source_required_and_exclusive() {
        assert!(RunArgs::default().resolve().is_err());
        let both = RunArgs { y: Some(vec![1.0]), model: Some(ModelKind::Raw), ..Default::default() };
        assert!(both.resolve().is_err());
    }
}
