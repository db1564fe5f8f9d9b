//! Exact solution of the protection min-max problem
//!
//! ```text
//! min_{q ≥ 1, ‖q‖ ≤ C}  max_{‖σ‖ ≤ 1}  Σ (σ_i y_i / q_i)²
//! ```
//!
//! The inner maximum equals `max_i (y_i / q_i)²`. Its optimal value is the
//! water level `λ(C) = f^{-1}(C²)` with `f(λ) = Σ max{1, y_i² / λ}`, and the
//! optimal protection is `q_i = max{1, y_i / sqrt(λ(C))}`.
//!
//! On the interval where exactly the `k` largest centralities sit above the
//! water level, `f(λ) = (n - k) + S_k / λ` with `S_k = Σ_{i ≤ k} y_i²`, so the
//! level is found by a prefix scan over the sorted centralities.

use std::fmt;

use rayon::prelude::*;

use crate::centrality::CentralityVector;

/// Relative tolerance used to decide ties among the ratios `y_i / q_i`.
pub const TIE_TOL: f64 = 1e-9;
/// Budgets this close below `sqrt(n)` (relative) are clamped up to it.
pub const BUDGET_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("budget C = {budget} is below sqrt(n) = {min}; even q = 1 is infeasible")]
    BudgetBelowMinimum { budget: f64, min: f64 },
    #[error("budget must be finite, got {0}")]
    InvalidBudget(f64),
    #[error("water level must be positive, got {0}")]
    InvalidLevel(f64),
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("protection q[{index}] = {value} < 1")]
    InvalidProtection { index: usize, value: f64 },
    #[error("budget grid must be strictly increasing (C[{index}] = {value})")]
    NonMonotoneGrid { index: usize, value: f64 },
    #[error("budget grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Only the most central node is protected.
    Low,
    Intermediate,
    /// Every node is protected above the floor.
    High,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Intermediate => "intermediate",
            Regime::High => "high",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(Regime::Low),
            "intermediate" => Ok(Regime::Intermediate),
            "high" => Ok(Regime::High),
            other => Err(format!("unknown regime {other:?}")),
        }
    }
}

/// Budget thresholds separating the regimes.
///
/// `low = sqrt(n + y_1²/y_2² - 1)`: below it only node 1 is protected.
/// `high = ‖y‖ / y_n`: above it every node is protected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub low: f64,
    pub high: f64,
}

/// Optimal protection for one budget. `q_star` is in original node order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectionSolution {
    pub q_star: Vec<f64>,
    pub lambda_star: f64,
    pub k_active: usize,
    pub regime: Regime,
    pub budget: f64,
    pub thresholds: Thresholds,
}

/// `f(λ) = Σ max{1, y_i² / λ}`.
pub fn f_eval(y: &CentralityVector, lam: f64) -> Result<f64, SolveError> {
    if !(lam > 0.0) {
        return Err(SolveError::InvalidLevel(lam));
    }
    Ok(y.values().iter().map(|v| (v * v / lam).max(1.0)).sum())
}

pub fn thresholds(y: &CentralityVector) -> Thresholds {
    let v = y.values();
    let n = v.len() as f64;
    let low = if v.len() >= 2 {
        (n + (v[0] / v[1]).powi(2) - 1.0).sqrt()
    } else {
        1.0
    };
    Thresholds { low, high: y.norm() / y.min() }
}

/// Validates `C ≥ sqrt(n)`, clamping budgets within rounding of the bound.
fn admissible_budget(n: usize, budget: f64) -> Result<f64, SolveError> {
    if !budget.is_finite() {
        return Err(SolveError::InvalidBudget(budget));
    }
    let min = (n as f64).sqrt();
    if budget >= min {
        Ok(budget)
    } else if min - budget <= BUDGET_CLAMP_TOL * min.max(1.0) {
        Ok(min)
    } else {
        Err(SolveError::BudgetBelowMinimum { budget, min })
    }
}

pub fn classify_regime(y: &CentralityVector, budget: f64) -> Result<(Regime, Thresholds), SolveError> {
    let c = admissible_budget(y.len(), budget)?;
    let t = thresholds(y);
    let regime = if c < t.low {
        Regime::Low
    } else if c > t.high {
        Regime::High
    } else {
        Regime::Intermediate
    };
    Ok((regime, t))
}

/// Water level `λ(C)` and active count `k(C)` by prefix scan.
fn water_level(sorted: &[f64], c: f64) -> (f64, usize) {
    let n = sorted.len();
    let c2 = c * c;
    if c2 - n as f64 <= 8.0 * f64::EPSILON * n as f64 {
        // C = sqrt(n): the only feasible point is q = 1.
        return (sorted[0] * sorted[0], 0);
    }
    let mut prefix = 0.0;
    let mut fallback = (f64::INFINITY, 0.0, 1);
    for k in 1..=n {
        let yk2 = sorted[k - 1] * sorted[k - 1];
        prefix += yk2;
        let level = prefix / (c2 - (n - k) as f64);
        let next = if k < n { sorted[k] * sorted[k] } else { 0.0 };
        if yk2 > level && level >= next {
            return (level, k);
        }
        // Rounding can leave no bracket exactly satisfied; keep the closest.
        let miss = (level - yk2).max(0.0) / yk2 + (next - level).max(0.0) / yk2;
        if miss < fallback.0 {
            fallback = (miss, level, k);
        }
    }
    (fallback.1, fallback.2)
}

/// Optimal protection for budget `C ≥ sqrt(n)`.
pub fn solve(y: &CentralityVector, budget: f64) -> Result<ProtectionSolution, SolveError> {
    let c = admissible_budget(y.len(), budget)?;
    let (regime, thresholds) = classify_regime(y, c)?;
    let sorted = y.values();
    let (lambda_star, k_active) = water_level(sorted, c);
    let root = lambda_star.sqrt();
    let q_sorted: Vec<f64> = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| if i < k_active { v / root } else { 1.0 })
        .collect();
    Ok(ProtectionSolution {
        q_star: y.unsort(&q_sorted),
        lambda_star,
        k_active,
        regime,
        budget: c,
        thresholds,
    })
}

fn check_protection(y: &CentralityVector, q: &[f64]) -> Result<(), SolveError> {
    if q.len() != y.len() {
        return Err(SolveError::DimensionMismatch { expected: y.len(), found: q.len() });
    }
    for (index, &value) in q.iter().enumerate() {
        if !(value >= 1.0) {
            return Err(SolveError::InvalidProtection { index, value });
        }
    }
    Ok(())
}

/// Ratios `y_i / q_i` in node order.
fn ratios(y: &CentralityVector, q: &[f64]) -> Vec<f64> {
    y.original_order().iter().zip(q).map(|(y, q)| y / q).collect()
}

/// Worst-case value `max_i (y_i / q_i)²` for a protection in node order.
pub fn objective_value(y: &CentralityVector, q: &[f64]) -> Result<f64, SolveError> {
    check_protection(y, q)?;
    Ok(ratios(y, q).into_iter().fold(0.0, f64::max).powi(2))
}

/// Adversarial shock standard deviations (node order): unit norm, spread
/// uniformly in variance over the nodes maximizing `y_i / q_i`.
pub fn worst_case_shock(y: &CentralityVector, q: &[f64]) -> Result<Vec<f64>, SolveError> {
    check_protection(y, q)?;
    let r = ratios(y, q);
    let top = r.iter().cloned().fold(0.0, f64::max);
    let tied: Vec<bool> = r.iter().map(|&x| x >= top * (1.0 - TIE_TOL)).collect();
    let count = tied.iter().filter(|&&t| t).count();
    let sigma = (1.0 / count as f64).sqrt();
    Ok(tied.into_iter().map(|t| if t { sigma } else { 0.0 }).collect())
}

/// Each condition checked by [`kkt_verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktCondition {
    /// `q_i ≥ 1`.
    ProtectionFloor,
    /// `(y_i / q_i)² ≤ ψ`.
    ValueBound,
    /// `‖q‖ = C`.
    BudgetTight,
    /// Reported `λ` equals `max_i (y_i / q_i)²`.
    ReportedValue,
    /// `q_i = max{1, y_i / sqrt(ψ)}`.
    ClosedForm,
    /// `f(ψ) = C²`.
    WaterLevel,
    /// `Σ α_i = 1`.
    MultiplierSum,
    /// `α, δ, γ ≥ 0`.
    DualFeasibility,
    /// Gradient of the Lagrangian in `q` vanishes.
    Stationarity,
    /// `α_i ((y_i/q_i)² - ψ) = 0` and `δ_i (q_i - 1) = 0`.
    ComplementarySlackness,
}

impl fmt::Display for KktCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Multipliers and residuals witnessing optimality of a protection for
///
/// ```text
/// min ψ  s.t.  (y_i / q_i)² ≤ ψ,  q_i ≥ 1,  Σ q_i² ≤ C²
/// ```
///
/// with Lagrangian
/// `ψ + Σ α_i((y_i/q_i)² - ψ) + γ(Σ q_i² - C²) - Σ δ_i (q_i - 1)`.
/// Vectors are in node order.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub psi: f64,
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub delta: Vec<f64>,
    pub max_violation: f64,
    pub worst: KktCondition,
    pub valid: bool,
}

/// Rebuilds the multipliers for `sol` and measures every KKT residual
/// (scaled to be dimensionless). The certificate is valid when the largest
/// residual is at most `tol`.
pub fn kkt_verify(
    y: &CentralityVector,
    sol: &ProtectionSolution,
    tol: f64,
) -> Result<KktCertificate, SolveError> {
    let q = &sol.q_star;
    check_protection(y, q)?;
    let yo = y.original_order();
    let n = yo.len();
    let psi = sol.lambda_star;
    if !(psi > 0.0) {
        return Err(SolveError::InvalidLevel(psi));
    }

    // Multipliers. Active nodes carry α_i = γ q_i⁴ / y_i², which with
    // q_i = y_i / sqrt(ψ) and Σ α = 1 gives γ = ψ² / Σ_active y_i².
    let active: Vec<bool> = q.iter().map(|&qi| qi > 1.0 + TIE_TOL).collect();
    let mut alpha = vec![0.0; n];
    let gamma;
    if active.iter().any(|&a| a) {
        let mass: f64 = (0..n).filter(|&i| active[i]).map(|i| yo[i] * yo[i]).sum();
        gamma = psi * psi / mass;
        for i in (0..n).filter(|&i| active[i]) {
            alpha[i] = yo[i] * yo[i] / mass;
        }
    } else {
        let r = ratios(y, q);
        let top = r.iter().cloned().fold(0.0, f64::max);
        let tied: Vec<usize> = (0..n).filter(|&i| r[i] >= top * (1.0 - TIE_TOL)).collect();
        for &i in &tied {
            alpha[i] = 1.0 / tied.len() as f64;
        }
        gamma = (0..n)
            .map(|i| alpha[i] * yo[i] * yo[i] / q[i].powi(4))
            .fold(0.0, f64::max);
    }
    let delta: Vec<f64> = (0..n)
        .map(|i| {
            if active[i] {
                0.0
            } else {
                2.0 * gamma * q[i] - 2.0 * alpha[i] * yo[i] * yo[i] / q[i].powi(3)
            }
        })
        .collect();

    let mut worst = (0.0, KktCondition::ProtectionFloor);
    let mut record = |cond: KktCondition, value: f64| {
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value > worst.0 {
            worst = (value, cond);
        }
    };

    let c = sol.budget;
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    record(KktCondition::BudgetTight, (norm - c).abs() / c);
    let f = yo.iter().map(|v| (v * v / psi).max(1.0)).sum::<f64>();
    record(KktCondition::WaterLevel, (f - c * c).abs() / (c * c));
    let attained = (0..n).map(|i| (yo[i] / q[i]).powi(2)).fold(0.0, f64::max);
    record(KktCondition::ReportedValue, (attained - psi).abs() / psi);
    record(KktCondition::MultiplierSum, (1.0 - alpha.iter().sum::<f64>()).abs());
    record(KktCondition::DualFeasibility, (-gamma).max(0.0));

    let root = psi.sqrt();
    for i in 0..n {
        let ratio2 = (yo[i] / q[i]).powi(2);
        record(KktCondition::ProtectionFloor, 1.0 - q[i]);
        record(KktCondition::ValueBound, (ratio2 - psi) / psi);
        record(KktCondition::ClosedForm, (q[i] - (yo[i] / root).max(1.0)).abs() / q[i]);
        record(KktCondition::DualFeasibility, -alpha[i]);
        record(KktCondition::DualFeasibility, -delta[i] / (2.0 * gamma * q[i]));

        let pull = 2.0 * alpha[i] * yo[i] * yo[i] / q[i].powi(3);
        let push = 2.0 * gamma * q[i];
        let grad = -pull + push - delta[i];
        record(KktCondition::Stationarity, grad.abs() / (pull + push + delta[i].abs()));

        record(KktCondition::ComplementarySlackness, alpha[i] * (ratio2 - psi).abs() / psi);
        record(KktCondition::ComplementarySlackness, delta[i] / (2.0 * gamma) * (q[i] - 1.0) / q[i]);
    }

    let (max_violation, worst) = worst;
    Ok(KktCertificate {
        psi,
        alpha,
        gamma,
        delta,
        max_violation,
        worst,
        valid: max_violation <= tol,
    })
}

/// Protection proportional to centrality with the whole budget spent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffuseBaseline {
    /// `C y / ‖y‖` in node order. The floor `q ≥ 1` is not enforced.
    pub q: Vec<f64>,
    /// `max_i (y_i / q_i)²`, which is `‖y‖² / C²`.
    pub value: f64,
    /// Whether every entry of `q` is at least one.
    pub feasible: bool,
}

pub fn diffuse_baseline(y: &CentralityVector, budget: f64) -> Result<DiffuseBaseline, SolveError> {
    let c = admissible_budget(y.len(), budget)?;
    let scale = c / y.norm();
    let yo = y.original_order();
    let q: Vec<f64> = yo.iter().map(|v| v * scale).collect();
    let value = yo.iter().zip(&q).map(|(v, q)| v / q).fold(0.0, f64::max).powi(2);
    let feasible = q.iter().all(|&x| x >= 1.0);
    Ok(DiffuseBaseline { q, value, feasible })
}

/// One budget of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: f64,
    pub lambda_opt: f64,
    pub lambda_diff: f64,
    pub diffuse_feasible: bool,
    pub k_active: usize,
    pub regime: Regime,
    /// Optimal protection in node order.
    pub q_star: Vec<f64>,
}

impl SweepRow {
    pub fn ratio(&self) -> f64 {
        self.lambda_opt / self.lambda_diff
    }
}

/// Checks that a budget grid is nonempty, strictly increasing and starts at
/// or above `sqrt(n)`.
pub fn check_grid(n: usize, budgets: &[f64]) -> Result<(), SolveError> {
    let first = *budgets.first().ok_or(SolveError::EmptyGrid)?;
    admissible_budget(n, first)?;
    for (index, pair) in budgets.windows(2).enumerate() {
        if !(pair[1] > pair[0]) {
            return Err(SolveError::NonMonotoneGrid { index: index + 1, value: pair[1] });
        }
    }
    Ok(())
}

/// Solves every budget (in parallel) and compares with the diffuse baseline.
/// Rows come back in grid order.
pub fn sweep(y: &CentralityVector, budgets: &[f64]) -> Result<Vec<SweepRow>, SolveError> {
    check_grid(y.len(), budgets)?;
    budgets
        .par_iter()
        .map(|&c| {
            let sol = solve(y, c)?;
            let diffuse = diffuse_baseline(y, c)?;
            Ok(SweepRow {
                budget: sol.budget,
                lambda_opt: sol.lambda_star,
                lambda_diff: diffuse.value,
                diffuse_feasible: diffuse.feasible,
                k_active: sol.k_active,
                regime: sol.regime,
                q_star: sol.q_star,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// `points` budgets from `min` to `max` inclusive.
pub fn budget_grid(min: f64, max: f64, points: usize, spacing: Spacing) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let steps = (points - 1) as f64;
            let mut grid: Vec<f64> = (0..points)
                .map(|i| {
                    let t = i as f64 / steps;
                    match spacing {
                        Spacing::Linear => min + t * (max - min),
                        Spacing::Log => (min.ln() + t * (max.ln() - min.ln())).exp(),
                    }
                })
                .collect();
            grid[0] = min;
            grid[points - 1] = max;
            grid
        }
    }
}
