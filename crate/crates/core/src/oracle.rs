//! Independent checks of the waterfilling solver.
//!
//! None of these routines use the water-level construction: the grid and
//! subgradient searches only evaluate `max_i (y_i / q_i)²` over feasible
//! protections, and the Monte Carlo estimator simulates the equilibrium.

use std::fmt;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::centrality::{CentralityVector, StarCentralities};
use crate::model::InfluenceOperator;
use crate::waterfill::{self, SolveError};

/// Largest node count accepted by the grid search.
pub const GRID_MAX_NODES: usize = 4;
/// Monte Carlo samples drawn per substream.
pub const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("grid search supports at most {max} nodes, got {n}")]
    TooManyNodes { n: usize, max: usize },
    #[error("no feasible grid point: budget {budget} < sqrt(n) = {min}")]
    EmptyGrid { budget: f64, min: f64 },
    #[error("resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("shock variances sum to {0}, expected 1")]
    SigmaNotNormalized(f64),
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("protection q[{index}] = {value} < 1")]
    InvalidProtection { index: usize, value: f64 },
    #[error("star needs at least 2 leaves and beta in (0, 1)")]
    InvalidStar,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Grid,
    Subgradient,
    MonteCarlo,
}

impl OracleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleMethod::Grid => "grid",
            OracleMethod::Subgradient => "subgradient",
            OracleMethod::MonteCarlo => "montecarlo",
        }
    }
}

impl fmt::Display for OracleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An oracle value next to the value it checks.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub method: OracleMethod,
    pub oracle_value: f64,
    pub solver_value: f64,
    /// Grid resolution, iteration count or sample count.
    pub samples_or_resolution: f64,
    /// Subgradient: whether the iteration settled. Always true otherwise.
    pub converged: bool,
}

impl OracleReport {
    pub fn gap(&self) -> f64 {
        (self.oracle_value - self.solver_value).abs()
    }

    pub fn relative_gap(&self) -> f64 {
        self.gap() / self.solver_value.abs()
    }
}

fn budget_squared(n: usize, budget: f64) -> Result<f64, OracleError> {
    let min = (n as f64).sqrt();
    if !(budget >= min * (1.0 - waterfill::BUDGET_CLAMP_TOL)) {
        return Err(OracleError::EmptyGrid { budget, min });
    }
    Ok(budget.max(min).powi(2))
}

/// Exhaustive search of `max_i (y_i / q_i)²` over a grid of protections.
///
/// Every coordinate but one ranges over `{1, 1 + h, 1 + 2h, ...}` and the
/// remaining one takes the whole leftover budget; each coordinate in turn
/// plays the leftover role. The objective is nonincreasing in every `q_i`,
/// so this dominates the plain grid while staying inside the feasible set.
pub fn brute_force_minmax(
    y: &CentralityVector,
    budget: f64,
    resolution: f64,
) -> Result<OracleReport, OracleError> {
    let n = y.len();
    if n > GRID_MAX_NODES {
        return Err(OracleError::TooManyNodes { n, max: GRID_MAX_NODES });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(OracleError::InvalidResolution(resolution));
    }
    let c2 = budget_squared(n, budget)?;
    let yo = y.original_order();
    let steps = ((c2.sqrt() - 1.0) / resolution).floor() as usize + 1;
    let grid: Vec<f64> = (0..steps).map(|k| 1.0 + k as f64 * resolution).collect();

    let mut best = f64::INFINITY;
    for free in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != free).collect();
        // squared ratios per grid point, per coordinate
        let table: Vec<Vec<f64>> = others
            .iter()
            .map(|&i| grid.iter().map(|q| (yo[i] / q).powi(2)).collect())
            .collect();
        let mut scan = GridScan {
            grid: &grid,
            table: &table,
            c2,
            free_y2: yo[free] * yo[free],
            best,
        };
        scan.descend(0, 0.0, 0.0);
        best = scan.best;
    }
    let solver = waterfill::solve(y, budget)?;
    Ok(OracleReport {
        method: OracleMethod::Grid,
        oracle_value: best,
        solver_value: solver.lambda_star,
        samples_or_resolution: resolution,
        converged: true,
    })
}

struct GridScan<'a> {
    grid: &'a [f64],
    table: &'a [Vec<f64>],
    c2: f64,
    free_y2: f64,
    best: f64,
}

impl GridScan<'_> {
    fn descend(&mut self, depth: usize, used: f64, worst: f64) {
        let remaining = (self.table.len() - depth) as f64;
        if depth == self.table.len() {
            let left = self.c2 - used;
            if left < 1.0 - 1e-12 {
                return;
            }
            let value = worst.max(self.free_y2 / left.max(1.0));
            if value < self.best {
                self.best = value;
            }
            return;
        }
        for (k, &q) in self.grid.iter().enumerate() {
            let spent = used + q * q;
            // the deeper coordinates and the free one need at least 1 each
            if spent + remaining > self.c2 + 1e-12 {
                break;
            }
            let worst = worst.max(self.table[depth][k]);
            if worst >= self.best {
                continue;
            }
            self.descend(depth + 1, spent, worst);
        }
    }
}

/// Euclidean projection onto `{q ≥ 1, ‖q‖ ≤ C}`: clip at one, then shrink
/// the unclipped entries radially onto the sphere, repeating until no new
/// entry drops below one (at most `n + 1` passes).
pub fn project_box_ball(z: &[f64], c2: f64) -> Vec<f64> {
    let mut q: Vec<f64> = z.iter().map(|&x| x.max(1.0)).collect();
    if q.iter().map(|x| x * x).sum::<f64>() <= c2 {
        return q;
    }
    let mut pinned: Vec<bool> = z.iter().map(|&x| x <= 1.0).collect();
    let mut scale = 1.0;
    for _ in 0..=z.len() {
        let fixed = pinned.iter().filter(|&&p| p).count() as f64;
        let mass: f64 = z.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(x, _)| x * x).sum();
        if mass <= 0.0 {
            break;
        }
        scale = ((c2 - fixed).max(0.0) / mass).sqrt();
        let mut changed = false;
        for (x, p) in z.iter().zip(pinned.iter_mut()) {
            if !*p && x * scale < 1.0 {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for ((qi, &x), &p) in q.iter_mut().zip(z).zip(&pinned) {
        *qi = if p { 1.0 } else { x * scale };
    }
    q
}

/// Projected subgradient descent on `q ↦ max_i y_i / q_i` (same minimizer
/// as its square) with geometrically decaying normalized steps.
pub fn subgradient_minmax(
    y: &CentralityVector,
    budget: f64,
    iters: usize,
) -> Result<OracleReport, OracleError> {
    let n = y.len();
    let c2 = budget_squared(n, budget)?;
    let yo = y.original_order();

    let mut q = project_box_ball(&vec![c2.sqrt() / (n as f64).sqrt(); n], c2);
    let eval = |q: &[f64]| yo.iter().zip(q).map(|(y, q)| y / q).fold(0.0, f64::max);
    let mut best = eval(&q);
    let mut current = best;

    let initial_step = 0.5 * c2.sqrt() / (n as f64).sqrt();
    let final_step = 1e-12 * c2.sqrt();
    let decay = if iters > 1 {
        (final_step / initial_step).powf(1.0 / (iters - 1) as f64)
    } else {
        1.0
    };
    let mut step = initial_step;
    let mut direction = vec![0.0; n];
    for _ in 0..iters {
        let ratios: Vec<f64> = yo.iter().zip(&q).map(|(y, q)| y / q).collect();
        let top = ratios.iter().cloned().fold(0.0, f64::max);
        // average of the subgradients -y_i/q_i² e_i over the near-maximal set
        let mut norm2 = 0.0;
        for i in 0..n {
            direction[i] = if ratios[i] >= top * (1.0 - 1e-12) { ratios[i] / q[i] } else { 0.0 };
            norm2 += direction[i] * direction[i];
        }
        if norm2 == 0.0 {
            break;
        }
        let norm = norm2.sqrt();
        let moved: Vec<f64> = q.iter().zip(&direction).map(|(q, d)| q + step * d / norm).collect();
        q = project_box_ball(&moved, c2);
        current = eval(&q);
        if current < best {
            best = current;
        }
        step *= decay;
    }

    let solver = waterfill::solve(y, budget)?;
    Ok(OracleReport {
        method: OracleMethod::Subgradient,
        oracle_value: best * best,
        solver_value: solver.lambda_star,
        samples_or_resolution: iters as f64,
        converged: (current - best) <= 1e-6 * best,
    })
}

/// Empirical variances of the equilibrium under Gaussian shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    /// `Σ_i Var[x_i]` (unbiased per-node sample variances).
    pub total_variance: f64,
    /// `Var[n^{-1} 1'x]`.
    pub mean_variance: f64,
    pub total_stderr: f64,
    pub mean_stderr: f64,
    pub samples: usize,
}

impl VarianceEstimate {
    /// Reports against the analytic values `(Σ Var[x_i], Var[mean])`.
    pub fn reports(&self, analytic_total: f64, analytic_mean: f64) -> [OracleReport; 2] {
        let make = |oracle_value, solver_value| OracleReport {
            method: OracleMethod::MonteCarlo,
            oracle_value,
            solver_value,
            samples_or_resolution: self.samples as f64,
            converged: true,
        };
        [make(self.total_variance, analytic_total), make(self.mean_variance, analytic_mean)]
    }

    /// Whether both estimates sit within `k` standard errors of the
    /// analytic values.
    pub fn within(&self, analytic_total: f64, analytic_mean: f64, k: f64) -> bool {
        (self.total_variance - analytic_total).abs() <= k * self.total_stderr
            && (self.mean_variance - analytic_mean).abs() <= k * self.mean_stderr
    }
}

#[derive(Debug, Clone, Default)]
struct MomentSums {
    count: f64,
    x: Vec<f64>,
    x2: Vec<f64>,
    mean: f64,
    mean2: f64,
    z2: f64,
    w2: f64,
}

impl MomentSums {
    fn new(n: usize) -> Self {
        Self { x: vec![0.0; n], x2: vec![0.0; n], ..Default::default() }
    }

    fn merge(mut self, other: &MomentSums) -> Self {
        self.count += other.count;
        for i in 0..self.x.len() {
            self.x[i] += other.x[i];
            self.x2[i] += other.x2[i];
        }
        self.mean += other.mean;
        self.mean2 += other.mean2;
        self.z2 += other.z2;
        self.w2 += other.w2;
        self
    }
}

/// Simulates `x = L Q^{-1} η` with independent `η_i ~ N(0, σ_i²)`.
///
/// Samples are drawn in chunks of [`MC_CHUNK`], chunk `k` from ChaCha8
/// stream `k` of `seed`, and reduced in chunk order, so the result does not
/// depend on the number of worker threads.
pub fn monte_carlo_variance(
    op: &InfluenceOperator,
    q: &[f64],
    sigma: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VarianceEstimate, OracleError> {
    let n = op.n();
    for len in [q.len(), sigma.len()] {
        if len != n {
            return Err(OracleError::DimensionMismatch { expected: n, found: len });
        }
    }
    if let Some((index, &value)) = q.iter().enumerate().find(|(_, &v)| !(v >= 1.0)) {
        return Err(OracleError::InvalidProtection { index, value });
    }
    let power: f64 = sigma.iter().map(|s| s * s).sum();
    if (power - 1.0).abs() > 1e-9 {
        return Err(OracleError::SigmaNotNormalized(power));
    }
    if samples < 1000 {
        return Err(OracleError::TooFewSamples { got: samples, min: 1000 });
    }

    let scale = DVector::from_iterator(n, sigma.iter().zip(q).map(|(s, q)| s / q));
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<MomentSums> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let size = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut sums = MomentSums::new(n);
            let mut u = DVector::zeros(n);
            for _ in 0..size {
                for i in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    u[i] = scale[i] * z;
                }
                let x = op.l() * &u;
                let mut z = 0.0;
                for i in 0..n {
                    sums.x[i] += x[i];
                    sums.x2[i] += x[i] * x[i];
                    z += x[i] * x[i];
                }
                let m = x.sum() / n as f64;
                sums.mean += m;
                sums.mean2 += m * m;
                sums.z2 += z * z;
                sums.w2 += m.powi(4);
                sums.count += 1.0;
            }
            sums
        })
        .collect();
    let total = partials.iter().fold(MomentSums::new(n), |acc, p| acc.merge(p));

    let count = total.count;
    let unbiased = |sum: f64, sum2: f64| (sum2 - sum * sum / count) / (count - 1.0);
    let total_variance: f64 = (0..n).map(|i| unbiased(total.x[i], total.x2[i])).sum();
    let mean_variance = unbiased(total.mean, total.mean2);

    // Standard errors of the zero-mean estimators mean(‖x‖²) and mean(m²).
    let z_mean: f64 = total.x2.iter().sum::<f64>() / count;
    let w_mean = total.mean2 / count;
    let total_stderr = ((total.z2 / count - z_mean * z_mean).max(0.0) / count).sqrt();
    let mean_stderr = ((total.w2 / count - w_mean * w_mean).max(0.0) / count).sqrt();

    Ok(VarianceEstimate {
        total_variance,
        mean_variance,
        total_stderr,
        mean_stderr,
        samples,
    })
}

/// `(Σ_i (σ_i ℓ_i / q_i)², Σ_i (σ_i v_i / q_i)²)`, node order throughout.
pub fn analytic_variances(op: &InfluenceOperator, q: &[f64], sigma: &[f64]) -> (f64, f64) {
    let ell = crate::centrality::ell_values(op);
    let v = crate::centrality::bonacich_values(op);
    let term = |c: &[f64]| {
        c.iter()
            .zip(q)
            .zip(sigma)
            .map(|((c, q), s)| (s * c / q).powi(2))
            .sum::<f64>()
    };
    (term(&ell), term(&v))
}

/// Columns of the Leontief matrix `(1 - β)(I - βP)^{-1}` of the
/// degree-normalized star, by fixed-point iteration `x ← e_j + βPx` with the
/// sparse star structure. Returns the center and first-leaf centralities.
pub fn star_leontief_centralities(n_leaves: usize, beta: f64) -> Result<StarCentralities, OracleError> {
    if n_leaves < 2 || !(beta > 0.0 && beta < 1.0) {
        return Err(OracleError::InvalidStar);
    }
    let m = n_leaves;
    let column = |j: usize| -> Vec<f64> {
        let mut x = vec![0.0; m + 1];
        for _ in 0..10_000 {
            // (Px)_0 = mean of leaves, (Px)_leaf = x_0
            let leaf_mean = x[1..].iter().sum::<f64>() / m as f64;
            let mut next = vec![beta * x[0]; m + 1];
            next[0] = beta * leaf_mean;
            next[j] += 1.0;
            let diff = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            x = next;
            if diff <= f64::EPSILON * 1e-2 {
                break;
            }
        }
        x.iter().map(|v| (1.0 - beta) * v).collect()
    };
    let n = (m + 1) as f64;
    let center = column(0);
    let leaf = column(1);
    let norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(StarCentralities {
        v_center: center.iter().sum::<f64>() / n,
        v_leaf: leaf.iter().sum::<f64>() / n,
        ell_center: norm(&center),
        ell_leaf: norm(&leaf),
    })
}
