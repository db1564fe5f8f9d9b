//! Linear network equilibrium models `x = (I - Λ)^{-1} D c`.
//!
//! Three builders cover the motivating classes:
//! - production networks: `Λ = βP`, `D = (1 - β) I` for row-stochastic `P`,
//! - coordination games (and Friedkin-Johnsen dynamics):
//!   `Λ_ij = W_ij / (w_i + ρ_i)`, `D_ii = ρ_i / (w_i + ρ_i)`,
//! - quadratic games: `Λ = βW`, `D = I`.
//!
//! Any other `(Λ, D)` pair can be supplied through [`NetworkModel::new`].

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};

/// Slack allowed on row sums of `Λ` above one.
const ROW_SUM_SLACK: f64 = 1e-12;
/// Row sums of a stochastic matrix must be within this of one.
const STOCHASTIC_TOL: f64 = 1e-9;
/// Spectral radius must stay below `1 - SPECTRAL_MARGIN`.
const SPECTRAL_MARGIN: f64 = 1e-9;
/// Maximum residual of `(I - Λ) L - D` accepted from the factorization.
pub const INFLUENCE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} of Λ sums to {sum} > 1")]
    RowSumExceedsOne { row: usize, sum: f64 },
    #[error("anchor weight d[{index}] = {value} outside [0, 1]")]
    AnchorOutOfRange { index: usize, value: f64 },
    #[error("row {row} is not stochastic: sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("beta = {beta} outside its admissible range {range}")]
    BetaOutOfRange { beta: f64, range: &'static str },
    #[error("node {row} has zero total interaction weight")]
    ZeroWeightRow { row: usize },
    #[error("rho[{index}] = {value} is negative or not finite")]
    InvalidRho { index: usize, value: f64 },
    #[error("anchored nodes are not reachable from nodes {unreachable:?}")]
    NotGloballyReachable { unreachable: Vec<usize> },
    #[error("beta * w_{row} = {value} >= 1")]
    QuadraticUnstable { row: usize, value: f64 },
    #[error("spectral radius of Λ is not below one (nodes {closed:?} never leak, lower bound {lower_bound})")]
    SpectralRadius { closed: Vec<usize>, lower_bound: f64 },
    #[error("I - Λ is singular or near-singular (residual {residual:e})")]
    Singular { residual: f64 },
    #[error("protection q[{index}] = {value} < 1")]
    InvalidProtection { index: usize, value: f64 },
    #[error("shock sigma[{index}] = {value} is negative or not finite")]
    InvalidSigma { index: usize, value: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("dynamics did not converge in {steps} steps (last residual {residual:e})")]
    MaxStepsExceeded { steps: usize, residual: f64 },
}

/// Which builder produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Production,
    Coordination,
    Quadratic,
    Raw,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Production => "production",
            Provenance::Coordination => "coordination",
            Provenance::Quadratic => "quadratic",
            Provenance::Raw => "raw",
        })
    }
}

/// Bounds on the Perron root of `Λ` from shifted power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

/// The pair `(Λ, D)` of a sub-stochastic network equilibrium.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    lambda: DMatrix<f64>,
    d: DVector<f64>,
    provenance: Provenance,
    spectral: SpectralBounds,
}

impl NetworkModel {
    /// Validates `Λ ≥ 0` with row sums at most one, `D` in `[0, 1]` and a
    /// spectral radius strictly below one.
    pub fn new(
        lambda: DMatrix<f64>,
        d: DVector<f64>,
        provenance: Provenance,
    ) -> Result<Self, ModelError> {
        let n = check_square(&lambda)?;
        if d.len() != n {
            return Err(ModelError::DimensionMismatch { expected: n, found: d.len() });
        }
        check_nonnegative(&lambda)?;
        for (row, sum) in row_sums(&lambda).into_iter().enumerate() {
            if sum > 1.0 + ROW_SUM_SLACK {
                return Err(ModelError::RowSumExceedsOne { row, sum });
            }
        }
        for (index, &value) in d.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::AnchorOutOfRange { index, value });
            }
        }

        let spectral = spectral_bounds(&lambda, 10 * n.max(1), SPECTRAL_MARGIN);
        let closed = non_leaking_nodes(&lambda);
        if !closed.is_empty() || spectral.lower >= 1.0 - SPECTRAL_MARGIN {
            return Err(ModelError::SpectralRadius { closed, lower_bound: spectral.lower });
        }

        Ok(Self { lambda, d, provenance, spectral })
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn spectral_bounds(&self) -> SpectralBounds {
        self.spectral
    }
}

/// `Λ = βP`, `D = (1 - β) I` for a row-stochastic `P` and `0 < β < 1`.
pub fn build_production(beta: f64, p: &DMatrix<f64>) -> Result<NetworkModel, ModelError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(ModelError::BetaOutOfRange { beta, range: "(0, 1)" });
    }
    let n = check_square(p)?;
    check_nonnegative(p)?;
    for (row, sum) in row_sums(p).into_iter().enumerate() {
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(ModelError::NotStochastic { row, sum });
        }
    }
    NetworkModel::new(p * beta, DVector::from_element(n, 1.0 - beta), Provenance::Production)
}

/// Coordination game with interaction weights `w` and anchor strengths `rho`.
pub fn build_coordination(w: &DMatrix<f64>, rho: &[f64]) -> Result<NetworkModel, ModelError> {
    let n = check_square(w)?;
    if rho.len() != n {
        return Err(ModelError::DimensionMismatch { expected: n, found: rho.len() });
    }
    check_nonnegative(w)?;
    for (index, &value) in rho.iter().enumerate() {
        if !(value.is_finite() && value >= 0.0) {
            return Err(ModelError::InvalidRho { index, value });
        }
    }
    let weights = row_sums(w);
    if let Some(row) = weights.iter().position(|&s| s <= 0.0) {
        return Err(ModelError::ZeroWeightRow { row });
    }

    // Every node must have a directed path (i -> j when W_ij > 0) into the
    // anchored set; search backwards from the anchors.
    let anchored: Vec<usize> = (0..n).filter(|&i| rho[i] > 0.0).collect();
    let reached = reverse_reach(w, &anchored);
    let unreachable: Vec<usize> = (0..n).filter(|&i| !reached[i]).collect();
    if !unreachable.is_empty() {
        return Err(ModelError::NotGloballyReachable { unreachable });
    }

    let mut lambda = w.clone();
    let mut d = DVector::zeros(n);
    for i in 0..n {
        let denom = weights[i] + rho[i];
        lambda.row_mut(i).unscale_mut(denom);
        d[i] = rho[i] / denom;
    }
    NetworkModel::new(lambda, d, Provenance::Coordination)
}

/// Quadratic game `Λ = βW`, `D = I`; requires `β w_i < 1` for every node.
pub fn build_quadratic(beta: f64, w: &DMatrix<f64>) -> Result<NetworkModel, ModelError> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(ModelError::BetaOutOfRange { beta, range: "[0, inf)" });
    }
    let n = check_square(w)?;
    check_nonnegative(w)?;
    for (row, sum) in row_sums(w).into_iter().enumerate() {
        let value = beta * sum;
        if value >= 1.0 {
            return Err(ModelError::QuadraticUnstable { row, value });
        }
    }
    NetworkModel::new(w * beta, DVector::from_element(n, 1.0), Provenance::Quadratic)
}

/// Adjacency matrix of the undirected star with node 0 at the center.
pub fn star_adjacency(n_leaves: usize) -> DMatrix<f64> {
    let n = n_leaves + 1;
    DMatrix::from_fn(n, n, |i, j| if (i == 0) != (j == 0) { 1.0 } else { 0.0 })
}

/// Production model on the degree-normalized star: `P_ij = A_ij / d_i`.
pub fn build_star(n_leaves: usize, beta: f64) -> Result<NetworkModel, ModelError> {
    let mut p = star_adjacency(n_leaves);
    for mut row in p.row_iter_mut() {
        let degree = row.sum();
        if degree > 0.0 {
            row.unscale_mut(degree);
        }
    }
    build_production(beta, &p)
}

/// The influence matrix `L = (I - Λ)^{-1} D`.
#[derive(Debug, Clone)]
pub struct InfluenceOperator {
    l: DMatrix<f64>,
}

impl InfluenceOperator {
    /// Wraps an explicit, entrywise nonnegative `L`.
    pub fn from_matrix(l: DMatrix<f64>) -> Result<Self, ModelError> {
        check_square(&l)?;
        check_nonnegative(&l)?;
        Ok(Self { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }
}

/// Solves `(I - Λ) L = D` through one LU factorization, one column per
/// node with `d_i > 0`, and checks the residual.
pub fn influence(model: &NetworkModel) -> Result<InfluenceOperator, ModelError> {
    let n = model.n();
    let a = DMatrix::identity(n, n) - model.lambda();
    let support: Vec<usize> = (0..n).filter(|&j| model.d()[j] != 0.0).collect();

    let mut rhs = DMatrix::zeros(n, support.len());
    for (col, &j) in support.iter().enumerate() {
        rhs[(j, col)] = model.d()[j];
    }
    let lu = a.clone().lu();
    let mut solved = lu.solve(&rhs).ok_or(ModelError::Singular { residual: f64::INFINITY })?;

    let residual_of = |x: &DMatrix<f64>| (&a * x - &rhs).amax();
    let mut residual = residual_of(&solved);
    if residual > INFLUENCE_RESIDUAL_TOL {
        // one step of iterative refinement
        if let Some(correction) = lu.solve(&(&rhs - &a * &solved)) {
            solved += correction;
            residual = residual_of(&solved);
        }
    }

    let mut l = DMatrix::zeros(n, n);
    for (col, &j) in support.iter().enumerate() {
        l.set_column(j, &solved.column(col));
    }
    // The Neumann series is nonnegative; round-off can leave -0-ish entries.
    let scale = l.amax().max(1.0);
    for value in l.iter_mut() {
        if *value < 0.0 && *value > -1e-12 * scale {
            *value = 0.0;
        }
    }
    let full_residual = (&a * &l - DMatrix::from_diagonal(model.d())).amax();
    let residual = residual.max(full_residual);
    if !residual.is_finite() || residual > INFLUENCE_RESIDUAL_TOL {
        return Err(ModelError::Singular { residual });
    }
    InfluenceOperator::from_matrix(l)
}

/// Reference inputs, shock standard deviations and protections.
#[derive(Debug, Clone)]
pub struct EquilibriumInput {
    c_bar: DVector<f64>,
    shock_sigma: DVector<f64>,
    protection: DVector<f64>,
}

impl EquilibriumInput {
    pub fn new(
        c_bar: DVector<f64>,
        shock_sigma: DVector<f64>,
        protection: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let n = c_bar.len();
        for len in [shock_sigma.len(), protection.len()] {
            if len != n {
                return Err(ModelError::DimensionMismatch { expected: n, found: len });
            }
        }
        for (index, &value) in shock_sigma.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidSigma { index, value });
            }
        }
        for (index, &value) in protection.iter().enumerate() {
            if !(value >= 1.0) {
                return Err(ModelError::InvalidProtection { index, value });
            }
        }
        Ok(Self { c_bar, shock_sigma, protection })
    }

    /// No shock variance and no protection.
    pub fn unprotected(c_bar: DVector<f64>) -> Self {
        let n = c_bar.len();
        Self {
            c_bar,
            shock_sigma: DVector::zeros(n),
            protection: DVector::from_element(n, 1.0),
        }
    }

    pub fn c_bar(&self) -> &DVector<f64> {
        &self.c_bar
    }

    pub fn shock_sigma(&self) -> &DVector<f64> {
        &self.shock_sigma
    }

    pub fn protection(&self) -> &DVector<f64> {
        &self.protection
    }

    /// Whether `Σ σ_i² = 1` within `tol`, i.e. `diag(σ²)` lies in the
    /// admissible shock set.
    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.shock_sigma.norm_squared() - 1.0).abs() <= tol
    }

    /// Realized input `c = c̄ + Q^{-1} η`.
    pub fn shocked_input(&self, eta: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if eta.len() != self.c_bar.len() {
            return Err(ModelError::DimensionMismatch { expected: self.c_bar.len(), found: eta.len() });
        }
        Ok(&self.c_bar + eta.component_div(&self.protection))
    }
}

/// `x = L (c̄ + Q^{-1} η)`.
pub fn equilibrium(
    op: &InfluenceOperator,
    input: &EquilibriumInput,
    eta: &DVector<f64>,
) -> Result<DVector<f64>, ModelError> {
    if input.c_bar().len() != op.n() {
        return Err(ModelError::DimensionMismatch { expected: op.n(), found: input.c_bar().len() });
    }
    Ok(op.l() * input.shocked_input(eta)?)
}

/// Runs `x(k+1) = Λ x(k) + D c` until successive iterates differ by less
/// than `tol` in max-norm. Returns the last iterate and the step count.
///
/// With `x0 = c` this is the Friedkin-Johnsen opinion dynamics.
pub fn iterate_dynamics(
    model: &NetworkModel,
    c: &DVector<f64>,
    x0: &DVector<f64>,
    tol: f64,
    max_steps: usize,
) -> Result<(DVector<f64>, usize), ModelError> {
    if !(tol > 0.0) {
        return Err(ModelError::InvalidTolerance(tol));
    }
    let n = model.n();
    for len in [c.len(), x0.len()] {
        if len != n {
            return Err(ModelError::DimensionMismatch { expected: n, found: len });
        }
    }
    let forcing = model.d().component_mul(c);
    let mut x = x0.clone();
    let mut residual = f64::INFINITY;
    for step in 1..=max_steps {
        let next = model.lambda() * &x + &forcing;
        residual = (&next - &x).amax();
        x = next;
        if residual < tol {
            return Ok((x, step));
        }
    }
    Err(ModelError::MaxStepsExceeded { steps: max_steps, residual })
}

fn check_square(m: &DMatrix<f64>) -> Result<usize, ModelError> {
    if m.nrows() != m.ncols() {
        return Err(ModelError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

fn check_nonnegative(m: &DMatrix<f64>) -> Result<(), ModelError> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let value = m[(row, col)];
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::InvalidEntry { row, col, value });
            }
        }
    }
    Ok(())
}

pub(crate) fn row_sums(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.sum()).collect()
}

/// Marks every node with a path `i -> ... -> t` (edges where `m_ij > 0`)
/// into one of `targets`.
fn reverse_reach(m: &DMatrix<f64>, targets: &[usize]) -> Vec<bool> {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &t in targets {
        if !seen[t] {
            seen[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !seen[i] && m[(i, j)] > 0.0 {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

/// Nodes that cannot reach any row of `Λ` summing to less than one. For a
/// sub-stochastic matrix the spectral radius is one exactly when this set
/// is nonempty.
fn non_leaking_nodes(lambda: &DMatrix<f64>) -> Vec<usize> {
    let leaky: Vec<usize> = row_sums(lambda)
        .into_iter()
        .enumerate()
        .filter(|&(_, s)| s < 1.0 - ROW_SUM_SLACK)
        .map(|(i, _)| i)
        .collect();
    let reached = reverse_reach(lambda, &leaky);
    (0..lambda.nrows()).filter(|&i| !reached[i]).collect()
}

/// Collatz-Wielandt bounds on the Perron root of a nonnegative matrix,
/// refined by power iteration on `Λ + I` (the shift removes periodicity).
pub fn spectral_bounds(lambda: &DMatrix<f64>, max_iter: usize, tol: f64) -> SpectralBounds {
    let n = lambda.nrows();
    if n == 0 {
        return SpectralBounds { lower: 0.0, upper: 0.0, iterations: 0 };
    }
    let mut x = DVector::from_element(n, 1.0);
    let mut bounds = SpectralBounds { lower: 0.0, upper: f64::INFINITY, iterations: 0 };
    for it in 1..=max_iter {
        let y = lambda * &x + &x;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (yi, xi) in y.iter().zip(x.iter()) {
            let ratio = yi / xi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        bounds = SpectralBounds {
            lower: bounds.lower.max(lo - 1.0),
            upper: bounds.upper.min(hi - 1.0),
            iterations: it,
        };
        if bounds.upper - bounds.lower < tol {
            break;
        }
        let scale = y.max();
        x = y / scale;
    }
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn swap2() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn production_substitutes_beta() {
        let m = build_production(0.5, &swap2()).unwrap();
        assert_eq!(m.lambda(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert_eq!(m.d().as_slice(), &[0.5, 0.5]);
        assert_eq!(m.provenance(), Provenance::Production);
    }

    #[test]
    fn production_beta_boundary() {
        let id = DMatrix::identity(3, 3);
        let m = build_production(0.999, &id).unwrap();
        let b = m.spectral_bounds();
        assert!(b.lower <= 0.999 + 1e-12 && b.upper >= 0.999 - 1e-12);
        assert!(matches!(build_production(1.0, &id), Err(ModelError::BetaOutOfRange { .. })));
        assert!(matches!(build_production(0.0, &id), Err(ModelError::BetaOutOfRange { .. })));
    }

    #[test]
    fn production_rejects_non_stochastic_row() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.7, 0.2]);
        match build_production(0.5, &p) {
            Err(ModelError::NotStochastic { row, sum }) => {
                assert_eq!(row, 1);
                assert_abs_diff_eq!(sum, 0.9, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn production_row_sums_equal_beta() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 1.0, 0.0, 0.0, 3.0, 3.0, 0.0]);
        let p = crate::io::normalize_rows(&a).unwrap();
        let m = build_production(0.58, &p).unwrap();
        for s in row_sums(m.lambda()) {
            assert_abs_diff_eq!(s, 0.58, epsilon = 1e-15);
        }
    }

    #[test]
    fn coordination_formulas() {
        let m = build_coordination(&swap2(), &[1.0, 1.0]).unwrap();
        assert_eq!(m.lambda(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert_eq!(m.d().as_slice(), &[0.5, 0.5]);

        let scaled = build_coordination(&(swap2() * 2.0), &[2.0, 2.0]).unwrap();
        assert_eq!(scaled.lambda(), m.lambda());
        assert_eq!(scaled.d(), m.d());
    }

    #[test]
    fn coordination_rejects_empty_anchor_set() {
        let err = build_coordination(&swap2(), &[0.0, 0.0]).unwrap_err();
        assert_eq!(err, ModelError::NotGloballyReachable { unreachable: vec![0, 1] });
    }

    #[test]
    fn coordination_reachability_is_directional() {
        // 0 -> 1 -> 2 (anchored), 2 -> 1; node 3 only listens to itself.
        let w = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        );
        let err = build_coordination(&w, &[0.0, 0.0, 1.0, 0.0]).unwrap_err();
        assert_eq!(err, ModelError::NotGloballyReachable { unreachable: vec![3] });
        assert!(build_coordination(&w, &[0.0, 0.0, 1.0, 0.5]).is_ok());
    }

    #[test]
    fn coordination_rejects_isolated_node() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(build_coordination(&w, &[1.0, 1.0]).unwrap_err(), ModelError::ZeroWeightRow { row: 1 });
    }

    #[test]
    fn quadratic_builder() {
        let m = build_quadratic(0.25, &swap2()).unwrap();
        assert_eq!(m.lambda(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.25, 0.25, 0.0]));
        assert_eq!(m.d().as_slice(), &[1.0, 1.0]);

        let err = build_quadratic(0.5, &(swap2() * 2.0)).unwrap_err();
        assert_eq!(err, ModelError::QuadraticUnstable { row: 0, value: 1.0 });

        let w = DMatrix::from_row_slice(2, 2, &[0.0, 5.0, 3.0, 0.0]);
        let l = influence(&build_quadratic(0.0, &w).unwrap()).unwrap();
        assert_eq!(l.l(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn raw_model_rejects_closed_class() {
        // rows 0 and 1 form a closed stochastic block: radius exactly one
        let lambda = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0]);
        let err = NetworkModel::new(lambda, DVector::from_element(3, 0.5), Provenance::Raw).unwrap_err();
        assert!(matches!(err, ModelError::SpectralRadius { ref closed, .. } if closed == &vec![0, 1]));
    }

    #[test]
    fn raw_model_validation() {
        let bad_row = DMatrix::from_row_slice(2, 2, &[0.6, 0.6, 0.0, 0.0]);
        assert!(matches!(
            NetworkModel::new(bad_row, DVector::from_element(2, 0.5), Provenance::Raw),
            Err(ModelError::RowSumExceedsOne { row: 0, .. })
        ));
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -0.1, 0.0, 0.0]);
        assert!(matches!(
            NetworkModel::new(neg, DVector::from_element(2, 0.5), Provenance::Raw),
            Err(ModelError::InvalidEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            NetworkModel::new(DMatrix::zeros(2, 2), DVector::from_vec(vec![0.5, 1.5]), Provenance::Raw),
            Err(ModelError::AnchorOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn spectral_bounds_bracket_known_radius() {
        // periodic matrix: plain power iteration would oscillate
        let b = spectral_bounds(&(swap2() * 0.7), 100, 1e-12);
        assert!(b.lower <= 0.7 + 1e-12 && b.upper >= 0.7 - 1e-12);
        assert!(b.upper - b.lower < 1e-9);
    }

    #[test]
    fn influence_examples() {
        let id = NetworkModel::new(DMatrix::zeros(3, 3), DVector::from_element(3, 1.0), Provenance::Raw).unwrap();
        assert_eq!(influence(&id).unwrap().l(), &DMatrix::identity(3, 3));

        let m = build_production(0.5, &swap2()).unwrap();
        let l = influence(&m).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((l.l() - expected).amax() < 1e-15);
    }

    #[test]
    fn influence_skips_unanchored_columns() {
        let w = swap2();
        let m = build_coordination(&w, &[1.0, 0.0]).unwrap();
        let l = influence(&m).unwrap();
        assert_eq!(l.l().column(1).amax(), 0.0);
        let a = DMatrix::identity(2, 2) - m.lambda();
        assert!((a * l.l() - DMatrix::from_diagonal(m.d())).amax() <= INFLUENCE_RESIDUAL_TOL);
    }

    #[test]
    fn equilibrium_examples() {
        let id = InfluenceOperator::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let input = EquilibriumInput::unprotected(DVector::from_vec(vec![1.0, 2.0]));
        let x = equilibrium(&id, &input, &DVector::zeros(2)).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);

        let input = EquilibriumInput::new(
            DVector::zeros(2),
            DVector::from_vec(vec![0.6, 0.8]),
            DVector::from_vec(vec![2.0, 4.0]),
        )
        .unwrap();
        assert!(input.is_normalized(1e-12));
        let x = equilibrium(&id, &input, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);

        let leontief = influence(&build_production(0.5, &swap2()).unwrap()).unwrap();
        let input = EquilibriumInput::unprotected(DVector::from_element(2, 1.0));
        let x = equilibrium(&leontief, &input, &DVector::zeros(2)).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_input_validation() {
        let err = EquilibriumInput::new(
            DVector::zeros(2),
            DVector::zeros(2),
            DVector::from_vec(vec![1.0, 0.5]),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InvalidProtection { index: 1, .. }));
        let id = InfluenceOperator::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let input = EquilibriumInput::unprotected(DVector::zeros(2));
        assert!(matches!(
            equilibrium(&id, &input, &DVector::zeros(3)),
            Err(ModelError::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn dynamics_without_interaction_reaches_dc() {
        let m = NetworkModel::new(
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![0.5, 0.25]),
            Provenance::Raw,
        )
        .unwrap();
        let c = DVector::from_vec(vec![2.0, 4.0]);
        let (x, steps) = iterate_dynamics(&m, &c, &DVector::zeros(2), 1e-12, 10).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
        assert!(steps <= 2);
        let (_, steps) = iterate_dynamics(&m, &c, &DVector::from_vec(vec![1.0, 1.0]), 1e-12, 10).unwrap();
        assert_eq!(steps, 1);
    }

    #[test]
    fn dynamics_match_direct_solve() {
        let m = build_coordination(&swap2(), &[1.0, 1.0]).unwrap();
        let l = influence(&m).unwrap();
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let tol = 1e-12;
        let (x, _) = iterate_dynamics(&m, &c, &DVector::zeros(2), tol, 10_000).unwrap();
        let direct = l.l() * &c;
        let bound = tol / (1.0 - m.spectral_bounds().upper);
        assert!((x - &direct).amax() <= bound);

        // Friedkin-Johnsen: start from the initial opinions themselves
        let (fj, _) = iterate_dynamics(&m, &c, &c, tol, 10_000).unwrap();
        assert!((fj - direct).amax() <= bound);
    }

    #[test]
    fn dynamics_report_max_steps() {
        let m = build_production(0.99, &swap2()).unwrap();
        let c = DVector::from_vec(vec![1.0, -1.0]);
        match iterate_dynamics(&m, &c, &DVector::zeros(2), 1e-14, 5) {
            Err(ModelError::MaxStepsExceeded { steps: 5, residual }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn star_builder_is_degree_normalized() {
        let m = build_star(4, 0.5).unwrap();
        assert_eq!(m.n(), 5);
        assert_abs_diff_eq!(m.lambda()[(0, 1)], 0.5 / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.lambda()[(3, 0)], 0.5, epsilon = 1e-15);
        assert_eq!(m.lambda()[(3, 2)], 0.0);
    }
}
