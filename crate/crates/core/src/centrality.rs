//! Centrality vectors feeding the two variance objectives.
//!
//! `ℓ_i` is the Euclidean norm of column `i` of `L` and drives the total
//! variance `Σ Var[x_i]`; `v = n^{-1} L' 1` (Bonacich centrality) drives the
//! variance of the arithmetic mean.

use std::cmp::Ordering;
use std::fmt;

use crate::model::InfluenceOperator;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CentralityError {
    #[error("node {index} has zero {kind} centrality")]
    ZeroCentrality { index: usize, kind: CentralityKind },
    #[error("centrality of node {index} is {value}; entries must be positive and finite")]
    InvalidValue { index: usize, value: f64 },
    #[error("centrality vector is empty")]
    Empty,
    #[error("star graph needs at least 2 leaves, got {0}")]
    TooFewLeaves(usize),
    #[error("beta = {0} outside (0, 1)")]
    BetaOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentralityKind {
    /// Column norms of `L`: total-variance objective.
    Ell,
    /// Normalized column sums of `L`: variance of the mean.
    Bonacich,
    /// Supplied directly by the caller.
    Given,
}

impl fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CentralityKind::Ell => "ell",
            CentralityKind::Bonacich => "bonacich",
            CentralityKind::Given => "given",
        })
    }
}

/// Positive centralities sorted in decreasing order.
///
/// `perm[k]` is the original node index of the `k`-th largest value. Ties
/// are ordered by ascending original index.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector {
    values: Vec<f64>,
    perm: Vec<usize>,
    kind: CentralityKind,
}

impl CentralityVector {
    /// Sorts `values` (given in node order) and records the permutation.
    pub fn from_unsorted(values: &[f64], kind: CentralityKind) -> Result<Self, CentralityError> {
        if values.is_empty() {
            return Err(CentralityError::Empty);
        }
        for (index, &value) in values.iter().enumerate() {
            if value == 0.0 && kind != CentralityKind::Given {
                return Err(CentralityError::ZeroCentrality { index, kind });
            }
            if !(value.is_finite() && value > 0.0) {
                return Err(CentralityError::InvalidValue { index, value });
            }
        }
        let mut perm: Vec<usize> = (0..values.len()).collect();
        perm.sort_by(|&a, &b| match values[b].total_cmp(&values[a]) {
            Ordering::Equal => a.cmp(&b),
            ord => ord,
        });
        let sorted = perm.iter().map(|&i| values[i]).collect();
        Ok(Self { values: sorted, perm, kind })
    }

    /// Values in decreasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn kind(&self) -> CentralityKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `y_1`, the largest centrality.
    pub fn max(&self) -> f64 {
        self.values[0]
    }

    /// `y_n`, the smallest centrality.
    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    /// Scatters a vector indexed in sorted order back to node order.
    pub fn unsort(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sorted.len()];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = sorted[k];
        }
        out
    }

    /// Values in original node order.
    pub fn original_order(&self) -> Vec<f64> {
        self.unsort(&self.values)
    }
}

/// Column norms `ℓ_i = sqrt((L'L)_ii)` in node order.
pub fn ell_values(op: &InfluenceOperator) -> Vec<f64> {
    op.l().column_iter().map(|c| c.norm()).collect()
}

/// Bonacich centrality `v_i = n^{-1} Σ_j L_ji` in node order.
pub fn bonacich_values(op: &InfluenceOperator) -> Vec<f64> {
    let n = op.n() as f64;
    op.l().column_iter().map(|c| c.sum() / n).collect()
}

pub fn ell_centrality(op: &InfluenceOperator) -> Result<CentralityVector, CentralityError> {
    CentralityVector::from_unsorted(&ell_values(op), CentralityKind::Ell)
}

pub fn bonacich_centrality(op: &InfluenceOperator) -> Result<CentralityVector, CentralityError> {
    CentralityVector::from_unsorted(&bonacich_values(op), CentralityKind::Bonacich)
}

/// Centralities of the center and of a leaf of a degree-normalized star.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarCentralities {
    pub v_center: f64,
    pub v_leaf: f64,
    pub ell_center: f64,
    pub ell_leaf: f64,
}

impl StarCentralities {
    /// `‖v‖` over the whole star.
    pub fn v_norm(&self, n_leaves: usize) -> f64 {
        (self.v_center.powi(2) + n_leaves as f64 * self.v_leaf.powi(2)).sqrt()
    }

    pub fn ell_norm(&self, n_leaves: usize) -> f64 {
        (self.ell_center.powi(2) + n_leaves as f64 * self.ell_leaf.powi(2)).sqrt()
    }
}

/// Closed forms for `v` and `ℓ` on the star with `n_leaves` leaves, for the
/// production model with `P_ij = A_ij / d_i`.
///
/// The node count entering the formulas is the total `n_leaves + 1`; the
/// leaf-count reading disagrees with the numerical Leontief matrix already
/// in the third digit.
pub fn star_closed_forms(n_leaves: usize, beta: f64) -> Result<StarCentralities, CentralityError> {
    if n_leaves < 2 {
        return Err(CentralityError::TooFewLeaves(n_leaves));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(CentralityError::BetaOutOfRange(beta));
    }
    let n = (n_leaves + 1) as f64;
    let b = beta;
    let b2 = b * b;
    let v_center = (1.0 + b * (n - 1.0)) / (n * (1.0 + b));
    let v_leaf = (b + (n - 1.0)) / (n * (n - 1.0) * (1.0 + b));
    let ell_center = ((1.0 + b2 * (n - 1.0)) / (1.0 + b).powi(2)).sqrt();
    let leaf_num = b2 + (n - 1.0) * (2.0 * (2.0 * b2 - b2 * b2) + n * (1.0 - b2).powi(2) - 1.0);
    let ell_leaf = (leaf_num / ((n - 1.0).powi(2) * (1.0 + b).powi(2))).sqrt();
    Ok(StarCentralities { v_center, v_leaf, ell_center, ell_leaf })
}

/// Large-star constant `γ` in `‖ℓ‖ / ℓ_leaf ~ γ sqrt(n)`, obtained from the
/// limits `ℓ_center² ~ β² n / (1 + β)²` and `ℓ_leaf → 1 - β` of the closed
/// forms above: `γ = sqrt(1 - β² + β⁴) / (1 - β²)`.
pub fn star_ell_threshold_constant(beta: f64) -> f64 {
    let b2 = beta * beta;
    (1.0 - b2 + b2 * b2).sqrt() / (1.0 - b2)
}
