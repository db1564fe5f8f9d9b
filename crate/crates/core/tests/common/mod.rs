#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysrisk::centrality::{CentralityKind, CentralityVector};
use sysrisk::model::{self, NetworkModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-stochastic matrix with roughly `density` of the off-diagonal entries
/// nonzero; every row keeps at least one entry.
pub fn random_stochastic(n: usize, density: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if rng.random::<f64>() < density {
                p[(i, j)] = rng.random::<f64>();
            }
        }
        let forced = rng.random_range(0..n);
        p[(i, forced)] += 0.1 + rng.random::<f64>();
        let sum = p.row(i).sum();
        p.row_mut(i).unscale_mut(sum);
    }
    p
}

/// Nonnegative weights with a strictly positive off-diagonal pattern.
pub fn random_weights(n: usize, density: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i != j && rng.random::<f64>() < density {
            rng.random::<f64>()
        } else {
            0.0
        }
    })
}

pub fn random_production(n: usize, rng: &mut impl Rng) -> NetworkModel {
    let beta = rng.random_range(0.05..0.95);
    let p = random_stochastic(n, 0.3, rng);
    model::build_production(beta, &p).expect("valid production model")
}

pub fn random_quadratic(n: usize, rng: &mut impl Rng) -> NetworkModel {
    let w = random_weights(n, 0.3, rng);
    let max_row = w.row_iter().map(|r| r.sum()).fold(0.0, f64::max).max(1e-3);
    let beta = rng.random_range(0.05..0.95) / max_row;
    model::build_quadratic(beta, &w).expect("valid quadratic model")
}

/// Coordination game where every node is anchored, so reachability holds.
pub fn random_coordination(n: usize, rng: &mut impl Rng) -> NetworkModel {
    let mut w = random_weights(n, 0.3, rng);
    for i in 0..n {
        if w.row(i).sum() == 0.0 {
            w[(i, (i + 1) % n)] = 1.0;
        }
    }
    let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
    model::build_coordination(&w, &rho).expect("valid coordination model")
}

pub fn random_model(n: usize, rng: &mut impl Rng) -> NetworkModel {
    match rng.random_range(0..3) {
        0 => random_production(n, rng),
        1 => random_quadratic(n, rng),
        _ => random_coordination(n, rng),
    }
}

pub fn given(values: &[f64]) -> CentralityVector {
    CentralityVector::from_unsorted(values, CentralityKind::Given).expect("positive centralities")
}

pub fn random_y(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> CentralityVector {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    given(&v)
}
