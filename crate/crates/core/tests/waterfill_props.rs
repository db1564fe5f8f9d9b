mod common;

use proptest::prelude::*;
use sysrisk::centrality::CentralityVector;
use sysrisk::oracle;
use sysrisk::waterfill::{self, Regime};

/// Positive centralities and a budget `C = sqrt(n) * (1 + t)`.
fn instance(max_n: usize) -> impl Strategy<Value = (CentralityVector, f64)> {
    (prop::collection::vec(0.01f64..10.0, 1..max_n), 0.0f64..3.0).prop_map(|(v, t)| {
        let c = (v.len() as f64).sqrt() * (1.0 + t);
        (common::given(&v), c)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn level_spends_the_budget((y, c) in instance(500)) {
        let sol = waterfill::solve(&y, c).unwrap();
        let f = waterfill::f_eval(&y, sol.lambda_star).unwrap();
        prop_assert!((f - c * c).abs() <= 1e-10 * c * c, "f = {f}, C² = {}", c * c);
        let spent: f64 = sol.q_star.iter().map(|q| q * q).sum();
        prop_assert!(spent <= c * c * (1.0 + 1e-12));
        prop_assert!(sol.q_star.iter().all(|&q| q >= 1.0));
    }

    #[test]
    fn kkt_certificate_holds((y, c) in instance(300)) {
        let sol = waterfill::solve(&y, c).unwrap();
        let cert = waterfill::kkt_verify(&y, &sol, 1e-9).unwrap();
        prop_assert!(cert.valid, "{} residual {}", cert.worst, cert.max_violation);
    }

    #[test]
    fn level_is_nonincreasing_in_budget((y, c) in instance(50), dc in 1e-9f64..5.0) {
        let a = waterfill::solve(&y, c).unwrap().lambda_star;
        let b = waterfill::solve(&y, c + dc).unwrap().lambda_star;
        prop_assert!(a >= b - 1e-12, "λ({c}) = {a} < λ({}) = {b}", c + dc);
    }

    #[test]
    fn regime_formulas((y, c) in instance(500)) {
        let sol = waterfill::solve(&y, c).unwrap();
        let n = y.len() as f64;
        let lam = sol.lambda_star;
        match sol.regime {
            Regime::Low => {
                let expect = y.max().powi(2) / (c * c - n + 1.0);
                prop_assert!((lam - expect).abs() <= 1e-12 * lam);
            }
            Regime::High => {
                let expect = y.norm().powi(2) / (c * c);
                prop_assert!((lam - expect).abs() <= 1e-12 * lam);
            }
            Regime::Intermediate => {}
        }
    }

    #[test]
    fn active_protection_is_proportional((y, c) in instance(100)) {
        let sol = waterfill::solve(&y, c).unwrap();
        let yo = y.original_order();
        let active: Vec<usize> = (0..yo.len()).filter(|&i| sol.q_star[i] > 1.0).collect();
        for &i in &active {
            for &j in &active {
                let lhs = sol.q_star[i] / sol.q_star[j];
                let rhs = yo[i] / yo[j];
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
        }
    }

    #[test]
    fn scale_equivariance((y, c) in instance(100), a in 0.01f64..100.0) {
        let scaled: Vec<f64> = y.original_order().iter().map(|v| v * a).collect();
        let ya = common::given(&scaled);
        let s1 = waterfill::solve(&y, c).unwrap();
        let s2 = waterfill::solve(&ya, c).unwrap();
        prop_assert_eq!(s1.k_active, s2.k_active);
        prop_assert!((s2.lambda_star - a * a * s1.lambda_star).abs() <= 1e-12 * s2.lambda_star);
        for (p, q) in s1.q_star.iter().zip(&s2.q_star) {
            prop_assert!((p - q).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn continuity_at_thresholds(v in prop::collection::vec(0.01f64..10.0, 2..60)) {
        let y = common::given(&v);
        let t = waterfill::thresholds(&y);
        let eps = 1e-6;
        for c in [t.low, t.high] {
            if c - eps < (v.len() as f64).sqrt() {
                continue;
            }
            let below = waterfill::solve(&y, c - eps).unwrap().lambda_star;
            let above = waterfill::solve(&y, c + eps).unwrap().lambda_star;
            // |dλ/dC| = 2λ / (C - Σ_{inactive} 1/C) ≤ 2λ C / (C² - n + 1)
            let n = v.len() as f64;
            let slope = 2.0 * below * c / (c * c - n + 1.0).max(1.0);
            prop_assert!((below - above).abs() <= 4.0 * slope * eps + 1e-12, "jump at C = {c}");
        }
    }

    #[test]
    fn worst_case_shock_attains_objective((y, c) in instance(100), skew in 0.0f64..1.0) {
        let sol = waterfill::solve(&y, c).unwrap();
        // an arbitrary feasible q, not only the optimum
        let q: Vec<f64> = sol.q_star.iter().enumerate().map(|(i, q)| q + skew * (i % 3) as f64).collect();
        let value = waterfill::objective_value(&y, &q).unwrap();
        let sigma = waterfill::worst_case_shock(&y, &q).unwrap();
        let yo = y.original_order();
        prop_assert!((sigma.iter().map(|s| s * s).sum::<f64>() - 1.0).abs() <= 1e-15);
        let attained: f64 = (0..yo.len()).map(|i| (sigma[i] * yo[i] / q[i]).powi(2)).sum();
        prop_assert!((attained - value).abs() <= 1e-15 * value.max(1.0), "{attained} vs {value}");
    }

    #[test]
    fn diffuse_never_beats_optimum((y, c) in instance(200)) {
        let sol = waterfill::solve(&y, c).unwrap();
        let diffuse = waterfill::diffuse_baseline(&y, c).unwrap();
        if diffuse.feasible {
            prop_assert!(diffuse.value >= sol.lambda_star * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The grid search never finds a feasible point below the solver.
    #[test]
    fn grid_oracle_agrees(v in prop::collection::vec(0.1f64..3.0, 2..=3), t in 0.0f64..2.0) {
        let y = common::given(&v);
        let c = (v.len() as f64).sqrt() * (1.0 + t);
        let r = oracle::brute_force_minmax(&y, c, 0.01).unwrap();
        prop_assert!(r.oracle_value >= r.solver_value * (1.0 - 1e-12));
        prop_assert!(r.gap() <= 0.05, "{r:?}");
    }
}
