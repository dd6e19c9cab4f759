mod common;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use robsel::estimator::{fit_penalized_from, FitTrace};
use robsel::{fit_penalized, select_f, Coefficients, Condition, Dataset, FitConfig, PenaltyFamily, PenaltySpec, PropensityWeights};

use common::*;

fn noiseless(n: usize, omega: &[f64], seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let x = Array2::from_shape_fn((n, omega.len()), |_| rng.random_range(-1.5..1.5));
    let y = x.dot(&Array1::from(omega.to_vec()));
    Dataset::from_raw(y, x).unwrap()
}

#[test]
fn noiseless_recovery() {
    let truth = [1.0, 2.0, 0.0];
    let data = noiseless(50, &truth, 11);
    let cfg = FitConfig::default().with_h(1.0).with_condition(Condition::NoCorrection);
    let w = PropensityWeights::unit(50);
    for (fam, f) in [
        (PenaltyFamily::Scad, 1e-3),
        (PenaltyFamily::Mcp, 1e-3),
        (PenaltyFamily::Atan, 1e-3),
        (PenaltyFamily::Lasso, 1e-4),
    ] {
        let r = fit_penalized(&data, &w, &PenaltySpec::new(fam, f), &cfg).unwrap();
        for (a, b) in r.omega_hat.as_slice().iter().zip(truth) {
            assert!((a - b).abs() < 1e-3, "{fam:?}: {:?}", r.omega_hat);
        }
        assert_eq!(r.active_set, vec![0, 1], "{fam:?}");
    }
}

#[test]
fn select_f_prefers_the_recovering_level() {
    let data = noiseless(50, &[1.0, 2.0, 0.0], 11);
    let mut cfg = FitConfig::default().with_h(1.0).with_condition(Condition::NoCorrection);
    cfg.hbic_grid = vec![1e-3, 1e4];
    let r = select_f(&data, &PropensityWeights::unit(50), &PenaltySpec::new(PenaltyFamily::Scad, 0.0), &cfg).unwrap();
    assert_eq!(r.f_selected, 1e-3);
    assert_eq!(r.active_set, vec![0, 1]);
    assert_eq!(r.hbic_path.len(), 2);
}

#[test]
fn select_f_breaks_ties_toward_larger_f() {
    let data = noiseless(30, &[1.0, -1.0], 3);
    let mut cfg = FitConfig::default();
    cfg.hbic_grid = vec![1e5, 1e3, 1e4];
    let r = select_f(&data, &PropensityWeights::unit(30), &PenaltySpec::new(PenaltyFamily::Lasso, 0.0), &cfg).unwrap();
    assert!(r.hbic_path.windows(2).all(|p| p[0].hbic == p[1].hbic));
    assert_eq!(r.f_selected, 1e5);
    assert!(r.active_set.is_empty());
}

#[test]
fn descent_is_monotone_on_random_instances() {
    for seed in 0..24 {
        let mut rng = rng(seed);
        let cond = CONDITIONS[seed as usize % 4];
        let fam = PenaltyFamily::ALL[(seed as usize / 4) % 4];
        let data = random_dataset(&mut rng, 20, 6, 0.5, true);
        let w = weights_for(&data, cond, &mut rng);
        let cfg = FitConfig::default().with_h(rng.random_range(0.5..5.0)).with_condition(cond);
        let pen = PenaltySpec::new(fam, rng.random_range(1e-3..0.1));
        let mut trace = FitTrace::default();
        fit_penalized_from(&data, &w, &pen, &cfg, &Coefficients::zeros(6), Some(&mut trace)).unwrap();
        assert!(
            trace.objective.windows(2).all(|p| p[1] <= p[0]),
            "seed {seed}: {:?}",
            trace.objective
        );
    }
}

#[test]
fn results_satisfy_their_invariants() {
    for seed in 0..16 {
        let mut rng = rng(100 + seed);
        let cond = CONDITIONS[seed as usize % 4];
        let data = random_dataset(&mut rng, 25, 8, 1.0, true);
        let w = weights_for(&data, cond, &mut rng);
        let cfg = FitConfig::default().with_h(2.0).with_condition(cond);
        let pen = PenaltySpec::new(PenaltyFamily::ALL[seed as usize % 4], 0.02);
        let r = fit_penalized(&data, &w, &pen, &cfg).unwrap();
        let support: Vec<usize> = (0..8).filter(|&k| r.omega_hat.as_slice()[k] != 0.0).collect();
        assert_eq!(r.active_set, support);
        for &v in r.omega_hat.as_slice() {
            assert!(v == 0.0 || v.abs() >= r.diagnostics.threshold);
        }
        if r.converged {
            assert!(r.diagnostics.final_grad_norm <= cfg.optimizer.grad_tol);
        }
        let expected = penalized(&data, &w, &pen, &cfg, r.omega_hat.as_slice());
        assert!((r.penalized_objective - expected).abs() <= 1e-9 * expected.abs().max(1.0), "seed {seed}: {} vs {expected}, fit {}", r.penalized_objective, r.objective);
        assert_eq!(r, fit_penalized(&data, &w, &pen, &cfg).unwrap());
    }
}

#[test]
fn column_permutation_permutes_the_estimate() {
    let mut rng = rng(7);
    let data = random_dataset(&mut rng, 40, 5, 0.3, false);
    let perm = [3usize, 0, 4, 1, 2];
    let (x, y, _) = data.complete_case();
    let permuted = Dataset::from_raw(y, x.select(Axis(1), &perm)).unwrap();
    let w = PropensityWeights::unit(40);
    let cfg = FitConfig::default().with_h(5.0).with_condition(Condition::ErrorOnly);
    for fam in PenaltyFamily::ALL {
        let pen = PenaltySpec::new(fam, 0.01);
        let a = fit_penalized(&data, &w, &pen, &cfg).unwrap();
        let b = fit_penalized(&permuted, &w, &pen, &cfg).unwrap();
        for (j, &k) in perm.iter().enumerate() {
            let (u, v) = (b.omega_hat.as_slice()[j], a.omega_hat.as_slice()[k]);
            assert!((u - v).abs() <= 1e-8 * v.abs().max(1.0), "{fam:?}: {u} vs {v}");
        }
    }
}

#[test]
fn fit_reaches_the_grid_minimum_in_two_dimensions() {
    for seed in 0..8 {
        let mut rng = rng(500 + seed);
        let cond = CONDITIONS[seed as usize % 4];
        let n = rng.random_range(6..=15);
        let data = random_dataset(&mut rng, n, 2, 0.5, cond.uses_ipw());
        let w = weights_for(&data, cond, &mut rng);
        let cfg = FitConfig::default().with_h(1.0).with_condition(cond);
        for fam in PenaltyFamily::ALL {
            let pen = PenaltySpec::new(fam, rng.random_range(0.005..0.1));
            let r = fit_penalized(&data, &w, &pen, &cfg).unwrap();
            let (grid, at) = grid_minimum(&data, &w, &pen, &cfg, 3.0, 200);
            assert!(
                r.penalized_objective <= grid + 1e-4,
                "seed {seed} {fam:?}: fit {} at {:?}, grid {grid} at {at:?}",
                r.penalized_objective,
                r.omega_hat
            );
        }
    }
}
