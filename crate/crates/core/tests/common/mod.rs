#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use robsel::penalty::penalty_total;
use robsel::{Coefficients, Condition, Dataset, FitConfig, PenaltySpec, PropensityWeights};

pub const CONDITIONS: [Condition; 4] = Condition::ALL;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian design with `y = x w + noise`. With `missing`, the first column
/// is absent in roughly a third of the rows (never all of them).
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, d: usize, noise: f64, missing: bool) -> Dataset {
    let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = Array1::from_shape_fn(n, |i| {
        let s: f64 = (0..d).map(|k| x[[i, k]] * w[k]).sum();
        s + noise * rng.sample::<f64, _>(StandardNormal)
    });
    if !missing || d < 2 {
        return Dataset::from_raw(y, x).unwrap();
    }
    let mut complete: Vec<bool> = (0..n).map(|_| rng.random::<f64>() > 0.33).collect();
    complete[0] = true;
    Dataset::new(y, x, complete, &[0]).unwrap()
}

/// Random weights in (0.2, 1] for the rows of `data`.
pub fn random_weights<R: Rng>(rng: &mut R, n: usize) -> PropensityWeights {
    PropensityWeights::from_probs((0..n).map(|_| rng.random_range(0.2..=1.0)).collect()).unwrap()
}

pub fn weights_for(data: &Dataset, condition: Condition, rng: &mut impl Rng) -> PropensityWeights {
    if condition.uses_ipw() {
        random_weights(rng, data.nrows())
    } else {
        PropensityWeights::unit(data.nrows())
    }
}

/// The penalized objective minimized by the estimator: data fit plus the
/// summed penalty.
pub fn penalized(data: &Dataset, w: &PropensityWeights, pen: &PenaltySpec, cfg: &FitConfig, omega: &[f64]) -> f64 {
    let c = Coefficients::new(omega.to_vec()).unwrap();
    let fit = robsel::loss::weighted_objective(data, &c, cfg, w).unwrap();
    fit + penalty_total(pen, &c).unwrap()
}

/// Minimum of [`penalized`] over a `(steps+1)^2` grid on `[-half, half]^2`.
pub fn grid_minimum(
    data: &Dataset,
    w: &PropensityWeights,
    pen: &PenaltySpec,
    cfg: &FitConfig,
    half: f64,
    steps: usize,
) -> (f64, [f64; 2]) {
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for a in 0..=steps {
        for b in 0..=steps {
            let g = [
                -half + 2.0 * half * a as f64 / steps as f64,
                -half + 2.0 * half * b as f64 / steps as f64,
            ];
            let v = penalized(data, w, pen, cfg, &g);
            if v < best.0 {
                best = (v, g);
            }
        }
    }
    best
}

/// Central finite-difference gradient of the data-fit term.
pub fn fd_gradient(data: &Dataset, w: &PropensityWeights, cfg: &FitConfig, omega: &[f64], step: f64) -> Vec<f64> {
    let eval = |v: &[f64]| {
        robsel::loss::weighted_objective(data, &Coefficients::new(v.to_vec()).unwrap(), cfg, w).unwrap()
    };
    (0..omega.len())
        .map(|k| {
            let mut up = omega.to_vec();
            let mut dn = omega.to_vec();
            up[k] += step;
            dn[k] -= step;
            (eval(&up) - eval(&dn)) / (2.0 * step)
        })
        .collect()
}

/// Largest componentwise gap between `a` and `b`, relative to the largest
/// component of `b`.
pub fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
