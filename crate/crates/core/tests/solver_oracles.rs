//! Independent convex-optimization oracles for the penalized solver.
//!
//! Two independent routes check the coordinate-descent implementation:
//! a projected-subgradient method run to many iterations and an accelerated
//! proximal-gradient (FISTA) solver. Both only share the objective function
//! with the implementation under test.

use maxeffect::lasso::{self, ColMatrix, FitOptions};
use maxeffect::rng;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::Distribution;

fn random_instance(seed: u64, n: usize, m: usize) -> (ColMatrix, Vec<f64>, Vec<f64>) {
    let mut r = rng::derived_rng(seed, rng::stream::GENERATE, 7_000);
    let normal = rand_distr::StandardNormal;
    let x = Array2::from_shape_fn((n, m), |_| {
        let v: f64 = normal.sample(&mut r);
        v
    });
    let beta = Array1::from_shape_fn(m, |j| {
        if j % 3 == 0 {
            let v: f64 = normal.sample(&mut r);
            v
        } else {
            0.0
        }
    });
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let noise: f64 = normal.sample(&mut r);
            x.row(i).dot(&beta) + 0.5 * noise
        })
        .collect();
    let mut weights = vec![1.0; m];
    if m > 2 {
        // Mix in a free coordinate and a reweighted one.
        weights[0] = 0.0;
        weights[1] = 1.7;
    }
    (ColMatrix::from_array(x.view()), y, weights)
}

/// Projected (proximal) subgradient descent with a diminishing step; slow
/// but independent of the coordinate-descent path.
fn subgradient_oracle(
    d: &ColMatrix,
    y: &[f64],
    lambda: f64,
    weights: &[f64],
    iterations: usize,
) -> Vec<f64> {
    let n = d.nrows();
    let m = d.ncols();
    let mut theta = vec![0.0f64; m];
    let mut best = theta.clone();
    let mut best_obj = lasso::objective(d, y, weights, lambda, &theta);
    // Step scale from the largest column norm.
    let lmax: f64 = (0..m)
        .map(|j| d.col_norm2(j) / n as f64)
        .fold(0.0, f64::max);
    let base_step = 1.0 / (lmax * m as f64);
    for t in 0..iterations {
        let pred = d.predict(&theta);
        let step = base_step / (1.0 + (t as f64).sqrt());
        let mut grad = vec![0.0f64; m];
        for j in 0..m {
            let col = d.col(j);
            let mut g = 0.0;
            for i in 0..n {
                g += col[i] * (pred[i] - y[i]);
            }
            g /= n as f64;
            let sub = if theta[j] != 0.0 {
                lambda * weights[j] * theta[j].signum()
            } else {
                // Subgradient choice that reduces the objective most.
                let v = -g;
                lambda * weights[j] * v.signum() * f64::from(v.abs() > lambda * weights[j])
            };
            grad[j] = g + sub;
        }
        for j in 0..m {
            theta[j] -= step * grad[j];
        }
        let obj = lasso::objective(d, y, weights, lambda, &theta);
        if obj < best_obj {
            best_obj = obj;
            best = theta.clone();
        }
    }
    best
}

/// FISTA with a fixed step from a power-iteration Lipschitz bound.
fn fista_oracle(
    d: &ColMatrix,
    y: &[f64],
    lambda: f64,
    weights: &[f64],
    iterations: usize,
) -> Vec<f64> {
    let n = d.nrows();
    let m = d.ncols();
    // Largest eigenvalue of D'D/n by power iteration.
    let mut v = vec![1.0f64; m];
    let mut lip = 1.0;
    for _ in 0..200 {
        let dv = d.predict(&v);
        let mut next = vec![0.0f64; m];
        for j in 0..m {
            let col = d.col(j);
            let mut s = 0.0;
            for i in 0..n {
                s += col[i] * dv[i];
            }
            next[j] = s / n as f64;
        }
        let norm: f64 = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        for j in 0..m {
            v[j] = next[j] / norm;
        }
        lip = norm;
    }
    let step = 1.0 / (lip * 1.01);
    let mut theta = vec![0.0f64; m];
    let mut momentum = theta.clone();
    let mut t_k = 1.0f64;
    for _ in 0..iterations {
        let pred = d.predict(&momentum);
        let mut next = vec![0.0f64; m];
        for j in 0..m {
            let col = d.col(j);
            let mut g = 0.0;
            for i in 0..n {
                g += col[i] * (pred[i] - y[i]);
            }
            g /= n as f64;
            let z = momentum[j] - step * g;
            let thr = step * lambda * weights[j];
            next[j] = if z > thr {
                z - thr
            } else if z < -thr {
                z + thr
            } else {
                0.0
            };
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        for j in 0..m {
            momentum[j] = next[j] + (t_k - 1.0) / t_next * (next[j] - theta[j]);
        }
        theta = next;
        t_k = t_next;
    }
    theta
}

#[test]
fn objective_matches_projected_subgradient_on_a_small_instance() {
    let (d, y, weights) = random_instance(1, 20, 8);
    let lambda = 0.05;
    let fit = lasso::fit_lasso(&d, &y, lambda, &weights, &FitOptions::default(), None).unwrap();
    let oracle = subgradient_oracle(&d, &y, lambda, &weights, 1_000_000);
    let obj_fit = lasso::objective(&d, &y, &weights, lambda, fit.coefs.as_slice().unwrap());
    let obj_oracle = lasso::objective(&d, &y, &weights, lambda, &oracle);
    assert!(
        obj_fit <= obj_oracle + 1e-7,
        "solver objective {obj_fit} worse than subgradient oracle {obj_oracle}"
    );
    assert!(
        (obj_fit - obj_oracle).abs() <= 1e-7,
        "objectives differ: {obj_fit} vs {obj_oracle}"
    );
}

#[test]
fn hundred_random_instances_match_fista_and_satisfy_kkt() {
    // Acceptance-grade property: 100 random instances, objective within
    // 1e-7 of an independent solver, KKT violations <= 1e-6.
    let start = std::time::Instant::now();
    for seed in 0..100u64 {
        let mut picker = rng::derived_rng(seed, rng::stream::GENERATE, 7_001);
        let n = 20 + (picker.random::<u32>() % 31) as usize; // 20..=50
        let m = 5 + (picker.random::<u32>() % 26) as usize; // 5..=30
        let (d, y, weights) = random_instance(seed + 100, n, m);
        let lmax = lasso::lambda_max(&d, &y, &weights).unwrap();
        let lambda = lmax * (0.05 + 0.5 * picker.random::<f64>());
        let fit = lasso::fit_lasso(&d, &y, lambda, &weights, &FitOptions::default(), None)
            .unwrap_or_else(|e| panic!("seed {seed} failed: {e}"));
        assert!(
            fit.kkt_violation <= 1e-6,
            "seed {seed}: kkt violation {}",
            fit.kkt_violation
        );
        let oracle = fista_oracle(&d, &y, lambda, &weights, 20_000);
        let obj_fit = lasso::objective(&d, &y, &weights, lambda, fit.coefs.as_slice().unwrap());
        let obj_oracle = lasso::objective(&d, &y, &weights, lambda, &oracle);
        assert!(
            obj_fit <= obj_oracle + 1e-7,
            "seed {seed}: solver {obj_fit} vs oracle {obj_oracle}"
        );
    }
    eprintln!("100 oracle comparisons in {:.1}s", start.elapsed().as_secs_f64());
    assert!(start.elapsed().as_secs() < 60, "oracle suite exceeded a minute");
}

#[test]
fn soft_threshold_equivalence_on_orthonormal_designs() {
    // Property: for orthonormal columns the solution is the soft threshold
    // of x_j'y/n coordinatewise.
    for seed in 0..10u64 {
        let n = 32;
        let m = 4;
        // Orthonormal columns scaled so x_j'x_j/n = 1: use Hadamard-like
        // sign patterns.
        let mut x = Array2::<f64>::zeros((n, m));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            x[[i, 1]] = if i % 2 == 0 { 1.0 } else { -1.0 };
            x[[i, 2]] = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            x[[i, 3]] = if (i / 4) % 2 == 0 { 1.0 } else { -1.0 };
        }
        let mut r = rng::derived_rng(seed, rng::stream::GENERATE, 7_002);
        let y: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let d = ColMatrix::from_array(x.view());
        let weights = vec![1.0, 0.5, 2.0, 1.0];
        let lambda = 0.11;
        let fit = lasso::fit_lasso(&d, &y, lambda, &weights, &FitOptions::default(), None).unwrap();
        for j in 0..m {
            let z: f64 = d.col(j).iter().zip(y.iter()).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            let t = lambda * weights[j];
            let expect = if z > t {
                z - t
            } else if z < -t {
                z + t
            } else {
                0.0
            };
            assert!(
                (fit.coefs[j] - expect).abs() <= 1e-8,
                "seed {seed} coord {j}: {} vs {expect}",
                fit.coefs[j]
            );
        }
    }
}
