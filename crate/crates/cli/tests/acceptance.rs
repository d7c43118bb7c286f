//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (`cargo test --test acceptance -- --nocapture` to watch).
//! Tolerances are fixed here; seeds make every number reproducible.
//!
//! The Monte Carlo criteria run at desk scale (n = 300, p2 = 400, 300 reps,
//! B = 200 unless stated). Expect a couple of hours on two cores.

use maxeffect::calibration::{self, AnchorEstimates, AnchorSource, SimultaneousMode};
use maxeffect::data::{DataSet, InterceptPolicy, ModelDesign, PenaltyScheme, StandardizePolicy};
use maxeffect::debiased::NodewiseLambda;
use maxeffect::lasso::{self, ColMatrix, FitOptions, GridSelection};
use maxeffect::linalg;
use maxeffect::overlap::{self, BackgroundPolicy};
use maxeffect::pipeline::{self, InferenceConfig, PipelineMethod, RChoice};
use maxeffect::rng;
use maxeffect::rsplit::RSplitConfig;
use maxeffect::sim::{self, default_lambda_for, default_r_for, MonteCarloConfig, ScenarioSpec, SimMethod};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use std::path::Path;
use std::process::Command;

fn report(id: &str, pass: bool, details: &str) {
    println!(
        "ACCEPTANCE {id}: {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} failed: {details}");
}

fn table1_config(design: sim::DesignKind, b1: usize) -> InferenceConfig {
    InferenceConfig {
        b: 200,
        r: RChoice::Fixed(default_r_for(design)),
        lambda: default_lambda_for(design),
        rsplit: RSplitConfig {
            splits: b1,
            ..RSplitConfig::default()
        },
        ..InferenceConfig::default()
    }
}

/// FISTA with a power-iteration step bound; independent of the coordinate
/// descent path under test.
fn fista(d: &ColMatrix, y: &[f64], lambda: f64, w: &[f64], iters: usize) -> Vec<f64> {
    let n = d.nrows();
    let m = d.ncols();
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
    let mut mom = theta.clone();
    let mut t_k = 1.0f64;
    for _ in 0..iters {
        let pred = d.predict(&mom);
        let mut next = vec![0.0f64; m];
        for j in 0..m {
            let col = d.col(j);
            let mut g = 0.0;
            for i in 0..n {
                g += col[i] * (pred[i] - y[i]);
            }
            g /= n as f64;
            let z = mom[j] - step * g;
            let thr = step * lambda * w[j];
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
            mom[j] = next[j] + (t_k - 1.0) / t_next * (next[j] - theta[j]);
        }
        theta = next;
        t_k = t_next;
    }
    theta
}

#[test]
fn c01_solver_matches_an_independent_convex_oracle() {
    let start = std::time::Instant::now();
    let mut worst_gap = 0.0f64;
    let mut worst_kkt = 0.0f64;
    for seed in 0..100u64 {
        let mut picker = rng::derived_rng(seed, rng::stream::GENERATE, 31_001);
        let n = 20 + (picker.random::<u32>() % 31) as usize;
        let m = 5 + (picker.random::<u32>() % 26) as usize;
        let normal = rand_distr::StandardNormal;
        let x = Array2::from_shape_fn((n, m), |_| {
            let v: f64 = normal.sample(&mut picker);
            v
        });
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let noise: f64 = normal.sample(&mut picker);
                x[[i, 0]] * 0.9 - x[[i, 1 % m]] * 0.4 + 0.5 * noise
            })
            .collect();
        let d = ColMatrix::from_array(x.view());
        let mut w = vec![1.0; m];
        w[0] = 0.0;
        let lmax = lasso::lambda_max(&d, &y, &w).unwrap();
        let lambda = lmax * (0.05 + 0.5 * picker.random::<f64>());
        let fit = lasso::fit_lasso(&d, &y, lambda, &w, &FitOptions::default(), None).unwrap();
        worst_kkt = worst_kkt.max(fit.kkt_violation);
        let oracle = fista(&d, &y, lambda, &w, 20_000);
        let obj_fit = lasso::objective(&d, &y, &w, lambda, fit.coefs.as_slice().unwrap());
        let obj_oracle = lasso::objective(&d, &y, &w, lambda, &oracle);
        worst_gap = worst_gap.max(obj_fit - obj_oracle);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_gap <= 1e-7 && worst_kkt <= 1e-6 && elapsed < 60.0;
    report(
        "C1 solver-vs-oracle",
        pass,
        &format!("max objective gap {worst_gap:.2e}, max KKT {worst_kkt:.2e}, {elapsed:.1}s"),
    );
}

#[test]
fn c02_frisch_waugh_identity() {
    let start = std::time::Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut picker = rng::derived_rng(seed, rng::stream::GENERATE, 31_002);
        let n = 40 + (picker.random::<u32>() % 21) as usize;
        let p1 = 1 + (picker.random::<u32>() % 3) as usize;
        let p2 = 2 + (picker.random::<u32>() % 6) as usize;
        let normal = rand_distr::StandardNormal;
        let z = Array2::from_shape_fn((n, p1), |_| {
            let v: f64 = normal.sample(&mut picker);
            v
        });
        let x = Array2::from_shape_fn((n, p2), |_| {
            let v: f64 = normal.sample(&mut picker);
            v
        });
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            let e: f64 = normal.sample(&mut picker);
            y[i] = 0.4 + 0.8 * z[[i, 0]] + 0.5 * x[[i, 0]] + 0.7 * e;
        }
        let data = DataSet::new(
            y,
            z,
            x,
            "y".into(),
            (0..p1).map(|j| format!("z{j}")).collect(),
            (0..p2).map(|j| format!("x{j}")).collect(),
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap();
        let design = ModelDesign::build(&data, StandardizePolicy::CenterScale, PenaltyScheme::All);
        let d = ColMatrix::from_array(design.matrix.view());
        let fit = lasso::fit_lasso(
            &d,
            data.y.as_slice().unwrap(),
            0.0,
            design.weights.as_slice().unwrap(),
            &FitOptions::default(),
            None,
        )
        .unwrap();
        let proj = maxeffect::debiased::nodewise_residualize(
            &design,
            &NodewiseLambda::Zero,
            &FitOptions::default(),
            seed,
        )
        .unwrap();
        let est = maxeffect::debiased::debias(&fit, &proj, &design).unwrap();
        let ols = linalg::ols(design.matrix.view(), data.y.view(), 1e-12).unwrap();
        for j in 0..p1 {
            worst = worst.max((est.b_hat[j] - ols[design.layout.z_index(j)]).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-8 && elapsed < 60.0;
    report(
        "C2 frisch-waugh",
        pass,
        &format!("max coordinate gap {worst:.2e}, {elapsed:.1}s"),
    );
}

#[test]
fn c03_selection_bias_demonstration_on_the_small_design() {
    let spec = ScenarioSpec::example1();
    let cfg = MonteCarloConfig {
        reps: 1000,
        methods: vec![SimMethod::OraclePlugin, SimMethod::CalibratedDebiased],
        inference: InferenceConfig {
            b: 200,
            r: RChoice::Fixed(default_r_for(spec.design)),
            lambda: default_lambda_for(spec.design),
            ..InferenceConfig::default()
        },
        confidence: 0.95,
        seed: 3003,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg).unwrap();
    let oracle = table.row(SimMethod::OraclePlugin).unwrap();
    let cal = table.row(SimMethod::CalibratedDebiased).unwrap();
    let oracle_se = oracle.sqrt_n_bias_se.unwrap();
    let pass = oracle.sqrt_n_bias > 5.0 * oracle_se
        && cal.sqrt_n_bias.abs() <= oracle.sqrt_n_bias / 3.0;
    report(
        "C3 selection-bias-demo",
        pass,
        &format!(
            "oracle sqrt-n bias {:.3} ({:.1} MC SEs above zero); calibrated {:.3} (limit {:.3})",
            oracle.sqrt_n_bias,
            oracle.sqrt_n_bias / oracle_se,
            cal.sqrt_n_bias,
            oracle.sqrt_n_bias / 3.0
        ),
    );
}

#[test]
fn c04_and_c08_spurious_binary_coverage_and_conservatism() {
    // One paired run serves both criteria: per repetition the three methods
    // share the estimator run, so the bound comparison is exact.
    let reps = 300usize;
    let spec = ScenarioSpec::table1(true, true, 2);
    let cfg = table1_config(spec.design, 500);
    let results: Vec<Result<(bool, bool, bool, bool), String>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rep_spec = spec.clone();
            rep_spec.seed = rng::derive_seed(3004, rng::stream::MC_REP, rep as u64);
            let (data, truth) = sim::generate(&rep_spec).map_err(|e| e.to_string())?;
            let mut icfg = cfg.clone();
            icfg.method = PipelineMethod::Debiased;
            let out = pipeline::run_estimator(&data, &icfg, rep_spec.seed).map_err(|e| e.to_string())?;
            let r = default_r_for(rep_spec.design);
            let cal = calibration::infer_max(
                out.estimates.view(),
                out.replicates.view(),
                &out.anchor,
                data.n(),
                r,
            )
            .map_err(|e| e.to_string())?;
            let naive =
                calibration::naive_inference(out.estimates.view(), out.se.view()).map_err(|e| e.to_string())?;
            let simu = calibration::simultaneous_inference(
                out.estimates.view(),
                out.replicates.view(),
                out.anchor.anchor.view(),
                Some(out.se.view()),
                SimultaneousMode::Raw,
            )
            .map_err(|e| e.to_string())?;
            let cal_lower = cal.lower_bound(0.95);
            let sim_lower = simu.lower_bound(0.95);
            Ok((
                cal_lower <= truth.beta_max,
                naive.lower_bound(0.95) <= truth.beta_max,
                sim_lower <= truth.beta_max,
                sim_lower <= cal_lower,
            ))
        })
        .collect();
    let ok: Vec<_> = results.into_iter().collect::<Result<Vec<_>, _>>().unwrap();
    let n = ok.len() as f64;
    let cal_cov = ok.iter().filter(|r| r.0).count() as f64 / n;
    let naive_cov = ok.iter().filter(|r| r.1).count() as f64 / n;
    let sim_cov = ok.iter().filter(|r| r.2).count() as f64 / n;
    let sim_below = ok.iter().filter(|r| r.3).count() as f64 / n;

    let pass4 = (0.91..=0.99).contains(&cal_cov) && naive_cov <= 0.90;
    report(
        "C4 spurious-binary-coverage",
        pass4,
        &format!("calibrated {cal_cov:.3} in [0.91, 0.99]; naive {naive_cov:.3} <= 0.90"),
    );
    let pass8 = sim_cov >= cal_cov - 0.01 && sim_below >= 0.85;
    report(
        "C8 conservatism-ordering",
        pass8,
        &format!(
            "simultaneous coverage {sim_cov:.3} vs calibrated {cal_cov:.3}; bound below calibrated in {:.1}% of reps",
            100.0 * sim_below
        ),
    );
}

#[test]
fn c05_heterogeneous_binary_coverage_and_bias() {
    let spec = ScenarioSpec::table1(true, false, 2);
    let cfg = MonteCarloConfig {
        reps: 300,
        methods: vec![SimMethod::CalibratedDebiased],
        inference: table1_config(spec.design, 500),
        confidence: 0.95,
        seed: 3005,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg).unwrap();
    let cal = table.row(SimMethod::CalibratedDebiased).unwrap();
    let pass = (0.91..=0.99).contains(&cal.coverage_max)
        && (-0.4..=0.4).contains(&cal.sqrt_n_bias);
    report(
        "C5 heterogeneous-binary",
        pass,
        &format!(
            "calibrated coverage {:.3} in [0.91, 0.99]; sqrt-n bias {:.3} in [-0.4, 0.4]",
            cal.coverage_max, cal.sqrt_n_bias
        ),
    );
}

#[test]
fn c06_naive_failure_grows_with_subgroup_count() {
    let spec = ScenarioSpec::table1(true, true, 20);
    let cfg = MonteCarloConfig {
        reps: 300,
        methods: vec![SimMethod::CalibratedDebiased, SimMethod::NaiveDebiased],
        inference: table1_config(spec.design, 500),
        confidence: 0.95,
        seed: 3006,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg).unwrap();
    let cal = table.row(SimMethod::CalibratedDebiased).unwrap();
    let naive = table.row(SimMethod::NaiveDebiased).unwrap();
    let pass = naive.coverage_max <= 0.60 && cal.coverage_max >= 0.88 && naive.sqrt_n_bias >= 1.5;
    report(
        "C6 p1-scaling",
        pass,
        &format!(
            "naive coverage {:.3} <= 0.60; calibrated {:.3} >= 0.88; naive sqrt-n bias {:.2} >= 1.5",
            naive.coverage_max, cal.coverage_max, naive.sqrt_n_bias
        ),
    );
}

#[test]
fn c07_rsplit_pipeline_coverage_and_bias() {
    let spec = ScenarioSpec::table1(false, true, 2);
    let cfg = MonteCarloConfig {
        reps: 300,
        methods: vec![SimMethod::CalibratedRsplit],
        inference: table1_config(spec.design, 500),
        confidence: 0.95,
        seed: 3007,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg).unwrap();
    let cal = table.row(SimMethod::CalibratedRsplit).unwrap();
    let pass = (0.90..=0.99).contains(&cal.coverage_max) && cal.sqrt_n_bias.abs() <= 0.4;
    report(
        "C7 rsplit-pipeline",
        pass,
        &format!(
            "calibrated coverage {:.3} in [0.90, 0.99]; |sqrt-n bias| {:.3} <= 0.4 ({} of {} splits kept on average)",
            cal.coverage_max,
            cal.sqrt_n_bias.abs(),
            cal.reps_used,
            cfg.reps
        ),
    );
}

#[test]
fn c09_type_i_error_of_both_pipelines() {
    let spec = ScenarioSpec::power_continuous(0.0, 2);
    let cfg = MonteCarloConfig {
        reps: 300,
        methods: vec![SimMethod::CalibratedDebiased, SimMethod::CalibratedRsplit],
        inference: InferenceConfig {
            b: 200,
            r: RChoice::Fixed(default_r_for(spec.design)),
            lambda: default_lambda_for(spec.design),
            rsplit: RSplitConfig {
                splits: 500,
                ..RSplitConfig::default()
            },
            ..InferenceConfig::default()
        },
        confidence: 0.95,
        seed: 3009,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg).unwrap();
    let deb = table.row(SimMethod::CalibratedDebiased).unwrap();
    let rs = table.row(SimMethod::CalibratedRsplit).unwrap();
    let pass = deb.rejection_rate <= 0.08 && rs.rejection_rate <= 0.08;
    report(
        "C9 type-i-error",
        pass,
        &format!(
            "rejection at zero effect: debiased {:.3}, rsplit {:.3} (limit 0.08)",
            deb.rejection_rate, rs.rejection_rate
        ),
    );
}

#[test]
fn c10_power_ordering_at_a_mid_grid_effect() {
    let spec = ScenarioSpec::power_continuous(0.3, 2);
    let cfg = MonteCarloConfig {
        reps: 300,
        methods: vec![SimMethod::CalibratedDebiased, SimMethod::CalibratedRsplit],
        inference: InferenceConfig {
            b: 200,
            r: RChoice::Fixed(default_r_for(spec.design)),
            lambda: default_lambda_for(spec.design),
            rsplit: RSplitConfig {
                splits: 500,
                ..RSplitConfig::default()
            },
            ..InferenceConfig::default()
        },
        confidence: 0.95,
        seed: 3010,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg).unwrap();
    let deb = table.row(SimMethod::CalibratedDebiased).unwrap();
    let rs = table.row(SimMethod::CalibratedRsplit).unwrap();
    let pass = rs.rejection_rate >= deb.rejection_rate - 0.02;
    report(
        "C10 power-ordering",
        pass,
        &format!(
            "rejection at effect 0.3: rsplit {:.3} vs debiased {:.3} (allowed slack 0.02)",
            rs.rejection_rate, deb.rejection_rate
        ),
    );
}

/// Overlapping-subgroup synthetic: four overlapping groups (two binary
/// traits and their complements) over four atoms.
fn overlap_membership(n: usize, rng: &mut impl Rng) -> (Array2<f64>, Vec<usize>) {
    let mut m = Array2::<f64>::zeros((n, 4));
    let mut cell = Vec::with_capacity(n);
    for i in 0..n {
        let a = usize::from(rng.random::<bool>());
        let b = usize::from(rng.random::<bool>());
        m[[i, 0]] = f64::from(a == 1);
        m[[i, 1]] = f64::from(a == 0);
        m[[i, 2]] = f64::from(b == 1);
        m[[i, 3]] = f64::from(b == 0);
        cell.push(2 * a + b);
    }
    (m, cell)
}

#[test]
fn c11_overlap_exactness_and_noisy_coverage() {
    // Exactness: noiseless data, zero penalties, complete separation.
    let n = 200;
    let mut r = rng::derived_rng(3011, rng::stream::GENERATE, 0);
    let (membership, _) = overlap_membership(n, &mut r);
    let atoms = overlap::atomize(membership.view(), BackgroundPolicy::Reject).unwrap();
    let a = overlap::build_a_from_sample(membership.view(), &atoms).unwrap();
    let theta = Array1::from_vec(vec![0.8, -0.2, 0.4, 0.1]);
    let treatment = Array1::from_shape_fn(n, |_| f64::from(r.random::<bool>()));
    let z = atoms.interaction_matrix(treatment.view());
    let normal = rand_distr::StandardNormal;
    let x = Array2::from_shape_fn((n, 6), |_| {
        let v: f64 = normal.sample(&mut r);
        v
    });
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut v = 0.5 + 0.9 * x[[i, 0]];
        for j in 0..4 {
            v += z[[i, j]] * theta[j];
        }
        y[i] = v;
    }
    let data = DataSet::new(
        y,
        z,
        x,
        "y".into(),
        (0..4).map(|j| format!("atom{j}")).collect(),
        (0..6).map(|j| format!("x{j}")).collect(),
        InterceptPolicy::IncludeUnpenalized,
    )
    .unwrap();
    let design = ModelDesign::build(&data, StandardizePolicy::CenterScale, PenaltyScheme::All);
    let d = ColMatrix::from_array(design.matrix.view());
    let fit = lasso::fit_lasso(
        &d,
        data.y.as_slice().unwrap(),
        0.0,
        design.weights.as_slice().unwrap(),
        &FitOptions::default(),
        None,
    )
    .unwrap();
    let theta_hat =
        Array1::from_iter((0..4).map(|j| fit.coefs[design.layout.z_index(j)]));
    let reps = Array2::zeros((1, 4));
    let (beta_hat, _, _) = overlap::transform_to_original(
        theta_hat.view(),
        reps.view(),
        theta_hat.view(),
        a.view(),
    )
    .unwrap();
    // Counting oracle: the per-subgroup effect is the within-group average
    // of its members' atom effects.
    let mut beta_direct = vec![0.0f64; 4];
    for k in 0..4 {
        let members: Vec<usize> = (0..n).filter(|&i| membership[[i, k]] == 1.0).collect();
        let sum: f64 = members.iter().map(|&i| theta[atoms.labels[i]]).sum();
        beta_direct[k] = sum / members.len() as f64;
    }
    let exact_gap = beta_hat
        .iter()
        .zip(beta_direct.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);

    // Noisy end-to-end coverage on the original-subgroup scale.
    let reps_mc = 200usize;
    let covered: Vec<Result<bool, String>> = (0..reps_mc)
        .into_par_iter()
        .map(|rep| {
            let seed = rng::derive_seed(3011, rng::stream::MC_REP, 1000 + rep as u64);
            let mut r = rng::derived_rng(seed, rng::stream::GENERATE, 1);
            let n = 300;
            let (membership, _) = overlap_membership(n, &mut r);
            let atoms =
                overlap::atomize(membership.view(), BackgroundPolicy::Reject).map_err(|e| e.to_string())?;
            let a = overlap::build_a_from_sample(membership.view(), &atoms).map_err(|e| e.to_string())?;
            let treatment = Array1::from_shape_fn(n, |_| f64::from(r.random::<bool>()));
            let z = atoms.interaction_matrix(treatment.view());
            let normal = rand_distr::StandardNormal;
            let p2 = 100;
            let x = Array2::from_shape_fn((n, p2), |_| {
                let v: f64 = normal.sample(&mut r);
                v
            });
            // Spurious atoms: every subgroup effect is zero.
            let mut y = Array1::<f64>::zeros(n);
            for i in 0..n {
                let e: f64 = normal.sample(&mut r);
                y[i] = 0.5 + 1.0 * x[[i, 0]] + 0.8 * x[[i, 1]] + e;
            }
            let data = DataSet::new(
                y,
                z,
                x,
                "y".into(),
                (0..atoms.n_atoms()).map(|j| format!("atom{j}")).collect(),
                (0..p2).map(|j| format!("x{j}")).collect(),
                InterceptPolicy::IncludeUnpenalized,
            )
            .map_err(|e| e.to_string())?;
            let cfg = InferenceConfig {
                method: PipelineMethod::Debiased,
                b: 200,
                r: RChoice::Fixed(0.4),
                lambda: GridSelection::Lambda0,
                ..InferenceConfig::default()
            };
            let out = pipeline::run_estimator(&data, &cfg, seed).map_err(|e| e.to_string())?;
            let (est, reps_t, anchor_vec) = overlap::transform_to_original(
                out.estimates.view(),
                out.replicates.view(),
                out.anchor.anchor.view(),
                a.view(),
            )
            .map_err(|e| e.to_string())?;
            let anchor =
                AnchorEstimates::new(anchor_vec, AnchorSource::LassoAnchor).map_err(|e| e.to_string())?;
            let inf = calibration::infer_max(est.view(), reps_t.view(), &anchor, n, 0.4)
                .map_err(|e| e.to_string())?;
            // True beta = A * 0 = 0.
            Ok(inf.lower_bound(0.95) <= 0.0)
        })
        .collect();
    let flags: Vec<bool> = covered.into_iter().collect::<Result<Vec<_>, _>>().unwrap();
    let coverage = flags.iter().filter(|&&c| c).count() as f64 / flags.len() as f64;

    let pass = exact_gap <= 1e-10 && (0.90..=0.99).contains(&coverage);
    report(
        "C11 overlap",
        pass,
        &format!("noiseless recovery gap {exact_gap:.2e}; noisy coverage {coverage:.3} in [0.90, 0.99]"),
    );
}

#[test]
fn c12_calibration_term_algebra() {
    let start = std::time::Instant::now();
    let anchor = AnchorEstimates::new(
        Array1::from_vec(vec![0.1, 0.9, -0.4, 0.9]),
        AnchorSource::LassoAnchor,
    )
    .unwrap();
    let c = calibration::calibration_terms(&anchor, 400, 0.2).unwrap();
    let nonneg = c.iter().all(|&v| v >= 0.0);
    let zero_at_argmax = c[1] == 0.0 && c[3] == 0.0;
    let near_half = calibration::calibration_terms(&anchor, 400, 0.5 - 1e-9).unwrap();
    let vanishing = near_half
        .iter()
        .all(|&v| v <= 1.3 * (1.0 - 400.0f64.powf(-1e-9)) + 1e-15);
    // p1 = 1: the modified statistic is exactly the centered replicate.
    let single = AnchorEstimates::new(Array1::from_vec(vec![0.7]), AnchorSource::LassoAnchor).unwrap();
    let c1 = calibration::calibration_terms(&single, 400, 0.2).unwrap();
    let reps = Array2::from_shape_vec((3, 1), vec![0.5, 0.7, 1.0]).unwrap();
    let t = calibration::modified_max_replicates(reps.view(), c1.view(), 0.7).unwrap();
    let reduces = (t[0] - (-0.2)).abs() < 1e-15
        && t[1].abs() < 1e-15
        && (t[2] - 0.3).abs() < 1e-15;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = nonneg && zero_at_argmax && vanishing && reduces && elapsed < 1.0;
    report(
        "C12 calibration-algebra",
        pass,
        &format!(
            "nonneg {nonneg}, argmax zero {zero_at_argmax}, vanishing {vanishing}, p1=1 reduction {reduces}, {elapsed:.3}s"
        ),
    );
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maxeffect"))
}

fn hash_dir_outputs(dir: &Path) -> Vec<(String, u64)> {
    let mut entries: Vec<(String, u64)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            let bytes = std::fs::read(e.path()).unwrap();
            let mut h = 0xcbf29ce484222325u64;
            for b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
            (name, h)
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn c13_every_command_is_deterministic_across_workers() {
    let work = tempfile::tempdir().unwrap();
    let data_dir = work.path().join("data");
    std::fs::create_dir_all(&data_dir).unwrap();
    // Shared input for fit/tune.
    let status = bin()
        .args([
            "simulate",
            "--preset",
            "table1-binary-spurious-p2",
            "--n",
            "80",
            "--p2",
            "20",
            "--reps",
            "2",
            "--B",
            "12",
            "--B1",
            "10",
            "--B2",
            "12",
            "--methods",
            "naive-debiased",
            "--seed",
            "77",
            "--emit-data",
            "--out",
            data_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let input = data_dir.join("data_table1-binary-spurious-p2_seed77.csv");

    let run_all = |out: &Path, workers: &str| {
        let commands: Vec<Vec<String>> = vec![
            vec![
                "simulate".into(),
                "--preset".into(),
                "table1-binary-spurious-p2".into(),
                "--n".into(),
                "80".into(),
                "--p2".into(),
                "20".into(),
                "--reps".into(),
                "3".into(),
                "--B".into(),
                "15".into(),
                "--B1".into(),
                "10".into(),
                "--B2".into(),
                "15".into(),
                "--seed".into(),
                "7".into(),
                "--emit-data".into(),
            ],
            vec![
                "fit".into(),
                "--input".into(),
                input.display().to_string(),
                "--schema".into(),
                "response=y;subgroups=z1,z2;covariates=rest".into(),
                "--B".into(),
                "30".into(),
                "--r".into(),
                "0.2".into(),
                "--seed".into(),
                "5".into(),
                "--baselines".into(),
            ],
            vec![
                "tune".into(),
                "--input".into(),
                input.display().to_string(),
                "--schema".into(),
                "response=y;subgroups=z1,z2;covariates=rest".into(),
                "--candidates".into(),
                "0.1,0.3".into(),
                "--v".into(),
                "2".into(),
                "--b-inner".into(),
                "8".into(),
                "--seed".into(),
                "5".into(),
            ],
            vec![
                "power".into(),
                "--effects".into(),
                "0,0.5".into(),
                "--reps".into(),
                "2".into(),
                "--B".into(),
                "10".into(),
                "--B1".into(),
                "8".into(),
                "--B2".into(),
                "10".into(),
                "--methods".into(),
                "calibrated-debiased".into(),
                "--seed".into(),
                "5".into(),
            ],
        ];
        for args in commands {
            let mut full = args.clone();
            full.extend([
                "--workers".to_string(),
                workers.to_string(),
                "--out".to_string(),
                out.display().to_string(),
            ]);
            let output = bin().args(&full).output().unwrap();
            assert!(
                output.status.success(),
                "{:?} failed: {}",
                args[0],
                String::from_utf8_lossy(&output.stderr)
            );
        }
    };

    let d1 = work.path().join("w1");
    let d2 = work.path().join("w1b");
    let d3 = work.path().join("w3");
    for d in [&d1, &d2, &d3] {
        std::fs::create_dir_all(d).unwrap();
    }
    run_all(&d1, "1");
    run_all(&d2, "1");
    run_all(&d3, "3");

    // Reports embed the output directory; compare against the first run
    // after substituting the directory path out of the bytes.
    let canon = |dir: &Path| -> Vec<(String, String)> {
        hash_dir_outputs(dir)
            .into_iter()
            .map(|(name, _)| {
                let raw = std::fs::read_to_string(dir.join(&name)).unwrap();
                (name, raw.replace(&dir.display().to_string(), "OUT"))
            })
            .collect()
    };
    let a = canon(&d1);
    let b = canon(&d2);
    let c = canon(&d3);
    let pass = a == b && a == c && a.len() >= 8;
    report(
        "C13 determinism",
        pass,
        &format!(
            "{} artifacts identical across reruns and worker counts 1 vs 3",
            a.len()
        ),
    );
}
