//! Reduced-rep sanity probe of the headline Monte Carlo behavior. Run with
//! `cargo run --release --example probe -p maxeffect -- <which>`.

use maxeffect::pipeline::{InferenceConfig, RChoice};
use maxeffect::rsplit::RSplitConfig;
use maxeffect::sim::{self, default_lambda_for, MonteCarloConfig, ScenarioSpec, SimMethod};

fn probe_r() -> f64 {
    std::env::var("PROBE_R")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.1)
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "c4".into());
    let reps: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    match which.as_str() {
        "c4" => {
            let spec = ScenarioSpec::table1(true, true, 2);
            let cfg = MonteCarloConfig {
                reps,
                methods: vec![
                    SimMethod::CalibratedDebiased,
                    SimMethod::NaiveDebiased,
                    SimMethod::SimultaneousDebiased,
                ],
                inference: InferenceConfig {
                    b: 200,
                    r: RChoice::Fixed(probe_r()),
                    lambda: default_lambda_for(spec.design),
                    ..InferenceConfig::default()
                },
                confidence: 0.95,
                seed: 42,
                max_failure_fraction: 0.02,
            };
            let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
            print!("{}", t.to_tsv());
            eprintln!("wall: {:.1}s", t.wall_time_secs);
        }
        "c3" => {
            use maxeffect::debiased::NodewiseLambda;
            use maxeffect::lasso::GridSelection;
            let spec = ScenarioSpec::example1();
            let lambda = match std::env::var("PROBE_LAMBDA").as_deref() {
                Ok("1se") => GridSelection::OneSe,
                Ok("min") => GridSelection::MinCv,
                Ok("1.1se") => GridSelection::ScaledOneSe(1.1),
                _ => default_lambda_for(spec.design),
            };
            let nodewise = match std::env::var("PROBE_NODEWISE").as_deref() {
                Ok("min") => NodewiseLambda::CvMin { folds: 5 },
                _ => NodewiseLambda::CvOneSe { folds: 5 },
            };
            let cfg = MonteCarloConfig {
                reps,
                methods: vec![SimMethod::OraclePlugin, SimMethod::CalibratedDebiased],
                inference: InferenceConfig {
                    b: 200,
                    r: RChoice::Fixed(probe_r()),
                    lambda,
                    nodewise,
                    ..InferenceConfig::default()
                },
                confidence: 0.95,
                seed: 42,
                max_failure_fraction: 0.02,
            };
            let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
            print!("{}", t.to_tsv());
            eprintln!("wall: {:.1}s", t.wall_time_secs);
        }
        "c7" => {
            let spec = ScenarioSpec::table1(false, true, 2);
            let cfg = MonteCarloConfig {
                reps,
                methods: vec![SimMethod::CalibratedRsplit, SimMethod::NaiveRsplit],
                inference: InferenceConfig {
                    b: 200,
                    r: RChoice::Fixed(probe_r()),
                    rsplit: RSplitConfig {
                        splits: 500,
                        ..RSplitConfig::default()
                    },
                    ..InferenceConfig::default()
                },
                confidence: 0.95,
                seed: 42,
                max_failure_fraction: 0.02,
            };
            let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
            print!("{}", t.to_tsv());
            eprintln!("wall: {:.1}s", t.wall_time_secs);
        }
        "c9" => {
            let spec = ScenarioSpec::power_continuous(0.0, 2);
            for method in [SimMethod::CalibratedDebiased, SimMethod::CalibratedRsplit] {
                let cfg = MonteCarloConfig {
                    reps,
                    methods: vec![method],
                    inference: InferenceConfig {
                        b: 200,
                        r: RChoice::Fixed(probe_r()),
                        lambda: default_lambda_for(spec.design),
                        rsplit: RSplitConfig {
                            splits: 300,
                            ..RSplitConfig::default()
                        },
                        ..InferenceConfig::default()
                    },
                    confidence: 0.95,
                    seed: 42,
                    max_failure_fraction: 0.02,
                };
                let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
                print!("{}", t.to_tsv());
                eprintln!("wall: {:.1}s", t.wall_time_secs);
            }
        }
        "c5" => {
            let spec = ScenarioSpec::table1(true, false, 2);
            let cfg = MonteCarloConfig {
                reps,
                methods: vec![SimMethod::CalibratedDebiased, SimMethod::NaiveDebiased],
                inference: InferenceConfig {
                    b: 200,
                    r: RChoice::Fixed(probe_r()),
                    lambda: default_lambda_for(spec.design),
                    ..InferenceConfig::default()
                },
                confidence: 0.95,
                seed: 42,
                max_failure_fraction: 0.02,
            };
            let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
            print!("{}", t.to_tsv());
            eprintln!("wall: {:.1}s", t.wall_time_secs);
        }
        "c6" => {
            let spec = ScenarioSpec::table1(true, true, 20);
            let cfg = MonteCarloConfig {
                reps,
                methods: vec![SimMethod::CalibratedDebiased, SimMethod::NaiveDebiased],
                inference: InferenceConfig {
                    b: 200,
                    r: RChoice::Fixed(probe_r()),
                    lambda: default_lambda_for(spec.design),
                    ..InferenceConfig::default()
                },
                confidence: 0.95,
                seed: 42,
                max_failure_fraction: 0.02,
            };
            let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
            print!("{}", t.to_tsv());
            eprintln!("wall: {:.1}s", t.wall_time_secs);
        }
        "c10" => {
            let effect: f64 = std::env::var("PROBE_EFFECT")
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(0.3);
            let spec = ScenarioSpec::power_continuous(effect, 2);
            let cfg = MonteCarloConfig {
                reps,
                methods: vec![SimMethod::CalibratedDebiased, SimMethod::CalibratedRsplit],
                inference: InferenceConfig {
                    b: 200,
                    r: RChoice::Fixed(probe_r()),
                    lambda: default_lambda_for(spec.design),
                    rsplit: RSplitConfig {
                        splits: 300,
                        ..RSplitConfig::default()
                    },
                    ..InferenceConfig::default()
                },
                confidence: 0.95,
                seed: 42,
                max_failure_fraction: 0.02,
            };
            let t = sim::run_monte_carlo(&spec, &cfg).unwrap();
            print!("{}", t.to_tsv());
            eprintln!("wall: {:.1}s", t.wall_time_secs);
        }
        "nodewise" => {
            use maxeffect::data::{ModelDesign, PenaltyScheme, StandardizePolicy};
            use maxeffect::debiased::{self, NodewiseLambda};
            use maxeffect::lasso::{self, ColMatrix, FitOptions};
            let mut spec = ScenarioSpec::table1(true, false, 2);
            spec.seed = 5;
            let (data, _) = sim::generate(&spec).unwrap();
            let design =
                ModelDesign::build(&data, StandardizePolicy::CenterScale, PenaltyScheme::All);
            for policy in [
                ("cv-1se", NodewiseLambda::CvOneSe { folds: 5 }),
                ("cv-min", NodewiseLambda::CvMin { folds: 5 }),
            ] {
                let proj = debiased::nodewise_residualize(
                    &design,
                    &policy.1,
                    &FitOptions::default(),
                    3,
                )
                .unwrap();
                let n = data.n() as f64;
                for j in 0..2 {
                    let v = proj.v.column(j);
                    let z = data.z.column(j);
                    let v2 = v.dot(&v) / n;
                    let c2 = v.dot(&z) / n;
                    let zt = proj.ztilde.column(j);
                    let var_z = {
                        let m = z.sum() / n;
                        z.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / n
                    };
                    println!(
                        "{} j={} lambda_node={:.4} v2={:.4} c2={:.4} var_z={:.4} ztilde_norm_sqrtn={:.3}",
                        policy.0,
                        j,
                        proj.lambda_node[j],
                        v2,
                        c2,
                        var_z,
                        zt.dot(&zt).sqrt() * n.sqrt()
                    );
                }
            }
            // Also check one full fit's lambda and shrinkage.
            let d = ColMatrix::from_array(design.matrix.view());
            let w = design.weights.as_slice().unwrap();
            let y = data.y.as_slice().unwrap();
            let lambda = maxeffect::pipeline::choose_lambda(
                &d,
                y,
                w,
                default_lambda_for(spec.design),
                5,
                100,
                1e-3,
                &FitOptions::default(),
                9,
            )
            .unwrap();
            let fit = lasso::fit_lasso(&d, y, lambda, w, &FitOptions::default(), None).unwrap();
            println!(
                "fit lambda={:.4} beta_lasso=({:.3}, {:.3}) active={}",
                lambda,
                fit.coefs[design.layout.z_index(0)],
                fit.coefs[design.layout.z_index(1)],
                fit.active_set.len()
            );
        }
        "c5parts" => {
            use maxeffect::calibration;
            use maxeffect::pipeline::{self, PipelineMethod};
            let r = probe_r();
            let base = ScenarioSpec::table1(true, false, 2);
            let mut sum_anchor_gap = 0.0;
            let mut sum_bhat_max = 0.0;
            let mut sum_mean_tstar = 0.0;
            let mut sum_boot_rem = 0.0;
            let mut sum_real_rem = 0.0;
            let mut win1 = 0usize;
            let mut total_reps = 0usize;
            for rep in 0..reps {
                let mut spec = base.clone();
                spec.seed = maxeffect::rng::derive_seed(42, maxeffect::rng::stream::MC_REP, rep as u64);
                let (data, truth) = sim::generate(&spec).unwrap();
                let cfg = InferenceConfig {
                    method: PipelineMethod::Debiased,
                    b: 200,
                    r: RChoice::Fixed(r),
                    lambda: default_lambda_for(spec.design),
                    ..InferenceConfig::default()
                };
                let out = pipeline::run_estimator(&data, &cfg, spec.seed).unwrap();
                let anchor_max = out.anchor.anchor_max;
                let amax_idx = (0..2)
                    .max_by(|&a, &b| out.anchor.anchor[a].total_cmp(&out.anchor.anchor[b]))
                    .unwrap();
                sum_anchor_gap += (out.anchor.anchor[0] - out.anchor.anchor[1]).abs();
                let bmax = out.estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                sum_bhat_max += bmax - truth.beta_max;
                sum_real_rem += out.estimates[1] - truth.beta[1];
                let c = calibration::calibration_terms(&out.anchor, data.n(), r).unwrap();
                let t = calibration::modified_max_replicates(
                    out.replicates.view(),
                    c.view(),
                    anchor_max,
                )
                .unwrap();
                sum_mean_tstar += t.iter().sum::<f64>() / t.len() as f64;
                let mean_rep_argmax: f64 =
                    out.replicates.column(amax_idx).sum() / out.replicates.nrows() as f64;
                sum_boot_rem += mean_rep_argmax - out.anchor.anchor[amax_idx];
                for b in 0..out.replicates.nrows() {
                    let v0 = out.replicates[[b, 0]] + c[0];
                    let v1 = out.replicates[[b, 1]] + c[1];
                    if (amax_idx == 1 && v0 > v1) || (amax_idx == 0 && v1 > v0) {
                        win1 += 1;
                    }
                    total_reps += 1;
                }
            }
            let k = reps as f64;
            println!(
                "r={r} anchor_gap={:.4} E[bmax-beta_max]={:.4} E[b2-beta2]={:.4} meanT*={:.4} boot_rem(argmax)={:.4} offmax_win_frac={:.4}",
                sum_anchor_gap / k,
                sum_bhat_max / k,
                sum_real_rem / k,
                sum_mean_tstar / k,
                sum_boot_rem / k,
                win1 as f64 / total_reps as f64
            );
        }
        other => eprintln!("unknown probe '{other}'"),
    }
}
