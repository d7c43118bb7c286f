//! Rough per-repetition timing at desk scale. Run with
//! `cargo run --release --example timing -p maxeffect`.

use maxeffect::debiased::NodewiseLambda;
use maxeffect::pipeline::{self, InferenceConfig, PipelineMethod, RChoice};
use maxeffect::rsplit::RSplitConfig;
use maxeffect::sim::{self, default_lambda_for, ScenarioSpec};
use std::time::Instant;

fn main() {
    let mut spec = ScenarioSpec::table1(true, true, 2);
    spec.seed = 1;
    let (data, _) = sim::generate(&spec).unwrap();
    let cfg = InferenceConfig {
        method: PipelineMethod::Debiased,
        b: 200,
        r: RChoice::Fixed(0.1),
        lambda: default_lambda_for(spec.design),
        nodewise: NodewiseLambda::CvOneSe { folds: 5 },
        ..InferenceConfig::default()
    };
    let t0 = Instant::now();
    let out = pipeline::run_estimator(&data, &cfg, 3).unwrap();
    println!(
        "debiased binary p1=2 (n=300, p2=400, B=200): {:.2}s  estimates={:?}",
        t0.elapsed().as_secs_f64(),
        out.estimates
    );

    let mut spec20 = ScenarioSpec::table1(true, true, 20);
    spec20.seed = 1;
    let (data20, _) = sim::generate(&spec20).unwrap();
    let t0 = Instant::now();
    let out20 = pipeline::run_estimator(&data20, &cfg, 3).unwrap();
    println!(
        "debiased binary p1=20: {:.2}s  (first estimate {:.3})",
        t0.elapsed().as_secs_f64(),
        out20.estimates[0]
    );

    let mut spec_c = ScenarioSpec::table1(false, true, 2);
    spec_c.seed = 1;
    let (data_c, _) = sim::generate(&spec_c).unwrap();
    let rcfg = InferenceConfig {
        method: PipelineMethod::Rsplit,
        b: 200,
        r: RChoice::Fixed(0.1),
        rsplit: RSplitConfig {
            splits: 500,
            ..RSplitConfig::default()
        },
        ..InferenceConfig::default()
    };
    let t0 = Instant::now();
    let out_r = pipeline::run_estimator(&data_c, &rcfg, 3).unwrap();
    println!(
        "rsplit continuous p1=2 (B1=500): {:.2}s  estimates={:?}",
        t0.elapsed().as_secs_f64(),
        out_r.estimates
    );

    let t0 = Instant::now();
    let spec_e = {
        let mut s = ScenarioSpec::example1();
        s.seed = 1;
        s
    };
    let (data_e, _) = sim::generate(&spec_e).unwrap();
    let cfg_e = InferenceConfig {
        method: PipelineMethod::Debiased,
        b: 200,
        r: RChoice::Fixed(0.1),
        lambda: default_lambda_for(spec_e.design),
        ..InferenceConfig::default()
    };
    let out_e = pipeline::run_estimator(&data_e, &cfg_e, 3).unwrap();
    println!(
        "debiased example1 (n=100, p=500, B=200): {:.2}s  estimates={:?}",
        t0.elapsed().as_secs_f64(),
        out_e.estimates
    );
}
