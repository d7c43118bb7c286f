//! Hunt for worker-count-dependent float wobble.

use maxeffect::pipeline::{self, InferenceConfig, PipelineMethod, RChoice};
use maxeffect::rng;
use maxeffect::rsplit::RSplitConfig;
use maxeffect::sim::{self, ScenarioSpec};

fn harness_diff() {
    use maxeffect::sim::{MonteCarloConfig, SimMethod};
    let mut spec = ScenarioSpec::table1(true, true, 2);
    spec.n = 70;
    spec.p2 = 16;
    let cfg = MonteCarloConfig {
        reps: 4,
        methods: vec![
            SimMethod::CalibratedDebiased,
            SimMethod::NaiveDebiased,
            SimMethod::SimultaneousDebiased,
            SimMethod::CalibratedRsplit,
            SimMethod::NaiveRsplit,
            SimMethod::SimultaneousRsplit,
        ],
        inference: InferenceConfig {
            b: 15,
            r: RChoice::Fixed(0.1),
            lambda: maxeffect::sim::default_lambda_for(spec.design),
            rsplit: RSplitConfig {
                splits: 12,
                ..RSplitConfig::default()
            },
            ..InferenceConfig::default()
        },
        confidence: 0.95,
        seed: 9,
        max_failure_fraction: 0.02,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| sim::run_monte_carlo(&spec, &cfg).unwrap().to_tsv())
    };
    let a = run(1);
    let b = run(3);
    if a == b {
        println!("harness identical");
    } else {
        println!("harness DIFFERS");
        for (la, lb) in a.lines().zip(b.lines()) {
            if la != lb {
                println!("A: {la}\nB: {lb}");
            }
        }
    }
}

fn hash_slice(v: &[f64]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for x in v {
        h ^= x.to_bits();
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn main() {
    if std::env::args().nth(1).as_deref() == Some("harness") {
        harness_diff();
        return;
    }
    let mut spec = ScenarioSpec::table1(true, true, 2);
    spec.n = 70;
    spec.p2 = 16;
    for rep in 0..4u64 {
        let mut rep_spec = spec.clone();
        rep_spec.seed = rng::derive_seed(9, rng::stream::MC_REP, rep);
        let (data, _) = sim::generate(&rep_spec).unwrap();
        for threads in [1usize, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let (d_hash, r_hash, se_hash, anchor_hash) = pool.install(|| {
                let dcfg = InferenceConfig {
                    method: PipelineMethod::Debiased,
                    b: 15,
                    r: RChoice::Fixed(0.1),
                    lambda: maxeffect::sim::default_lambda_for(rep_spec.design),
                    ..InferenceConfig::default()
                };
                let dout = pipeline::run_estimator(&data, &dcfg, rep_spec.seed).unwrap();
                let rcfg = InferenceConfig {
                    method: PipelineMethod::Rsplit,
                    b: 15,
                    r: RChoice::Fixed(0.1),
                    rsplit: RSplitConfig {
                        splits: 12,
                        ..RSplitConfig::default()
                    },
                    ..InferenceConfig::default()
                };
                let rout = pipeline::run_estimator(&data, &rcfg, rep_spec.seed).unwrap();
                (
                    hash_slice(dout.replicates.as_slice().unwrap()),
                    hash_slice(rout.replicates.as_slice().unwrap()),
                    hash_slice(rout.se.as_slice().unwrap()),
                    hash_slice(rout.anchor.anchor.as_slice().unwrap()),
                )
            });
            println!(
                "rep {rep} threads {threads}: debiased_reps={d_hash:016x} rsplit_reps={r_hash:016x} rsplit_se={se_hash:016x} anchor={anchor_hash:016x}"
            );
        }
    }
}
