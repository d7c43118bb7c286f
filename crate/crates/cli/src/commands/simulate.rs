//! `simulate`: run the Monte Carlo harness on a scenario preset and write
//! the metrics table plus a machine-readable report.

use maxeffect::error::{Error, Result};
use maxeffect::sim::{self, MonteCarloConfig, ScenarioSpec, SimMethod};

use crate::config::parse_confidence_list;
use crate::SimulateArgs;

use super::*;

pub fn default_methods() -> Vec<SimMethod> {
    vec![
        SimMethod::CalibratedDebiased,
        SimMethod::NaiveDebiased,
        SimMethod::SimultaneousDebiased,
        SimMethod::CalibratedRsplit,
        SimMethod::NaiveRsplit,
        SimMethod::SimultaneousRsplit,
    ]
}

pub fn parse_methods(raw: &str) -> Result<Vec<SimMethod>> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        out.push(
            SimMethod::parse(part)
                .ok_or_else(|| Error::config(format!("unknown method '{part}'")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::config("empty method list"));
    }
    Ok(out)
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let mut res = resolve_common(&args.common, "simulate")?;
    res.set_opt("preset", args.preset.clone());
    res.set_opt("reps", args.reps);
    res.set_opt("methods", args.methods.clone());
    res.set_opt("n", args.n);
    res.set_opt("p1", args.p1);
    res.set_opt("p2", args.p2);
    if args.emit_data {
        res.set("emit_data", "true");
    }
    let pool = build_pool(&res)?;
    pool.install(|| run_inner(&res))
}

fn run_inner(res: &Resolved) -> Result<()> {
    let preset = res.require("preset")?;
    let mut spec = ScenarioSpec::from_preset(preset)?;
    if let Some(n) = res.parse::<usize>("n")? {
        spec.n = n;
    }
    if let Some(p1) = res.parse::<usize>("p1")? {
        spec.p1 = p1;
        if let sim::BetaCase::Custom(v) = &spec.beta_case {
            if v.len() != p1 {
                return Err(Error::config(
                    "preset carries a custom beta; p1 cannot be overridden",
                ));
            }
        }
    }
    if let Some(p2) = res.parse::<usize>("p2")? {
        if matches!(spec.gamma_case, sim::GammaCase::Custom(_)) {
            return Err(Error::config(
                "preset carries a custom gamma; p2 cannot be overridden",
            ));
        }
        spec.p2 = p2;
    }
    let seed: u64 = res.parse_or("seed", 0)?;
    let reps: usize = res.parse_or("reps", 300)?;
    let methods = match res.get("methods") {
        Some(raw) => parse_methods(raw)?,
        None => default_methods(),
    };
    let confidences = parse_confidence_list(res.require("confidence")?)?;
    let method_cfg = inference_config(res, maxeffect::pipeline::PipelineMethod::Debiased, Some(spec.design))?;

    let cfg = MonteCarloConfig {
        reps,
        methods,
        inference: method_cfg,
        confidence: confidences[0],
        seed,
        max_failure_fraction: 0.02,
    };
    let table = sim::run_monte_carlo(&spec, &cfg)?;

    let dir = out_dir(res)?;
    let base = format!("metrics_{}_seed{seed}", spec.label);
    write_file(&dir.join(format!("{base}.tsv")), &table.to_tsv())?;
    let mut report = serde_json::Map::new();
    report.insert(
        "config".into(),
        serde_json::to_value(res.echo_map()).expect("map"),
    );
    report.insert(
        "metrics".into(),
        serde_json::to_value(&table).expect("metrics"),
    );
    write_file(
        &dir.join(format!("report_{}_seed{seed}.json", spec.label)),
        &serde_json::to_string_pretty(&serde_json::Value::Object(report)).expect("json"),
    )?;

    if matches!(res.get("emit_data"), Some("true") | Some("1") | Some("yes")) {
        let mut data_spec = spec.clone();
        data_spec.seed = maxeffect::rng::derive_seed(seed, maxeffect::rng::stream::MC_REP, 0);
        let (data, _) = sim::generate(&data_spec)?;
        maxeffect::data::write_dataset(&data, dir.join(format!("data_{}_seed{seed}.csv", spec.label)))?;
    }

    print!("{}", table.to_tsv());
    eprintln!(
        "simulate finished in {:.1}s ({} reps)",
        table.wall_time_secs, reps
    );
    Ok(())
}
