//! `tune`: cross-validate the calibration exponent and write the selected
//! value plus the candidate-loss table.

use maxeffect::data::{self, Schema};
use maxeffect::error::{Error, Result};
use maxeffect::sim::{self, ScenarioSpec};
use maxeffect::tuning;

use crate::TuneArgs;

use super::*;

pub fn run(args: TuneArgs) -> Result<()> {
    let mut res = resolve_common(&args.common, "tune")?;
    res.set_opt("input", args.input.as_ref().map(|p| p.display().to_string()));
    res.set_opt("schema", args.schema.clone());
    res.set_opt("preset", args.preset.clone());
    res.set_opt("candidates", args.candidates.clone());
    res.set_opt("v", args.v);
    res.set_opt("b_inner", args.b_inner);
    res.set_opt("n", args.n);
    res.set_opt("p2", args.p2);
    let pool = build_pool(&res)?;
    pool.install(|| run_inner(&res))
}

fn run_inner(res: &Resolved) -> Result<()> {
    let seed: u64 = res.parse_or("seed", 0)?;
    let (data, label, design) = match (res.get("input"), res.get("preset")) {
        (Some(input), None) => {
            let schema = Schema::parse(res.require("schema")?)?;
            (data::load_dataset(input, &schema)?, file_stem(input), None)
        }
        (None, Some(preset)) => {
            let mut spec = ScenarioSpec::from_preset(preset)?;
            if let Some(n) = res.parse::<usize>("n")? {
                spec.n = n;
            }
            if let Some(p2) = res.parse::<usize>("p2")? {
                spec.p2 = p2;
            }
            spec.seed = maxeffect::rng::derive_seed(seed, maxeffect::rng::stream::GENERATE, 1);
            let (data, _) = sim::generate(&spec)?;
            (data, spec.label.clone(), Some(spec.design))
        }
        (Some(_), Some(_)) => {
            return Err(Error::config("give either --input or --preset, not both"));
        }
        (None, None) => {
            return Err(Error::config("tune needs --input with --schema, or --preset"));
        }
    };

    let method = parse_method(res)?;
    let cfg = inference_config(res, method, design)?;
    let candidates = match res.get("candidates") {
        Some(raw) => {
            let c = parse_float_list(raw)?;
            if c.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("candidates must be strictly ascending"));
            }
            c
        }
        None => maxeffect::pipeline::TuneSettings::default().candidates,
    };
    let v: usize = res.parse_or("v", 3)?;
    let b_inner: usize = res.parse_or("b_inner", 100)?;

    let result = tuning::cross_validate_r(&data, &candidates, v, &cfg, b_inner, seed)?;

    let dir = out_dir(res)?;
    let base = format!("tuning_{label}_{}_seed{seed}", method.name());
    let mut report = serde_json::Map::new();
    report.insert(
        "config".into(),
        serde_json::to_value(res.echo_map()).expect("map"),
    );
    report.insert(
        "tuning".into(),
        serde_json::to_value(&result).expect("tuning"),
    );
    write_file(
        &dir.join(format!("{base}.json")),
        &serde_json::to_string_pretty(&serde_json::Value::Object(report)).expect("json"),
    )?;

    // Candidate-loss table for inspection.
    let mut tsv = String::from("r");
    for i in 0..data.p1() {
        tsv.push_str(&format!("\tloss_coord{}", i + 1));
    }
    tsv.push('\n');
    for (l, r) in result.candidates.iter().enumerate() {
        tsv.push_str(&format!("{r:.6}"));
        for i in 0..data.p1() {
            tsv.push_str(&format!("\t{:.6}", result.candidate_losses[l][i]));
        }
        tsv.push('\n');
    }
    write_file(&dir.join(format!("{base}_losses.tsv")), &tsv)?;

    println!("r_cv={} r_star={} folds={}", result.r_cv, result.r_star, result.folds);
    Ok(())
}
