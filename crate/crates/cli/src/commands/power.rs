//! `power`: sweep effect sizes on the low-noise continuous design and
//! report per-method rejection rates of the calibrated one-sided test.

use maxeffect::error::Result;
use maxeffect::sim::{self, MonteCarloConfig, ScenarioSpec, SimMethod};

use crate::config::parse_confidence_list;
use crate::PowerArgs;

use super::*;

pub fn run(args: PowerArgs) -> Result<()> {
    // Desk-scale default split count for power sweeps.
    let mut res = resolve_common_with(&args.common, "power", &[("B1", "500")])?;
    res.set_opt("effects", args.effects.clone());
    res.set_opt("reps", args.reps);
    res.set_opt("p1", args.p1);
    res.set_opt("methods", args.methods.clone());
    let pool = build_pool(&res)?;
    pool.install(|| run_inner(&res))
}

fn run_inner(res: &Resolved) -> Result<()> {
    let seed: u64 = res.parse_or("seed", 0)?;
    let reps: usize = res.parse_or("reps", 300)?;
    let p1: usize = res.parse_or("p1", 2)?;
    let effects = match res.get("effects") {
        Some(raw) => parse_float_list(raw)?,
        None => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    };
    let methods = match res.get("methods") {
        Some(raw) => super::simulate::parse_methods(raw)?,
        None => vec![SimMethod::CalibratedDebiased, SimMethod::CalibratedRsplit],
    };
    let confidences = parse_confidence_list(res.require("confidence")?)?;

    let mut rows: Vec<(f64, String, f64, usize)> = Vec::new();
    for &effect in &effects {
        let spec = {
            let mut s = ScenarioSpec::power_continuous(effect, p1);
            s.label = format!("power-continuous-p{p1}");
            s
        };
        let cfg = MonteCarloConfig {
            reps,
            methods: methods.clone(),
            inference: inference_config(
                res,
                maxeffect::pipeline::PipelineMethod::Debiased,
                Some(spec.design),
            )?,
            confidence: confidences[0],
            seed,
            max_failure_fraction: 0.02,
        };
        let table = sim::run_monte_carlo(&spec, &cfg)?;
        for row in &table.rows {
            rows.push((effect, row.method.clone(), row.rejection_rate, row.reps_used));
        }
        eprintln!("effect {effect}: done in {:.1}s", table.wall_time_secs);
    }

    let mut tsv = String::from("effect\tmethod\trejection_rate\treps_used\n");
    for (effect, method, rate, used) in &rows {
        tsv.push_str(&format!("{effect}\t{method}\t{rate:.6}\t{used}\n"));
    }
    let dir = out_dir(res)?;
    let base = format!("power_p{p1}_seed{seed}");
    write_file(&dir.join(format!("{base}.tsv")), &tsv)?;
    let mut report = serde_json::Map::new();
    report.insert(
        "config".into(),
        serde_json::to_value(res.echo_map()).expect("map"),
    );
    report.insert(
        "curves".into(),
        serde_json::to_value(
            rows.iter()
                .map(|(e, m, r, u)| {
                    serde_json::json!({"effect": e, "method": m, "rejection_rate": r, "reps_used": u})
                })
                .collect::<Vec<_>>(),
        )
        .expect("rows"),
    );
    write_file(
        &dir.join(format!("{base}.json")),
        &serde_json::to_string_pretty(&serde_json::Value::Object(report)).expect("json"),
    )?;
    print!("{tsv}");
    Ok(())
}
