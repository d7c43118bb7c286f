pub mod fit;
pub mod power;
pub mod simulate;
pub mod tune;

use std::path::{Path, PathBuf};

use maxeffect::debiased::NodewiseLambda;
use maxeffect::error::{Error, Result};
use maxeffect::lasso::GridSelection;
use maxeffect::pipeline::{InferenceConfig, PipelineMethod, RChoice, TuneSettings};
use maxeffect::rng::Multiplier;
use maxeffect::rsplit::RSplitConfig;
use maxeffect::sim::DesignKind;

use crate::config::{FlatConfig, Resolved};
use crate::CommonArgs;

/// Defaults, then per-command defaults, then config file, then flags.
pub fn resolve_common_with(
    common: &CommonArgs,
    section: &str,
    extra_defaults: &[(&str, &str)],
) -> Result<Resolved> {
    let mut res = Resolved::new(section);
    res.set("seed", 0u64);
    res.set("confidence", "0.95");
    res.set("multiplier", "rademacher");
    res.set("method", "debiased");
    res.set("r", "0.1");
    res.set("B", 200usize);
    res.set("B1", 1000usize);
    res.set("B2", 200usize);
    for (k, v) in extra_defaults {
        res.set(k, v);
    }

    if let Some(path) = &common.config {
        let file = FlatConfig::load(path)?;
        for key in [
            "seed",
            "confidence",
            "multiplier",
            "method",
            "r",
            "B",
            "B1",
            "B2",
            "lambda",
            "workers",
            "out",
            "input",
            "schema",
            "preset",
            "reps",
            "methods",
            "n",
            "p1",
            "p2",
            "candidates",
            "v",
            "b_inner",
            "effects",
            "baselines",
            "emit_data",
            "membership",
            "treatment",
            "overlap_a",
            "s_min",
            "s_max",
            "min_atom",
        ] {
            if let Some(v) = file.get(section, key) {
                res.set(key, v);
            }
        }
    }

    res.set_opt("seed", common.seed);
    res.set_opt("workers", common.workers);
    res.set_opt("out", common.out.as_ref().map(|p| p.display().to_string()));
    res.set_opt("method", common.method.clone());
    res.set_opt("r", common.r.clone());
    res.set_opt("B", common.b);
    res.set_opt("B1", common.b1);
    res.set_opt("B2", common.b2);
    res.set_opt("confidence", common.confidence.clone());
    res.set_opt("multiplier", common.multiplier.clone());
    res.set_opt("lambda", common.lambda.clone());
    Ok(res)
}

pub fn resolve_common(common: &CommonArgs, section: &str) -> Result<Resolved> {
    resolve_common_with(common, section, &[])
}

/// Install the requested worker count. Results never depend on it.
pub fn build_pool(res: &Resolved) -> Result<rayon::ThreadPool> {
    let workers: Option<usize> = res.parse("workers")?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    builder
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))
}

pub fn parse_method(res: &Resolved) -> Result<PipelineMethod> {
    let raw = res.require("method")?;
    PipelineMethod::parse(raw)
        .ok_or_else(|| Error::config(format!("unknown method '{raw}'; use debiased or rsplit")))
}

pub fn parse_multiplier(res: &Resolved) -> Result<Multiplier> {
    let raw = res.require("multiplier")?;
    Multiplier::parse(raw).ok_or_else(|| {
        Error::config(format!(
            "unknown multiplier '{raw}'; use rademacher, gaussian, or mammen"
        ))
    })
}

pub fn parse_lambda_rule(raw: &str) -> Result<GridSelection> {
    match raw {
        "1se" => Ok(GridSelection::OneSe),
        "min" => Ok(GridSelection::MinCv),
        "1.1x1se" => Ok(GridSelection::ScaledOneSe(1.1)),
        "lambda0" => Ok(GridSelection::Lambda0),
        other => {
            if let Some(f) = other.strip_suffix("x1se") {
                let factor: f64 = f
                    .parse()
                    .map_err(|_| Error::config(format!("bad lambda rule '{other}'")))?;
                return Ok(GridSelection::ScaledOneSe(factor));
            }
            let v: f64 = other
                .parse()
                .map_err(|_| Error::config(format!("bad lambda rule '{other}'")))?;
            if v < 0.0 {
                return Err(Error::config("fixed lambda must be >= 0"));
            }
            Ok(GridSelection::Fixed(v))
        }
    }
}

pub fn parse_r_choice(res: &Resolved) -> Result<RChoice> {
    let raw = res.require("r")?;
    if raw == "auto" {
        let mut settings = TuneSettings::default();
        if let Some(cands) = res.get("candidates") {
            settings.candidates = parse_float_list(cands)?;
        }
        settings.folds = res.parse_or("v", settings.folds)?;
        settings.b_inner = res.parse_or("b_inner", settings.b_inner)?;
        return Ok(RChoice::Auto(settings));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::config(format!("r must be 'auto' or a number, got '{raw}'")))?;
    if !(0.0 < v && v < 0.5) {
        return Err(Error::config(format!(
            "calibration exponent r must lie in (0, 0.5), got {v}"
        )));
    }
    Ok(RChoice::Fixed(v))
}

pub fn parse_float_list(raw: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        out.push(
            part.parse::<f64>()
                .map_err(|_| Error::config(format!("bad number '{part}' in list")))?,
        );
    }
    if out.is_empty() {
        return Err(Error::config("empty number list"));
    }
    Ok(out)
}

/// Assemble the estimator settings shared by every command.
pub fn inference_config(
    res: &Resolved,
    method: PipelineMethod,
    design: Option<DesignKind>,
) -> Result<InferenceConfig> {
    let lambda = match res.get("lambda") {
        Some(raw) => parse_lambda_rule(raw)?,
        None => design
            .map(maxeffect::sim::default_lambda_for)
            .unwrap_or(GridSelection::OneSe),
    };
    let b_debiased: usize = res.parse_or("B", 200)?;
    let b1: usize = res.parse_or("B1", 1000)?;
    let b2: usize = res.parse_or("B2", 200)?;
    let mut rsplit = RSplitConfig {
        splits: b1,
        ..RSplitConfig::default()
    };
    rsplit.s_min = res.parse_or("s_min", rsplit.s_min)?;
    if let Some(s_max) = res.parse::<usize>("s_max")? {
        rsplit.s_max = Some(s_max);
    }
    Ok(InferenceConfig {
        method,
        b: match method {
            PipelineMethod::Debiased => b_debiased,
            PipelineMethod::Rsplit => b2,
        },
        multiplier: parse_multiplier(res)?,
        r: parse_r_choice(res)?,
        lambda,
        nodewise: NodewiseLambda::CvOneSe { folds: 3 },
        rsplit,
        ..InferenceConfig::default()
    })
}

pub fn out_dir(res: &Resolved) -> Result<PathBuf> {
    let dir = PathBuf::from(res.get("out").unwrap_or("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    Ok(())
}

pub fn file_stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string())
}
