//! `fit`: ingest -> (overlap transform) -> estimator -> tuning -> bootstrap
//! -> calibrated inference (+ baselines), with a JSON report and a
//! grep-able summary on standard output.

use ndarray::{Array1, Array2};

use maxeffect::calibration::{
    self, AnchorEstimates, SimultaneousMode,
};
use maxeffect::data::{self, DataSet, InterceptPolicy, RawTable, Schema};
use maxeffect::error::{Error, Result};
use maxeffect::overlap::{self, BackgroundPolicy};
use maxeffect::pipeline;
use maxeffect::rsplit;
use maxeffect::tuning;

use crate::config::parse_confidence_list;
use crate::report::{BaselineReport, InferenceReport};
use crate::FitArgs;

use super::*;

/// The coordinates calibration runs on, after any overlap transform.
struct InferenceInputs {
    data: DataSet,
    names: Vec<String>,
    /// Recalibration dimension for auto-tuned exponents (K after an overlap
    /// transform, otherwise p1).
    target_dim: usize,
    overlap_a: Option<Array2<f64>>,
    warnings: Vec<String>,
}

fn atom_name(pattern: &[bool], subgroup_names: &[String]) -> String {
    let parts: Vec<&str> = pattern
        .iter()
        .zip(subgroup_names.iter())
        .filter(|(on, _)| **on)
        .map(|(_, name)| name.as_str())
        .collect();
    if parts.is_empty() {
        "background".to_string()
    } else {
        parts.join("+")
    }
}

fn load_inputs(args: &FitArgs, res: &Resolved) -> Result<InferenceInputs> {
    let input = res.require("input")?.to_string();
    let schema_text = res.require("schema")?.to_string();
    let schema = Schema::parse(&schema_text)?;

    let membership_cols: Vec<String> = res
        .get("membership")
        .map(|raw| {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default();

    if membership_cols.is_empty() {
        let data = data::load_dataset(&input, &schema)?;
        let names = data.z_names.clone();
        let target_dim = data.p1();
        return Ok(InferenceInputs {
            data,
            names,
            target_dim,
            overlap_a: None,
            warnings: Vec::new(),
        });
    }

    // Overlapping-subgroup path: membership columns define the atoms, the
    // remaining schema roles define response and covariates.
    let table = RawTable::load(&input)?;
    let n = table.rows.len();
    let mut membership = Array2::<f64>::zeros((n, membership_cols.len()));
    for (k, name) in membership_cols.iter().enumerate() {
        let col = table.numeric_column(name)?;
        for (i, v) in col.into_iter().enumerate() {
            membership[[i, k]] = v;
        }
    }
    let atoms = overlap::atomize(membership.view(), BackgroundPolicy::Reject)?;
    let (separated, violations) = overlap::check_complete_separation(membership.view(), &atoms);
    if !separated {
        return Err(Error::data(format!(
            "atomization failed complete separation (violating pairs: {violations:?})"
        )));
    }

    let treatment_col = args
        .treatment
        .clone()
        .or_else(|| res.get("treatment").map(String::from));
    let z = match &treatment_col {
        Some(tcol) => {
            let t = Array1::from_vec(table.numeric_column(tcol)?);
            atoms.interaction_matrix(t.view())
        }
        None => atoms.indicator_matrix(n),
    };

    let mut warnings = Vec::new();
    let min_atom: usize = res.parse_or("min_atom", 5)?;
    for j in 0..atoms.n_atoms() {
        let count = atoms.labels.iter().filter(|&&a| a == j).count();
        if count < min_atom {
            warnings.push(format!(
                "atom '{}' has only {count} members; its effect is weakly identified",
                atom_name(&atoms.patterns[j], &membership_cols)
            ));
        }
    }

    // Response and covariates from the schema over non-membership columns.
    let mut y: Option<(String, Vec<f64>)> = None;
    let mut x_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for header in &table.headers {
        if membership_cols.contains(header) || treatment_col.as_deref() == Some(header) {
            continue;
        }
        match schema
            .roles
            .iter()
            .find(|(n, _)| n == header)
            .map(|(_, r)| *r)
            .or(schema.default_role)
        {
            Some(data::ColumnRole::Response) => {
                if y.is_some() {
                    return Err(Error::data("duplicate role assignment for response"));
                }
                y = Some((header.clone(), table.numeric_column(header)?));
            }
            Some(data::ColumnRole::Covariate) => {
                x_cols.push((header.clone(), table.numeric_column(header)?));
            }
            Some(data::ColumnRole::Subgroup) => {
                return Err(Error::config(
                    "overlap mode builds the subgroup block from membership columns; \
                     remove explicit subgroup roles from the schema",
                ));
            }
            _ => {}
        }
    }
    let (y_name, y_vals) = y.ok_or_else(|| Error::data("schema assigns no response column"))?;
    let p2 = x_cols.len();
    let mut x = Array2::<f64>::zeros((n, p2));
    for (j, (_, col)) in x_cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }

    let atom_names: Vec<String> = atoms
        .patterns
        .iter()
        .map(|p| atom_name(p, &membership_cols))
        .collect();
    let dataset = DataSet::new(
        Array1::from_vec(y_vals),
        z,
        x,
        y_name,
        atom_names.clone(),
        x_cols.into_iter().map(|(n, _)| n).collect(),
        InterceptPolicy::IncludeUnpenalized,
    )?;

    // Conditional proportions: external table or sample counts.
    let a = match res.get("overlap_a") {
        Some(path) => {
            let at = RawTable::load(path)?;
            let mut a = Array2::<f64>::zeros((membership_cols.len(), atoms.n_atoms()));
            for (k, name) in membership_cols.iter().enumerate() {
                let row = at
                    .rows
                    .iter()
                    .find(|r| r.first().map(String::as_str) == Some(name.as_str()))
                    .ok_or_else(|| {
                        Error::data(format!("proportion table has no row for subgroup '{name}'"))
                    })?;
                for (j, aname) in atom_names.iter().enumerate() {
                    let col = at
                        .headers
                        .iter()
                        .position(|h| h == aname)
                        .ok_or_else(|| {
                            Error::data(format!("proportion table has no column '{aname}'"))
                        })?;
                    let cell = row.get(col).map(String::as_str).unwrap_or("");
                    a[[k, j]] = cell.parse().map_err(|_| {
                        Error::data(format!("non-numeric proportion for ({name}, {aname})"))
                    })?;
                }
            }
            overlap::validate_external_a(a.view())?;
            a
        }
        None => overlap::build_a_from_sample(membership.view(), &atoms)?,
    };

    Ok(InferenceInputs {
        data: dataset,
        names: membership_cols,
        target_dim: a.nrows(),
        overlap_a: Some(a),
        warnings,
    })
}

pub fn run(args: FitArgs) -> Result<()> {
    let mut res = resolve_common(&args.common, "fit")?;
    res.set_opt("input", args.input.as_ref().map(|p| p.display().to_string()));
    res.set_opt("schema", args.schema.clone());
    if args.baselines {
        res.set("baselines", "true");
    }
    res.set_opt("membership", args.membership.clone());
    res.set_opt("treatment", args.treatment.clone());
    res.set_opt(
        "overlap_a",
        args.overlap_a.as_ref().map(|p| p.display().to_string()),
    );
    let pool = build_pool(&res)?;
    pool.install(|| run_inner(&args, &res))
}

fn run_inner(args: &FitArgs, res: &Resolved) -> Result<()> {
    let started = std::time::Instant::now();
    let inputs = load_inputs(args, res)?;
    let seed: u64 = res.parse_or("seed", 0)?;
    let confidences = parse_confidence_list(res.require("confidence")?)?;
    let method = parse_method(res)?;
    let cfg = inference_config(res, method, None)?;
    let want_baselines = matches!(res.get("baselines"), Some("true") | Some("1") | Some("yes"));

    // Exponent first (cross-validated on the fitting-scale data when auto),
    // then one estimator run.
    let (mut r_used, mut tuning_trace) = pipeline::resolve_r(&inputs.data, &cfg, seed)?;
    if let (Some(trace), Some(_)) = (&tuning_trace, &inputs.overlap_a) {
        // After an overlap transform the maximized vector has K coordinates.
        r_used = tuning::calibrate_r(trace.r_cv, inputs.target_dim)?;
        let mut t = trace.clone();
        t.r_star = r_used;
        tuning_trace = Some(t);
    }
    let out = pipeline::run_estimator(&inputs.data, &cfg, seed)?;

    // Map to the reporting scale.
    let (estimates, replicates, anchor_vec, scales) = match &inputs.overlap_a {
        None => (
            out.estimates.clone(),
            out.replicates.clone(),
            out.anchor.anchor.clone(),
            out.se.clone(),
        ),
        Some(a) => {
            let (est, reps, anchor) = overlap::transform_to_original(
                out.estimates.view(),
                out.replicates.view(),
                out.anchor.anchor.view(),
                a.view(),
            )?;
            let scales = rsplit::replicate_sd(&reps);
            (est, reps, anchor, scales)
        }
    };
    let anchor = AnchorEstimates::new(anchor_vec, out.anchor.source)?;
    let inference = calibration::infer_max(
        estimates.view(),
        replicates.view(),
        &anchor,
        inputs.data.n(),
        r_used,
    )?;

    let lower_bounds: Vec<(f64, f64)> = confidences
        .iter()
        .map(|&c| (c, inference.lower_bound(c)))
        .collect();

    let (naive, simultaneous) = if want_baselines {
        let naive = calibration::naive_inference(estimates.view(), scales.view())?;
        let simu = calibration::simultaneous_inference(
            estimates.view(),
            replicates.view(),
            anchor.anchor.view(),
            Some(scales.view()),
            SimultaneousMode::Raw,
        )?;
        (
            Some(BaselineReport {
                point: naive.point,
                selected_index: naive.selected_index,
                lower_bounds: confidences
                    .iter()
                    .map(|&c| (c, naive.lower_bound(c)))
                    .collect(),
            }),
            Some(BaselineReport {
                point: simu.point,
                selected_index: inference.selected_index,
                lower_bounds: confidences
                    .iter()
                    .map(|&c| (c, simu.lower_bound(c)))
                    .collect(),
            }),
        )
    } else {
        (None, None)
    };

    let mut warnings = inputs.warnings.clone();
    warnings.extend(out.warnings.clone());

    let report = InferenceReport {
        config: res.echo_map(),
        command: "fit".into(),
        method: method.name().into(),
        n: inputs.data.n(),
        p1: estimates.len(),
        p2: inputs.data.p2(),
        subgroup_names: inputs.names.clone(),
        estimates: estimates.to_vec(),
        scales: scales.to_vec(),
        anchor: anchor.anchor.to_vec(),
        selected_index: inference.selected_index,
        selected_name: inputs
            .names
            .get(inference.selected_index)
            .cloned()
            .unwrap_or_else(|| format!("subgroup{}", inference.selected_index + 1)),
        point_raw: inference.point_raw,
        bias_reduced: inference.bias_reduced,
        r_used,
        tuning: tuning_trace,
        b: inference.b,
        lambda: out.lambda,
        lower_bounds,
        t_star_quantiles: inference.t_star_quantiles(&[0.05, 0.25, 0.5, 0.75, 0.95]),
        naive,
        simultaneous,
        warnings,
    };

    let dir = out_dir(res)?;
    let stem = file_stem(res.require("input")?);
    let base = format!("report_{stem}_{}_seed{seed}", method.name());
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::numerical(format!("report serialization failed: {e}")))?;
    write_file(&dir.join(format!("{base}.json")), &json)?;
    write_file(&dir.join(format!("{base}.txt")), &report.human_summary())?;
    // Re-runnable config alongside the report (also embedded in the JSON).
    write_file(&dir.join(format!("{base}_config.txt")), &res.echo_flat_text())?;
    print!("{}", report.human_summary());
    eprintln!(
        "fit finished in {:.1}s; report written to {}",
        started.elapsed().as_secs_f64(),
        dir.join(format!("{base}.json")).display()
    );
    Ok(())
}
