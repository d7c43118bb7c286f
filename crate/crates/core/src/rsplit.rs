//! Repeated-data-splitting estimator for a small, fixed subgroup block.
//!
//! Each split selects a covariate model on one half by a size-constrained CV
//! lasso (the subgroup block is never penalized), refits OLS on the other
//! half, and the estimates are averaged over splits. The averaged inverse
//! Gram rows give a linear expansion that turns one set of wild-bootstrap
//! residuals into replicates without refitting anything.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::data::{DataSet, InterceptPolicy, ModelDesign, PenaltyScheme, StandardizePolicy};
use crate::error::{Error, Result};
use crate::lasso::{self, ColMatrix, FitOptions, FoldSpec, GridSelection, LambdaGrid};
use crate::linalg;
use crate::rng::{self, Multiplier};

/// Where the residuals feeding the fast bootstrap come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSource {
    /// Full-sample penalized fit of the whole model (default).
    #[default]
    FullSampleLasso,
    /// Residuals against the split-averaged predictions.
    SplitAverage,
}

/// Model-selection and aggregation settings.
#[derive(Debug, Clone)]
pub struct RSplitConfig {
    /// Number of splits (B1).
    pub splits: usize,
    /// Fraction of rows refit on (the T2 share).
    pub split_fraction: f64,
    /// Model-size bounds for the selected covariate set.
    pub s_min: usize,
    /// Upper bound; `None` defaults to `n2 / 4`.
    pub s_max: Option<usize>,
    /// Folds for the selector's internal cross-validation.
    pub selector_folds: usize,
    /// Grid length for the selector path.
    pub selector_grid_len: usize,
    pub residual_source: ResidualSource,
    /// Lambda rule for the full-sample residual fit.
    pub residual_lambda: GridSelection,
    pub opts: FitOptions,
}

impl Default for RSplitConfig {
    fn default() -> Self {
        RSplitConfig {
            splits: 1000,
            split_fraction: 0.5,
            s_min: 3,
            s_max: None,
            selector_folds: 3,
            selector_grid_len: 100,
            residual_source: ResidualSource::FullSampleLasso,
            residual_lambda: GridSelection::OneSe,
            opts: FitOptions::default(),
        }
    }
}

/// One kept split: index sets, selected model, and refit coefficients.
#[derive(Debug, Clone)]
pub struct SplitRecord {
    pub split_id: usize,
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    /// Selected covariate indices into the X block.
    pub selected_model: Vec<usize>,
    pub refit_intercept: f64,
    pub refit_b: Array1<f64>,
    pub refit_gamma: Array1<f64>,
}

struct SplitFit {
    record: SplitRecord,
    /// Z rows of the inverse refit Gram, split into the expansion slots.
    gamma_intercept: Array1<f64>,
    gamma_z: Array2<f64>,
    gamma_x: Vec<(usize, Array1<f64>)>,
}

/// Split-averaged estimate with everything the fast bootstrap needs.
#[derive(Debug, Clone)]
pub struct RSplitEstimate {
    /// Averaged subgroup estimates.
    pub b_tilde: Array1<f64>,
    /// Averaged expansion matrix over the (Z, X) columns, p1 x (p1 + p2);
    /// columns of covariates never selected are identically zero.
    pub gamma_tilde: Array2<f64>,
    /// Expansion column for the intercept slot (zero when the model has no
    /// intercept).
    pub gamma_intercept: Array1<f64>,
    /// Residuals feeding the bootstrap.
    pub residuals_for_boot: Array1<f64>,
    /// Per-coordinate scale from the bootstrap replicate spread; filled by
    /// the pipeline after `rsplit_bootstrap` runs.
    pub se: Array1<f64>,
    pub kept_splits: usize,
    pub discarded_splits: usize,
    pub warnings: Vec<String>,
}

fn selector_design(data: &DataSet) -> ModelDesign {
    ModelDesign::build(data, StandardizePolicy::CenterScale, PenaltyScheme::CovariatesOnly)
}

/// Pick a covariate model on `t1` by CV over a support-capped lasso path,
/// honoring the size bounds. Returns X-block indices.
fn select_model(
    data: &DataSet,
    t1: &[usize],
    cfg: &RSplitConfig,
    s_max: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let train = data.subset_rows(t1);
    let design = selector_design(&train);
    let d = ColMatrix::from_array(design.matrix.view());
    let y = train.y.as_slice().expect("contiguous");
    let weights = design.weights.as_slice().expect("contiguous");

    let lmax = lasso::lambda_max(&d, y, weights)?;
    if lmax <= 0.0 {
        // Nothing correlates with the residual signal; the empty model is
        // the only candidate.
        return if cfg.s_min == 0 {
            Ok(Vec::new())
        } else {
            Err(Error::numerical("selector: no covariate enters the path"))
        };
    }
    let grid = LambdaGrid::log_spaced(lmax, cfg.selector_grid_len, 1e-3);
    let full_path = lasso::solve_path(&d, y, weights, &grid.values, &cfg.opts, Some(s_max))?;

    let candidates: Vec<usize> = full_path
        .iter()
        .enumerate()
        .filter(|(_, p)| p.support >= cfg.s_min && p.support <= s_max)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(Error::numerical(format!(
            "selector: no path point with support in [{}, {}]",
            cfg.s_min, s_max
        )));
    }
    let eval_grid: Vec<f64> = full_path.iter().map(|p| p.lambda).collect();

    let n_t1 = t1.len();
    let ids = FoldSpec::Seeded {
        k: cfg.selector_folds,
    }
    .assign(n_t1, seed)?;
    let k = cfg.selector_folds;
    let mut errors = vec![vec![f64::NAN; k]; eval_grid.len()];
    for fold in 0..k {
        let tr: Vec<usize> = (0..n_t1).filter(|&i| ids[i] != fold).collect();
        let te: Vec<usize> = (0..n_t1).filter(|&i| ids[i] == fold).collect();
        let d_tr = d.subset_rows(&tr);
        let y_tr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
        let d_te = d.subset_rows(&te);
        let y_te: Vec<f64> = te.iter().map(|&i| y[i]).collect();
        let path = lasso::solve_path(&d_tr, &y_tr, weights, &eval_grid, &cfg.opts, None)?;
        for (li, point) in path.iter().enumerate() {
            let pred = d_te.predict(point.coefs.as_slice().expect("contiguous"));
            let mse = y_te
                .iter()
                .zip(pred.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / y_te.len() as f64;
            errors[li][fold] = mse;
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for &li in &candidates {
        let errs = &errors[li];
        if errs.iter().any(|e| e.is_nan()) {
            continue;
        }
        let mean = linalg::mean(errs);
        match best {
            Some((_, b)) if mean >= b => {}
            _ => best = Some((li, mean)),
        }
    }
    let (chosen, _) = best.ok_or_else(|| Error::numerical("selector: CV produced no usable candidate"))?;
    let design_offset = design.layout.x_start;
    let support: Vec<usize> = full_path[chosen]
        .coefs
        .iter()
        .enumerate()
        .filter(|&(j, &c)| j >= design_offset && c != 0.0)
        .map(|(j, _)| j - design_offset)
        .collect();
    Ok(support)
}

/// Refit OLS of y on `[1?, Z, X_M]` over the T2 rows and extract the Z rows
/// of the inverse Gram.
fn refit_split(
    data: &DataSet,
    t2: &[usize],
    model: &[usize],
    split_id: usize,
    t1: Vec<usize>,
) -> Result<SplitFit> {
    let n2 = t2.len();
    let p1 = data.p1();
    let with_intercept = data.intercept_policy == InterceptPolicy::IncludeUnpenalized;
    let offset = usize::from(with_intercept);
    let k = offset + p1 + model.len();
    if n2 <= k {
        return Err(Error::numerical(format!(
            "refit needs more rows than columns (n2={n2}, k={k})"
        )));
    }
    let mut w = Array2::<f64>::zeros((n2, k));
    for (r, &i) in t2.iter().enumerate() {
        if with_intercept {
            w[[r, 0]] = 1.0;
        }
        for j in 0..p1 {
            w[[r, offset + j]] = data.z[[i, j]];
        }
        for (a, &m) in model.iter().enumerate() {
            w[[r, offset + p1 + a]] = data.x[[i, m]];
        }
    }
    let y2 = Array1::from_iter(t2.iter().map(|&i| data.y[i]));
    let gram = w.t().dot(&w) / n2 as f64;
    let g_inv = linalg::inv_spd(&gram, 1e-10)?;
    let rhs = w.t().dot(&y2) / n2 as f64;
    let coefs = g_inv.dot(&rhs);

    let refit_intercept = if with_intercept { coefs[0] } else { 0.0 };
    let refit_b = Array1::from_iter((0..p1).map(|j| coefs[offset + j]));
    let refit_gamma = Array1::from_iter((0..model.len()).map(|a| coefs[offset + p1 + a]));

    let mut gamma_intercept = Array1::<f64>::zeros(p1);
    let mut gamma_z = Array2::<f64>::zeros((p1, p1));
    let mut gamma_x = Vec::with_capacity(model.len());
    for j in 0..p1 {
        let row = g_inv.row(offset + j);
        if with_intercept {
            gamma_intercept[j] = row[0];
        }
        for b in 0..p1 {
            gamma_z[[j, b]] = row[offset + b];
        }
    }
    for (a, &m) in model.iter().enumerate() {
        let col = Array1::from_iter((0..p1).map(|j| g_inv[[offset + j, offset + p1 + a]]));
        gamma_x.push((m, col));
    }
    Ok(SplitFit {
        record: SplitRecord {
            split_id,
            t1,
            t2: t2.to_vec(),
            selected_model: model.to_vec(),
            refit_intercept,
            refit_b,
            refit_gamma,
        },
        gamma_intercept,
        gamma_z,
        gamma_x,
    })
}

enum SplitOutcome {
    Kept(Box<SplitFit>),
    Discarded(String),
}

/// Aggregate kept splits in split-id order so the result is independent of
/// evaluation order.
fn aggregate(fits: &mut Vec<SplitFit>, p1: usize, p2: usize) -> (Array1<f64>, Array2<f64>, Array1<f64>) {
    fits.sort_by_key(|f| f.record.split_id);
    let kept = fits.len() as f64;
    let mut b_tilde = Array1::<f64>::zeros(p1);
    let mut gamma_tilde = Array2::<f64>::zeros((p1, p1 + p2));
    let mut gamma_intercept = Array1::<f64>::zeros(p1);
    for fit in fits.iter() {
        b_tilde += &fit.record.refit_b;
        gamma_intercept += &fit.gamma_intercept;
        for j in 0..p1 {
            for b in 0..p1 {
                gamma_tilde[[j, b]] += fit.gamma_z[[j, b]];
            }
        }
        for (m, col) in &fit.gamma_x {
            for j in 0..p1 {
                gamma_tilde[[j, p1 + m]] += col[j];
            }
        }
    }
    b_tilde /= kept;
    gamma_tilde /= kept;
    gamma_intercept /= kept;
    (b_tilde, gamma_tilde, gamma_intercept)
}

fn residuals_full_lasso(data: &DataSet, cfg: &RSplitConfig, seed: u64) -> Result<Array1<f64>> {
    let design = ModelDesign::build(data, StandardizePolicy::CenterScale, PenaltyScheme::All);
    let d = ColMatrix::from_array(design.matrix.view());
    let y = data.y.as_slice().expect("contiguous");
    let weights = design.weights.as_slice().expect("contiguous");
    let lambda = match cfg.residual_lambda {
        GridSelection::Fixed(l) => l,
        _ => {
            let grid = LambdaGrid::default_for(&d, y, weights)?;
            let cv = lasso::cv_lambda(
                &d,
                y,
                weights,
                &FoldSpec::Seeded { k: 5 },
                &grid,
                rng::derive_seed(seed, rng::stream::CV_FOLDS, 1),
                &cfg.opts,
            )?;
            match cfg.residual_lambda {
                GridSelection::MinCv => cv.lambda_min,
                GridSelection::ScaledOneSe(f) => f * cv.lambda_1se,
                _ => cv.lambda_1se,
            }
        }
    };
    let fit = lasso::fit_lasso(&d, y, lambda, weights, &cfg.opts, None)?;
    let scale = crate::debiased::residual_scale_factor(data.n(), fit.active_set.len());
    Ok(fit.residuals.mapv(|v| scale * v))
}

/// Run the splitting estimator and assemble the expansion artifacts.
pub fn rsplit_estimate(data: &DataSet, cfg: &RSplitConfig, seed: u64) -> Result<RSplitEstimate> {
    let n = data.n();
    let p1 = data.p1();
    let p2 = data.p2();
    if !(cfg.split_fraction > 0.0 && cfg.split_fraction < 1.0) {
        return Err(Error::config(format!(
            "split_fraction must lie strictly inside (0, 1), got {}",
            cfg.split_fraction
        )));
    }
    if cfg.splits == 0 {
        return Err(Error::config("need at least one split"));
    }
    let n2 = ((n as f64) * cfg.split_fraction).round() as usize;
    let n2 = n2.clamp(1, n - 1);
    let n1 = n - n2;
    let s_max = cfg.s_max.unwrap_or_else(|| (n2 / 4).max(cfg.s_min));
    if s_max < cfg.s_min {
        return Err(Error::config(format!(
            "model-size bounds inverted: s_min={} > s_max={s_max}",
            cfg.s_min
        )));
    }
    let with_intercept = usize::from(data.intercept_policy == InterceptPolicy::IncludeUnpenalized);
    if n2 <= p1 + s_max + with_intercept {
        return Err(Error::config(format!(
            "refit half too small: n2={n2} must exceed p1 + s_max (+intercept) = {}",
            p1 + s_max + with_intercept
        )));
    }
    let mut warnings = Vec::new();
    if p1 > 25 {
        warnings.push(format!(
            "p1={p1}: the splitting estimator targets a small, fixed subgroup count"
        ));
    }

    let outcomes: Vec<SplitOutcome> = (0..cfg.splits)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::derived_rng(seed, rng::stream::SPLIT, b as u64);
            let perm = rng::permutation(n, &mut rng);
            let t2: Vec<usize> = {
                let mut v = perm[..n2].to_vec();
                v.sort_unstable();
                v
            };
            let t1: Vec<usize> = {
                let mut v = perm[n2..].to_vec();
                v.sort_unstable();
                v
            };
            debug_assert_eq!(t1.len(), n1);
            let selector_seed = rng::derive_seed(seed, rng::stream::SELECTOR, b as u64);
            let model = match select_model(data, &t1, cfg, s_max, selector_seed) {
                Ok(m) => m,
                Err(e) => return SplitOutcome::Discarded(format!("split {b}: {e}")),
            };
            match refit_split(data, &t2, &model, b, t1) {
                Ok(fit) => SplitOutcome::Kept(Box::new(fit)),
                Err(e) => SplitOutcome::Discarded(format!("split {b}: {e}")),
            }
        })
        .collect();

    let mut fits = Vec::new();
    let mut discarded = Vec::new();
    for outcome in outcomes {
        match outcome {
            SplitOutcome::Kept(f) => fits.push(*f),
            SplitOutcome::Discarded(msg) => discarded.push(msg),
        }
    }
    if fits.is_empty() {
        return Err(Error::numerical(format!(
            "all {} splits were discarded; first failure: {}",
            cfg.splits,
            discarded.first().map(String::as_str).unwrap_or("unknown")
        )));
    }
    let discarded_splits = discarded.len();
    if discarded_splits > 0 {
        warnings.push(format!(
            "{discarded_splits}/{} splits discarded (first: {})",
            cfg.splits, discarded[0]
        ));
    }

    let (b_tilde, gamma_tilde, gamma_intercept) = aggregate(&mut fits, p1, p2);

    let residuals_for_boot = match cfg.residual_source {
        ResidualSource::FullSampleLasso => residuals_full_lasso(data, cfg, seed)?,
        ResidualSource::SplitAverage => {
            let mut pred_sum = vec![0.0f64; n];
            for fit in &fits {
                for i in 0..n {
                    let mut v = fit.record.refit_intercept;
                    for j in 0..p1 {
                        v += data.z[[i, j]] * fit.record.refit_b[j];
                    }
                    for (a, &m) in fit.record.selected_model.iter().enumerate() {
                        v += data.x[[i, m]] * fit.record.refit_gamma[a];
                    }
                    pred_sum[i] += v;
                }
            }
            let kept = fits.len() as f64;
            Array1::from_iter((0..n).map(|i| data.y[i] - pred_sum[i] / kept))
        }
    };

    Ok(RSplitEstimate {
        b_tilde,
        gamma_tilde,
        gamma_intercept,
        residuals_for_boot,
        se: Array1::zeros(p1),
        kept_splits: fits.len(),
        discarded_splits,
        warnings,
    })
}

/// Run one split deterministically and return its record (exposed for the
/// diagnostics below and for tests).
pub fn run_single_split(
    data: &DataSet,
    cfg: &RSplitConfig,
    seed: u64,
    split_id: usize,
) -> Result<SplitRecord> {
    let n = data.n();
    let n2 = (((n as f64) * cfg.split_fraction).round() as usize).clamp(1, n - 1);
    let s_max = cfg.s_max.unwrap_or_else(|| (n2 / 4).max(cfg.s_min));
    let mut rng = rng::derived_rng(seed, rng::stream::SPLIT, split_id as u64);
    let perm = rng::permutation(n, &mut rng);
    let mut t2 = perm[..n2].to_vec();
    t2.sort_unstable();
    let mut t1 = perm[n2..].to_vec();
    t1.sort_unstable();
    let selector_seed = rng::derive_seed(seed, rng::stream::SELECTOR, split_id as u64);
    let model = select_model(data, &t1, cfg, s_max, selector_seed)?;
    Ok(refit_split(data, &t2, &model, split_id, t1)?.record)
}

/// Fast bootstrap through the linear expansion: each replicate is
/// `b_tilde + Gamma * (1/n) sum_i w_i u_i e_i` with `w_i` the stacked
/// `[1?, Z_i, X_i]` vector and `e_i` the stored residuals. No refitting.
pub fn rsplit_bootstrap(
    est: &RSplitEstimate,
    data: &DataSet,
    b2: usize,
    multiplier: Multiplier,
    seed: u64,
) -> Result<Array2<f64>> {
    if b2 == 0 {
        return Err(Error::config("bootstrap needs B2 >= 1"));
    }
    let n = data.n();
    let p1 = data.p1();
    let p2 = data.p2();
    if est.gamma_tilde.ncols() != p1 + p2 || est.residuals_for_boot.len() != n {
        return Err(Error::config("expansion artifacts do not match the dataset"));
    }
    // Influence rows D_i = e_i * Gamma w_i, built once; replicates are then
    // means of multiplier-weighted rows.
    let nonzero_x: Vec<usize> = (0..p2)
        .filter(|&m| (0..p1).any(|j| est.gamma_tilde[[j, p1 + m]] != 0.0))
        .collect();
    let mut influence = Array2::<f64>::zeros((n, p1));
    for i in 0..n {
        for j in 0..p1 {
            let mut v = est.gamma_intercept[j];
            for b in 0..p1 {
                v += est.gamma_tilde[[j, b]] * data.z[[i, b]];
            }
            for &m in &nonzero_x {
                v += est.gamma_tilde[[j, p1 + m]] * data.x[[i, m]];
            }
            influence[[i, j]] = v * est.residuals_for_boot[i];
        }
    }

    let rows: Vec<Vec<f64>> = (0..b2)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::derived_rng(seed, rng::stream::BOOTSTRAP, b as u64);
            let mut acc = vec![0.0f64; p1];
            for i in 0..n {
                let u = multiplier.sample(&mut rng);
                for j in 0..p1 {
                    acc[j] += u * influence[[i, j]];
                }
            }
            for j in 0..p1 {
                acc[j] = est.b_tilde[j] + acc[j] / n as f64;
            }
            acc
        })
        .collect();

    let mut out = Array2::<f64>::zeros((b2, p1));
    for (b, row) in rows.into_iter().enumerate() {
        for j in 0..p1 {
            out[[b, j]] = row[j];
        }
    }
    Ok(out)
}

/// Per-coordinate sample SD over replicate rows.
pub fn replicate_sd(replicates: &Array2<f64>) -> Array1<f64> {
    let p = replicates.ncols();
    Array1::from_iter((0..p).map(|j| {
        let col: Vec<f64> = replicates.column(j).iter().copied().collect();
        linalg::sample_sd(&col)
    }))
}

/// Ground truth for the simulation-only bias decomposition.
#[derive(Debug, Clone)]
pub struct TrueCoefficients {
    pub beta: Array1<f64>,
    pub gamma: Array1<f64>,
}

/// The exact split-level decomposition of `sqrt(n2) * (refit OLS - beta)`
/// into an overfitting part (noise times inverse Gram) and an underfitting
/// part (unselected signal). Their sum reproduces the estimation error
/// identically.
pub fn fit_diagnostics(
    split: &SplitRecord,
    data: &DataSet,
    truth: &TrueCoefficients,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let p1 = data.p1();
    let t2 = &split.t2;
    let n2 = t2.len();
    let with_intercept = data.intercept_policy == InterceptPolicy::IncludeUnpenalized;
    let offset = usize::from(with_intercept);
    let k_u = offset + split.selected_model.len();

    // U = [1?, X_{T2, M}], the block being projected out.
    let mut u = Array2::<f64>::zeros((n2, k_u));
    for (r, &i) in t2.iter().enumerate() {
        if with_intercept {
            u[[r, 0]] = 1.0;
        }
        for (a, &m) in split.selected_model.iter().enumerate() {
            u[[r, offset + a]] = data.x[[i, m]];
        }
    }
    let residualize = |v: &Array1<f64>| -> Result<Array1<f64>> {
        if k_u == 0 {
            return Ok(v.clone());
        }
        let coef = linalg::ols(u.view(), v.view(), 1e-12)?;
        Ok(v - &u.dot(&coef))
    };

    let mut z2 = Array2::<f64>::zeros((n2, p1));
    for (r, &i) in t2.iter().enumerate() {
        for j in 0..p1 {
            z2[[r, j]] = data.z[[i, j]];
        }
    }
    let mut z_res = Array2::<f64>::zeros((n2, p1));
    for j in 0..p1 {
        let col = z2.column(j).to_owned();
        z_res.column_mut(j).assign(&residualize(&col)?);
    }
    let gram = z_res.t().dot(&z_res) / n2 as f64;
    let g_inv = linalg::inv_spd(&gram, 1e-12)?;
    let apply = |v: &Array1<f64>| -> Array1<f64> {
        let s = z_res.t().dot(v) / n2 as f64;
        g_inv.dot(&s) * (n2 as f64).sqrt()
    };

    // Signal seen through the projection: the unselected covariate part.
    let mut x_gamma = Array1::<f64>::zeros(n2);
    let mut noise = Array1::<f64>::zeros(n2);
    for (r, &i) in t2.iter().enumerate() {
        let mut xg = 0.0;
        for m in 0..data.p2() {
            xg += data.x[[i, m]] * truth.gamma[m];
        }
        x_gamma[r] = xg;
        let mut zb = 0.0;
        for j in 0..p1 {
            zb += data.z[[i, j]] * truth.beta[j];
        }
        noise[r] = data.y[i] - zb - xg;
    }
    let overfit = apply(&noise);
    let underfit = apply(&x_gamma);
    Ok((overfit, underfit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::Distribution;

    fn simulated(
        seed: u64,
        n: usize,
        p1: usize,
        p2: usize,
        beta: &[f64],
        gamma: &[f64],
        noise: f64,
    ) -> DataSet {
        let mut rng = rng::derived_rng(seed, rng::stream::GENERATE, 1000);
        let normal = rand_distr::StandardNormal;
        let z = Array2::from_shape_fn((n, p1), |_| normal.sample(&mut rng));
        let x = Array2::from_shape_fn((n, p2), |_| normal.sample(&mut rng));
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut v = 0.5;
            for j in 0..p1 {
                v += z[[i, j]] * beta[j];
            }
            for j in 0..p2 {
                v += x[[i, j]] * gamma[j];
            }
            let e: f64 = normal.sample(&mut rng);
            y[i] = v + noise * e;
        }
        DataSet::new(
            y,
            z,
            x,
            "y".into(),
            (0..p1).map(|j| format!("z{j}")).collect(),
            (0..p2).map(|j| format!("x{j}")).collect(),
            InterceptPolicy::IncludeUnpenalized,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_split_fraction_is_rejected() {
        let data = simulated(1, 60, 1, 4, &[0.5], &[0.0; 4], 0.5);
        let cfg = RSplitConfig {
            split_fraction: 1.0,
            ..RSplitConfig::default()
        };
        assert!(rsplit_estimate(&data, &cfg, 0).is_err());
        let cfg = RSplitConfig {
            split_fraction: 0.0,
            ..RSplitConfig::default()
        };
        assert!(rsplit_estimate(&data, &cfg, 0).is_err());
    }

    #[test]
    fn empty_selector_matches_ols_on_refit_half() {
        // gamma = 0 and a selector forced to the empty model: the estimate
        // must equal the average of per-split OLS(Y ~ 1 + Z on T2).
        let data = simulated(3, 80, 1, 3, &[0.7], &[0.0; 3], 0.4);
        let cfg = RSplitConfig {
            splits: 40,
            s_min: 0,
            s_max: Some(0),
            residual_source: ResidualSource::SplitAverage,
            ..RSplitConfig::default()
        };
        let est = rsplit_estimate(&data, &cfg, 11).unwrap();
        assert_eq!(est.kept_splits, 40);

        let mut manual_sum = 0.0;
        let mut split_estimates = Vec::new();
        for b in 0..40 {
            let rec = run_single_split(&data, &cfg, 11, b).unwrap();
            let t2 = &rec.t2;
            let mut design = Array2::<f64>::zeros((t2.len(), 2));
            for (r, &i) in t2.iter().enumerate() {
                design[[r, 0]] = 1.0;
                design[[r, 1]] = data.z[[i, 0]];
            }
            let y2 = Array1::from_iter(t2.iter().map(|&i| data.y[i]));
            let coef = linalg::ols(design.view(), y2.view(), 1e-12).unwrap();
            manual_sum += coef[1];
            split_estimates.push(coef[1]);
            assert!(rec.selected_model.is_empty());
        }
        assert_abs_diff_eq!(est.b_tilde[0], manual_sum / 40.0, epsilon = 1e-10);

        // With many splits the average approaches the full-sample OLS of
        // y on (1, Z) within 3 Monte Carlo SEs of the split average.
        let n = data.n();
        let mut full = Array2::<f64>::zeros((n, 2));
        for i in 0..n {
            full[[i, 0]] = 1.0;
            full[[i, 1]] = data.z[[i, 0]];
        }
        let full_ols = linalg::ols(full.view(), data.y.view(), 1e-12).unwrap()[1];
        let mc_se = linalg::sample_sd(&split_estimates) / (split_estimates.len() as f64).sqrt();
        assert!(
            (est.b_tilde[0] - full_ols).abs() <= 3.0 * mc_se,
            "split average {} vs full OLS {full_ols} (MC se {mc_se})",
            est.b_tilde[0]
        );
    }

    #[test]
    fn zero_residuals_collapse_the_bootstrap() {
        let data = simulated(5, 70, 2, 4, &[0.5, -0.2], &[0.3, 0.0, 0.0, 0.0], 0.4);
        let cfg = RSplitConfig {
            splits: 10,
            ..RSplitConfig::default()
        };
        let mut est = rsplit_estimate(&data, &cfg, 21).unwrap();
        est.residuals_for_boot.fill(0.0);
        let reps = rsplit_bootstrap(&est, &data, 8, Multiplier::Rademacher, 3).unwrap();
        for b in 0..8 {
            for j in 0..2 {
                assert_abs_diff_eq!(reps[[b, j]], est.b_tilde[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_expansion_collapses_the_bootstrap() {
        let data = simulated(6, 70, 2, 4, &[0.5, -0.2], &[0.3, 0.0, 0.0, 0.0], 0.4);
        let cfg = RSplitConfig {
            splits: 10,
            ..RSplitConfig::default()
        };
        let mut est = rsplit_estimate(&data, &cfg, 23).unwrap();
        est.gamma_tilde.fill(0.0);
        est.gamma_intercept.fill(0.0);
        let reps = rsplit_bootstrap(&est, &data, 8, Multiplier::Gaussian, 5).unwrap();
        for b in 0..8 {
            for j in 0..2 {
                assert_abs_diff_eq!(reps[[b, j]], est.b_tilde[j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bootstrap_linearity_in_the_residual_scale() {
        let data = simulated(7, 70, 2, 4, &[0.5, 0.0], &[0.3, 0.0, 0.0, 0.0], 0.4);
        let cfg = RSplitConfig {
            splits: 10,
            ..RSplitConfig::default()
        };
        let est = rsplit_estimate(&data, &cfg, 29).unwrap();
        let mut scaled = est.clone();
        scaled.residuals_for_boot = est.residuals_for_boot.mapv(|v| 3.0 * v);
        let a = rsplit_bootstrap(&est, &data, 16, Multiplier::Rademacher, 77).unwrap();
        let b = rsplit_bootstrap(&scaled, &data, 16, Multiplier::Rademacher, 77).unwrap();
        for bi in 0..16 {
            for j in 0..2 {
                let da = a[[bi, j]] - est.b_tilde[j];
                let db = b[[bi, j]] - est.b_tilde[j];
                assert_abs_diff_eq!(db, 3.0 * da, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn never_selected_covariates_have_zero_expansion_columns() {
        let data = simulated(9, 90, 1, 8, &[0.6], &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.5);
        let cfg = RSplitConfig {
            splits: 25,
            s_min: 1,
            s_max: Some(3),
            ..RSplitConfig::default()
        };
        let est = rsplit_estimate(&data, &cfg, 41).unwrap();
        let mut selected_any = vec![false; 8];
        for b in 0..25 {
            if let Ok(rec) = run_single_split(&data, &cfg, 41, b) {
                for &m in &rec.selected_model {
                    selected_any[m] = true;
                }
                assert!(!rec.selected_model.is_empty() && rec.selected_model.len() <= 3);
            }
        }
        for m in 0..8 {
            if !selected_any[m] {
                assert_eq!(est.gamma_tilde[[0, 1 + m]], 0.0);
            }
        }
    }

    #[test]
    fn diagnostics_sum_identity_and_vanishing_terms() {
        let n = 60;
        let data = simulated(13, n, 2, 5, &[0.4, -0.3], &[0.8, -0.6, 0.0, 0.0, 0.0], 0.5);
        let truth = TrueCoefficients {
            beta: ndarray::array![0.4, -0.3],
            gamma: ndarray::array![0.8, -0.6, 0.0, 0.0, 0.0],
        };
        let cfg = RSplitConfig {
            splits: 4,
            s_min: 2,
            s_max: Some(4),
            ..RSplitConfig::default()
        };
        let rec = run_single_split(&data, &cfg, 55, 0).unwrap();
        let (overfit, underfit) = fit_diagnostics(&rec, &data, &truth).unwrap();
        let n2 = rec.t2.len() as f64;
        for j in 0..2 {
            let direct = n2.sqrt() * (rec.refit_b[j] - truth.beta[j]);
            assert_abs_diff_eq!(overfit[j] + underfit[j], direct, epsilon = 1e-8);
        }
        // A model covering the support of gamma has no underfitting bias.
        if rec.selected_model.contains(&0) && rec.selected_model.contains(&1) {
            for j in 0..2 {
                assert_abs_diff_eq!(underfit[j], 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn noiseless_data_has_no_overfitting_bias() {
        let data = simulated(17, 60, 1, 4, &[0.5], &[1.0, 0.0, 0.0, 0.0], 0.0);
        let truth = TrueCoefficients {
            beta: ndarray::array![0.5],
            gamma: ndarray::array![1.0, 0.0, 0.0, 0.0],
        };
        let cfg = RSplitConfig {
            splits: 2,
            s_min: 1,
            s_max: Some(3),
            ..RSplitConfig::default()
        };
        let rec = run_single_split(&data, &cfg, 61, 1).unwrap();
        let (overfit, _) = fit_diagnostics(&rec, &data, &truth).unwrap();
        assert_abs_diff_eq!(overfit[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn aggregation_is_invariant_to_split_order() {
        let data = simulated(19, 70, 2, 5, &[0.4, 0.0], &[0.7, 0.0, 0.0, 0.0, 0.0], 0.5);
        let cfg = RSplitConfig {
            splits: 12,
            ..RSplitConfig::default()
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| rsplit_estimate(&data, &cfg, 101).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.b_tilde, b.b_tilde);
        assert_eq!(a.gamma_tilde, b.gamma_tilde);
    }
}
