//! Cross-validated choice of the calibration exponent.
//!
//! For each fold and candidate exponent, the training folds produce a
//! bias-reduced estimate of the maximal effect; the held-out fold supplies
//! independent per-coordinate estimates and scales. The squared distance
//! between the two, minus the held-out variance, approximates the mean
//! squared error of the bias-reduced estimator, and the candidate minimizing
//! the best per-coordinate average wins. Ties break toward the smallest
//! exponent. A dimension adjustment `r / sqrt(p1/2)` compensates for wider
//! subgroup blocks.

use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::lasso::FoldSpec;
use crate::linalg;
use crate::pipeline::InferenceConfig;
use crate::rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningResult {
    pub r_cv: f64,
    pub r_star: f64,
    pub candidates: Vec<f64>,
    /// Averaged loss per (candidate, coordinate).
    pub candidate_losses: Vec<Vec<f64>>,
    pub folds: usize,
}

/// Dimension adjustment of a cross-validated exponent, clamped back into
/// the admissible window.
pub fn calibrate_r(r_cv: f64, p1: usize) -> Result<f64> {
    if p1 == 0 {
        return Err(Error::config("p1 must be at least 1"));
    }
    if !(0.0 < r_cv && r_cv < 0.5) {
        return Err(Error::config(format!(
            "r_cv must lie in (0, 0.5), got {r_cv}"
        )));
    }
    let adjusted = r_cv / (p1 as f64 / 2.0).sqrt();
    Ok(adjusted.min(0.5 - 1e-9))
}

/// Selection rule over a frozen loss matrix: the candidate minimizing the
/// best per-coordinate averaged loss, ties toward the smallest exponent.
pub fn select_from_losses(losses: &[Vec<f64>], candidates: &[f64]) -> Result<f64> {
    if losses.len() != candidates.len() || candidates.is_empty() {
        return Err(Error::config("loss matrix does not match the candidate set"));
    }
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    for (l, row) in losses.iter().enumerate() {
        let inner = row.iter().copied().fold(f64::INFINITY, f64::min);
        if inner < best_val {
            best_val = inner;
            best_idx = l;
        }
    }
    Ok(candidates[best_idx])
}

/// v-fold cross-validation of the calibration exponent for the configured
/// pipeline. Deterministic under `seed`.
pub fn cross_validate_r(
    data: &DataSet,
    candidates: &[f64],
    v: usize,
    cfg: &InferenceConfig,
    b_inner: usize,
    seed: u64,
) -> Result<TuningResult> {
    if candidates.is_empty() {
        return Err(Error::config("candidate set for r is empty"));
    }
    for w in candidates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::config("candidate exponents must be strictly ascending"));
        }
    }
    if candidates
        .iter()
        .any(|&r| !(0.0 < r && r < 0.5))
    {
        return Err(Error::config("candidate exponents must lie in (0, 0.5)"));
    }
    if v < 2 {
        return Err(Error::config("tuning needs at least 2 folds"));
    }
    let n = data.n();
    let p1 = data.p1();
    if n < 2 * v {
        return Err(Error::config(format!(
            "tuning needs n >= 2v (n={n}, v={v}); use fewer folds"
        )));
    }
    let ids = FoldSpec::Seeded { k: v }.assign(n, rng::derive_seed(seed, rng::stream::TUNING, 0))?;

    let mut inner_cfg = cfg.clone();
    inner_cfg.b = b_inner.max(1);

    let m = candidates.len();
    // reduced[l][j]: bias-reduced max on the training folds of fold j.
    let mut reduced = vec![vec![0.0f64; v]; m];
    // h[l][i][j] accumulated into losses later.
    let mut h = vec![vec![vec![0.0f64; v]; p1]; m];

    for fold in 0..v {
        let train_rows: Vec<usize> = (0..n).filter(|&i| ids[i] != fold).collect();
        let ref_rows: Vec<usize> = (0..n).filter(|&i| ids[i] == fold).collect();
        let train = data.subset_rows(&train_rows);
        let reference = data.subset_rows(&ref_rows);

        let train_out = crate::pipeline::run_estimator(
            &train,
            &inner_cfg,
            rng::derive_seed(seed, rng::stream::TUNING, 1000 + fold as u64),
        )
        .map_err(|e| {
            Error::numerical(format!(
                "tuning fold {fold} too small to fit ({e}); use fewer folds"
            ))
        })?;
        let point_raw = train_out
            .estimates
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);

        for (l, &r) in candidates.iter().enumerate() {
            let c = calibration::calibration_terms(&train_out.anchor, train.n(), r)?;
            let t_star = calibration::modified_max_replicates(
                train_out.replicates.view(),
                c.view(),
                train_out.anchor.anchor_max,
            )?;
            reduced[l][fold] = point_raw - linalg::mean(&t_star);
        }

        let ref_out = crate::pipeline::run_estimator(
            &reference,
            &inner_cfg,
            rng::derive_seed(seed, rng::stream::TUNING, 2000 + fold as u64),
        )
        .map_err(|e| {
            Error::numerical(format!(
                "tuning fold {fold} too small to fit ({e}); use fewer folds"
            ))
        })?;
        for l in 0..m {
            for i in 0..p1 {
                let diff = reduced[l][fold] - ref_out.estimates[i];
                h[l][i][fold] = diff * diff - ref_out.se[i] * ref_out.se[i];
            }
        }
    }

    let mut candidate_losses = vec![vec![0.0f64; p1]; m];
    for l in 0..m {
        for i in 0..p1 {
            candidate_losses[l][i] = h[l][i].iter().sum::<f64>() / v as f64;
        }
    }
    let r_cv = select_from_losses(&candidate_losses, candidates)?;
    let r_star = calibrate_r(r_cv, p1)?;
    Ok(TuningResult {
        r_cv,
        r_star,
        candidates: candidates.to_vec(),
        candidate_losses,
        folds: v,
    })
}
