//! De-sparsified Lasso coordinates for the subgroup block.
//!
//! Each subgroup column is residualized on everything else by a nodewise
//! lasso; the normalized residual direction turns penalized coefficients
//! into asymptotically normal one-step estimates, and a wild multiplier
//! bootstrap (fixed design, resampled residuals) replicates them.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::data::ModelDesign;
use crate::error::{Error, Result};
use crate::lasso::{self, ColMatrix, FitOptions, FoldSpec, LambdaGrid, LassoFit};
use crate::rng::{self, Multiplier};

/// How the nodewise penalty level is chosen for each subgroup column.
#[derive(Debug, Clone)]
pub enum NodewiseLambda {
    /// Per-column K-fold CV, one-SE rule.
    CvOneSe { folds: usize },
    /// Per-column K-fold CV at the curve minimum (less shrinkage, better
    /// decorrelation on small samples).
    CvMin { folds: usize },
    /// One fixed value for every column.
    Fixed(f64),
    /// No penalty: exact least-squares residualization (needs p < n).
    Zero,
}

impl Default for NodewiseLambda {
    fn default() -> Self {
        NodewiseLambda::CvOneSe { folds: 3 }
    }
}

/// Residualization directions for the subgroup block.
#[derive(Debug, Clone)]
pub struct NodewiseProjection {
    /// Normalized directions, `ztilde_j = v_j / (v_j' z_j)`, one column per
    /// subgroup coordinate.
    pub ztilde: Array2<f64>,
    /// Raw nodewise residuals `v_j`.
    pub v: Array2<f64>,
    /// Nodewise coefficient vectors (over the remaining design columns).
    pub zeta: Vec<Array1<f64>>,
    /// Penalty level used per column.
    pub lambda_node: Vec<f64>,
}

impl NodewiseProjection {
    pub fn p1(&self) -> usize {
        self.ztilde.ncols()
    }

    /// Order-insensitive content hash, used to assert the projection is
    /// bit-identical when shared across bootstrap replicates.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for v in self.ztilde.iter() {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Residualize every subgroup column on the rest of the design.
///
/// The design's intercept column (when present) stays unpenalized in each
/// nodewise regression; all other columns are penalized at unit weight.
pub fn nodewise_residualize(
    design: &ModelDesign,
    policy: &NodewiseLambda,
    opts: &FitOptions,
    seed: u64,
) -> Result<NodewiseProjection> {
    let p1 = design.layout.p1;
    if p1 == 0 {
        return Err(Error::config("nodewise residualization needs p1 >= 1"));
    }
    let full = ColMatrix::from_array(design.matrix.view());
    let n = full.nrows();

    let per_column: Vec<Result<(Array1<f64>, Array1<f64>, Array1<f64>, f64)>> = (0..p1)
        .into_par_iter()
        .map(|j| {
            let target_col = design.layout.z_index(j);
            let reduced = full.without_column(target_col);
            let target: Vec<f64> = full.col(target_col).to_vec();
            // Scale-matched penalties as in the main fit (intercept free);
            // free subgroup columns still get penalized here.
            let mut weights: Vec<f64> = (0..design.matrix.ncols())
                .filter(|&c| c != target_col)
                .map(|c| {
                    if Some(c) == design.layout.intercept {
                        0.0
                    } else if design.weights[c] > 0.0 {
                        design.weights[c]
                    } else {
                        1.0
                    }
                })
                .collect();
            if let Some(ic) = design.layout.intercept {
                // The intercept sits before the Z block, so dropping a Z
                // column never shifts its index.
                weights[ic] = 0.0;
            }
            let lambda = match policy {
                NodewiseLambda::Fixed(l) => *l,
                NodewiseLambda::Zero => 0.0,
                NodewiseLambda::CvOneSe { folds } | NodewiseLambda::CvMin { folds } => {
                    let grid = LambdaGrid::default_for(&reduced, &target, &weights)?;
                    let cv = lasso::cv_lambda(
                        &reduced,
                        &target,
                        &weights,
                        &FoldSpec::Seeded { k: *folds },
                        &grid,
                        rng::derive_seed(seed, rng::stream::NODEWISE, j as u64),
                        opts,
                    )?;
                    if matches!(policy, NodewiseLambda::CvOneSe { .. }) {
                        cv.lambda_1se
                    } else {
                        cv.lambda_min
                    }
                }
            };
            let fit = lasso::fit_lasso(&reduced, &target, lambda, &weights, opts, None)?;
            let v = fit.residuals.clone();
            let norm2 = v.dot(&v) / n as f64;
            if norm2 <= 0.0 {
                return Err(Error::numerical(format!(
                    "nodewise residual for subgroup column {j} has zero norm"
                )));
            }
            let denom = v
                .iter()
                .zip(target.iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
            if denom.abs() <= 1e-12 {
                return Err(Error::DegenerateProjection {
                    column: j,
                    inner_product: denom,
                });
            }
            let ztilde = v.mapv(|t| t / denom);
            Ok((ztilde, v, fit.coefs, lambda))
        })
        .collect();

    let mut ztilde = Array2::<f64>::zeros((n, p1));
    let mut v = Array2::<f64>::zeros((n, p1));
    let mut zeta = Vec::with_capacity(p1);
    let mut lambda_node = Vec::with_capacity(p1);
    for (j, res) in per_column.into_iter().enumerate() {
        let (zt, vj, z, l) = res?;
        ztilde.column_mut(j).assign(&zt);
        v.column_mut(j).assign(&vj);
        zeta.push(z);
        lambda_node.push(l);
    }
    Ok(NodewiseProjection {
        ztilde,
        v,
        zeta,
        lambda_node,
    })
}

/// One-step corrected subgroup estimates with per-coordinate scales.
#[derive(Debug, Clone)]
pub struct DebiasedEstimate {
    /// Corrected coordinates `b_hat_j`.
    pub b_hat: Array1<f64>,
    /// Standard errors in response units: `sigma_eps * ||ztilde_j||_2`.
    pub se: Array1<f64>,
    /// Residual variance estimate from the source fit.
    pub sigma_eps2: f64,
}

/// Residual variance `||residuals||^2 / (n - df_proxy)`.
pub fn estimate_noise(residuals: &Array1<f64>, df_proxy: usize) -> Result<f64> {
    let n = residuals.len();
    if n <= df_proxy {
        return Err(Error::config(format!(
            "noise estimate needs n > df_proxy (n={n}, df={df_proxy})"
        )));
    }
    Ok(residuals.dot(residuals) / (n - df_proxy) as f64)
}

/// Apply the one-step correction to a penalized fit.
pub fn debias(
    fit: &LassoFit,
    proj: &NodewiseProjection,
    design: &ModelDesign,
) -> Result<DebiasedEstimate> {
    let p1 = design.layout.p1;
    if proj.p1() != p1 {
        return Err(Error::config("projection width does not match the design"));
    }
    if fit.residuals.len() != proj.ztilde.nrows() {
        return Err(Error::config("fit and projection row counts differ"));
    }
    let n = fit.residuals.len();
    let df = fit.active_set.len().min(n - 1);
    let sigma_eps2 = estimate_noise(&fit.residuals, df)?;
    let sigma = sigma_eps2.sqrt();
    let mut b_hat = Array1::<f64>::zeros(p1);
    let mut se = Array1::<f64>::zeros(p1);
    for j in 0..p1 {
        let beta_j = fit.coefs[design.layout.z_index(j)];
        let zt = proj.ztilde.column(j);
        b_hat[j] = beta_j + zt.dot(&fit.residuals);
        se[j] = sigma * zt.dot(&zt).sqrt();
    }
    Ok(DebiasedEstimate {
        b_hat,
        se,
        sigma_eps2,
    })
}

/// Degrees-of-freedom inflation for resampled residuals, so the bootstrap
/// noise level agrees with the df-corrected variance estimate.
pub fn residual_scale_factor(n: usize, df: usize) -> f64 {
    let df = df.min(n - 1);
    (n as f64 / (n - df) as f64).sqrt()
}

/// Wild bootstrap of the debiased coordinates: regenerate responses from the
/// penalized fit plus multiplier-scaled residuals, refit at the same lambda
/// (warm-started), and re-apply the correction with the SAME projection.
/// Residuals are inflated by the fit's degrees of freedom before resampling.
///
/// Rows are deterministic functions of `(seed, row)`; worker count cannot
/// change the output.
#[allow(clippy::too_many_arguments)]
pub fn wild_bootstrap_debiased(
    fit: &LassoFit,
    proj: &NodewiseProjection,
    design: &ModelDesign,
    y: &Array1<f64>,
    b_boot: usize,
    multiplier: Multiplier,
    seed: u64,
    opts: &FitOptions,
) -> Result<Array2<f64>> {
    if b_boot == 0 {
        return Err(Error::config("bootstrap needs B >= 1"));
    }
    let n = y.len();
    let p1 = design.layout.p1;
    let full = ColMatrix::from_array(design.matrix.view());
    let weights = design.weights.as_slice().expect("contiguous");
    let fitted: Vec<f64> = (0..n).map(|i| y[i] - fit.residuals[i]).collect();
    let noise_scale = residual_scale_factor(n, fit.active_set.len());

    let rows: Vec<Result<Vec<f64>>> = (0..b_boot)
        .into_par_iter()
        .map(|b| {
            let mut attempt = 0u64;
            loop {
                let mut rng =
                    rng::derived_rng(seed, rng::stream::BOOTSTRAP, b as u64 | (attempt << 48));
                let mut y_star = vec![0.0; n];
                for i in 0..n {
                    y_star[i] =
                        fitted[i] + multiplier.sample(&mut rng) * noise_scale * fit.residuals[i];
                }
                match lasso::fit_lasso(&full, &y_star, fit.lambda, weights, opts, Some(&fit.coefs))
                {
                    Ok(refit) => {
                        let mut row = vec![0.0; p1];
                        for j in 0..p1 {
                            let beta_j = refit.coefs[design.layout.z_index(j)];
                            let corr = proj.ztilde.column(j).dot(&refit.residuals);
                            row[j] = beta_j + corr;
                        }
                        return Ok(row);
                    }
                    Err(Error::NonConvergence { kkt_violation, .. }) if attempt < 3 => {
                        attempt += 1;
                        let _ = kkt_violation;
                        continue;
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();

    let mut out = Array2::<f64>::zeros((b_boot, p1));
    for (b, row) in rows.into_iter().enumerate() {
        let row = row.map_err(|e| {
            Error::numerical(format!("bootstrap replicate {b} failed after retries: {e}"))
        })?;
        for j in 0..p1 {
            out[[b, j]] = row[j];
        }
    }
    Ok(out)
}
