//! End-to-end estimator runs shared by the Monte Carlo harness, the tuning
//! loop, and the CLI: build the design, pick the penalty level, fit, and
//! produce bootstrap replicates ready for calibration.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::calibration::{AnchorEstimates, AnchorSource};
use crate::data::{DataSet, ModelDesign, PenaltyScheme, StandardizePolicy};
use crate::debiased::{self, NodewiseLambda};
use crate::error::{Error, Result};
use crate::lasso::{self, ColMatrix, FitOptions, FoldSpec, GridSelection, LambdaGrid, LassoFit};
use crate::rng::{self, Multiplier};
use crate::rsplit::{self, RSplitConfig};
use crate::tuning::{self, TuningResult};

/// Which estimation route to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineMethod {
    Debiased,
    Rsplit,
}

impl PipelineMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "debiased" => Some(PipelineMethod::Debiased),
            "rsplit" | "r-split" => Some(PipelineMethod::Rsplit),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PipelineMethod::Debiased => "debiased",
            PipelineMethod::Rsplit => "rsplit",
        }
    }
}

/// How the calibration exponent is chosen.
#[derive(Debug, Clone)]
pub enum RChoice {
    Fixed(f64),
    Auto(TuneSettings),
}

#[derive(Debug, Clone)]
pub struct TuneSettings {
    /// Ascending candidate exponents inside (0, 0.5).
    pub candidates: Vec<f64>,
    pub folds: usize,
    /// Bootstrap budget for the inner bias-reduced estimates.
    pub b_inner: usize,
}

impl Default for TuneSettings {
    fn default() -> Self {
        // 1/30 < 1/27 < ... < 1/3.
        let mut candidates: Vec<f64> = (1..=10).map(|k| 1.0 / (3.0 * k as f64)).collect();
        candidates.reverse();
        TuneSettings {
            candidates,
            folds: 3,
            b_inner: 100,
        }
    }
}

/// Full estimator + bootstrap settings for one inference run.
#[derive(Debug, Clone)]
pub struct InferenceConfig {
    pub method: PipelineMethod,
    /// Bootstrap replicates feeding the calibration (B, or B2 for the
    /// splitting route).
    pub b: usize,
    pub multiplier: Multiplier,
    pub r: RChoice,
    /// Penalty rule for the debiased route's model fit.
    pub lambda: GridSelection,
    pub cv_folds: usize,
    pub grid_len: usize,
    pub grid_ratio: f64,
    pub nodewise: NodewiseLambda,
    pub rsplit: RSplitConfig,
    pub opts: FitOptions,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            method: PipelineMethod::Debiased,
            b: 200,
            multiplier: Multiplier::Rademacher,
            r: RChoice::Fixed(0.1),
            lambda: GridSelection::OneSe,
            cv_folds: 5,
            grid_len: 100,
            grid_ratio: 1e-3,
            nodewise: NodewiseLambda::CvOneSe { folds: 3 },
            rsplit: RSplitConfig::default(),
            opts: FitOptions::default(),
        }
    }
}

/// Everything calibration needs from an estimator run.
#[derive(Debug, Clone)]
pub struct EstimatorOutput {
    pub method: PipelineMethod,
    /// Point estimates whose maximum is reported (debiased coordinates or
    /// split-averaged estimates).
    pub estimates: Array1<f64>,
    /// Per-coordinate scales (analytic for the debiased route, replicate
    /// spread for the splitting route).
    pub se: Array1<f64>,
    /// Centering vector for the bootstrap replicates.
    pub anchor: AnchorEstimates,
    pub replicates: Array2<f64>,
    pub n: usize,
    pub lambda: Option<f64>,
    pub warnings: Vec<String>,
}

/// Resolve the penalty level for a fit of the full model under a rule.
#[allow(clippy::too_many_arguments)]
pub fn choose_lambda(
    d: &ColMatrix,
    y: &[f64],
    weights: &[f64],
    rule: GridSelection,
    cv_folds: usize,
    grid_len: usize,
    grid_ratio: f64,
    opts: &FitOptions,
    seed: u64,
) -> Result<f64> {
    if let GridSelection::Fixed(l) = rule {
        return Ok(l);
    }
    let lmax = lasso::lambda_max(d, y, weights)?;
    let lmax = if lmax > 0.0 { lmax } else { 1.0 };
    let grid = LambdaGrid::log_spaced(lmax, grid_len, grid_ratio);
    let cv = lasso::cv_lambda(d, y, weights, &FoldSpec::Seeded { k: cv_folds }, &grid, seed, opts)?;
    let lambda = match rule {
        GridSelection::MinCv => cv.lambda_min,
        GridSelection::OneSe => cv.lambda_1se,
        GridSelection::ScaledOneSe(f) => f * cv.lambda_1se,
        GridSelection::Lambda0 => {
            // Universal-threshold level with the noise scale taken from a
            // preliminary one-SE fit.
            let prelim = lasso::fit_lasso(d, y, cv.lambda_1se, weights, opts, None)?;
            let df = prelim.active_set.len().min(y.len() - 1);
            let sigma2 = debiased::estimate_noise(&prelim.residuals, df)?;
            let p = weights.iter().filter(|&&w| w > 0.0).count().max(2);
            sigma2.sqrt() * (2.0 * (p as f64).ln() / y.len() as f64).sqrt()
        }
        GridSelection::Fixed(_) => unreachable!(),
    };
    Ok(lambda)
}

/// Artifacts of the debiased route kept around for reporting.
pub struct DebiasedArtifacts {
    pub design: ModelDesign,
    pub fit: LassoFit,
    pub projection: debiased::NodewiseProjection,
    pub sigma_eps2: f64,
}

/// Run the debiased route end to end.
pub fn run_debiased(
    data: &DataSet,
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<(EstimatorOutput, DebiasedArtifacts)> {
    let design = ModelDesign::build(data, StandardizePolicy::CenterScale, PenaltyScheme::All);
    let d = ColMatrix::from_array(design.matrix.view());
    let y = data.y.as_slice().expect("contiguous");
    let weights = design.weights.as_slice().expect("contiguous");
    let lambda = choose_lambda(
        &d,
        y,
        weights,
        cfg.lambda,
        cfg.cv_folds,
        cfg.grid_len,
        cfg.grid_ratio,
        &cfg.opts,
        rng::derive_seed(seed, rng::stream::CV_FOLDS, 0),
    )?;
    let fit = lasso::fit_lasso(&d, y, lambda, weights, &cfg.opts, None)?;
    let projection = debiased::nodewise_residualize(&design, &cfg.nodewise, &cfg.opts, seed)?;
    let estimate = debiased::debias(&fit, &projection, &design)?;
    let replicates = debiased::wild_bootstrap_debiased(
        &fit,
        &projection,
        &design,
        &data.y,
        cfg.b,
        cfg.multiplier,
        seed,
        &cfg.opts,
    )?;
    let p1 = design.layout.p1;
    let beta_lasso = Array1::from_iter((0..p1).map(|j| fit.coefs[design.layout.z_index(j)]));
    let anchor = AnchorEstimates::new(beta_lasso, AnchorSource::LassoAnchor)?;
    let output = EstimatorOutput {
        method: PipelineMethod::Debiased,
        estimates: estimate.b_hat.clone(),
        se: estimate.se.clone(),
        anchor,
        replicates,
        n: data.n(),
        lambda: Some(lambda),
        warnings: Vec::new(),
    };
    let artifacts = DebiasedArtifacts {
        design,
        fit,
        projection,
        sigma_eps2: estimate.sigma_eps2,
    };
    Ok((output, artifacts))
}

/// Run the splitting route end to end.
pub fn run_rsplit(data: &DataSet, cfg: &InferenceConfig, seed: u64) -> Result<EstimatorOutput> {
    let mut rcfg = cfg.rsplit.clone();
    rcfg.opts = cfg.opts.clone();
    let mut est = rsplit::rsplit_estimate(data, &rcfg, seed)?;
    let replicates = rsplit::rsplit_bootstrap(&est, data, cfg.b, cfg.multiplier, seed)?;
    est.se = rsplit::replicate_sd(&replicates);
    let anchor = AnchorEstimates::new(est.b_tilde.clone(), AnchorSource::RsplitAnchor)?;
    Ok(EstimatorOutput {
        method: PipelineMethod::Rsplit,
        estimates: est.b_tilde.clone(),
        se: est.se.clone(),
        anchor,
        replicates,
        n: data.n(),
        lambda: None,
        warnings: est.warnings.clone(),
    })
}

/// Run whichever estimator the config names.
pub fn run_estimator(data: &DataSet, cfg: &InferenceConfig, seed: u64) -> Result<EstimatorOutput> {
    match cfg.method {
        PipelineMethod::Debiased => run_debiased(data, cfg, seed).map(|(o, _)| o),
        PipelineMethod::Rsplit => run_rsplit(data, cfg, seed),
    }
}

/// Resolve the calibration exponent, cross-validating when asked to.
pub fn resolve_r(
    data: &DataSet,
    cfg: &InferenceConfig,
    seed: u64,
) -> Result<(f64, Option<TuningResult>)> {
    match &cfg.r {
        RChoice::Fixed(r) => {
            if !(0.0 < *r && *r < 0.5) {
                return Err(Error::config(format!(
                    "calibration exponent r must lie in (0, 0.5), got {r}"
                )));
            }
            Ok((*r, None))
        }
        RChoice::Auto(settings) => {
            let result = tuning::cross_validate_r(
                data,
                &settings.candidates,
                settings.folds,
                cfg,
                settings.b_inner,
                seed,
            )?;
            Ok((result.r_star, Some(result)))
        }
    }
}
