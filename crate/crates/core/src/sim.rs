//! Synthetic designs and the Monte Carlo harness.
//!
//! Four design families cover the validation studies: a small binary-subgroup
//! design with strongly correlated covariates (`Example1`), logistic binary
//! subgroups over an autoregressive covariate block (`Sec6Binary`),
//! continuous subgroups built from covariate combinations (`Sec6Continuous`),
//! and its low-noise variant used for power curves (`PowerContinuous`).
//! The harness runs competing inference methods over many generated
//! datasets and reports coverage of the one-sided bound for the maximal
//! effect, root-n-scaled bias, and rejection rates.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::calibration::{self, SimultaneousMode};
use crate::data::{DataSet, InterceptPolicy};
use crate::error::{Error, Result};
use crate::lasso::GridSelection;
use crate::linalg;
use crate::pipeline::{self, InferenceConfig, PipelineMethod};
use crate::rng;

/// Design family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Example1,
    PowerContinuous,
    Sec6Binary,
    Sec6Continuous,
}

/// Subgroup coefficient pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaCase {
    /// One real effect: (0, ..., 0, 1).
    Heterogeneous,
    /// No effect anywhere: all zeros.
    Spurious,
    Custom(Vec<f64>),
}

/// Covariate coefficient pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaCase {
    /// (1, 1, 1, 1, 0, ..., 0).
    Sparse4,
    /// Non-sparse decay 1/j^2.
    InverseSquare,
    Custom(Vec<f64>),
}

/// Full description of one synthetic scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub design: DesignKind,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub beta_case: BetaCase,
    pub gamma_case: GammaCase,
    pub intercept: f64,
    /// Noise standard deviation (standard normal scaled).
    pub noise_sd: f64,
    /// Base of the power-decay covariance for autoregressive blocks.
    pub rho: f64,
    pub seed: u64,
    pub label: String,
}

/// True coefficients behind a generated dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub beta: Array1<f64>,
    pub gamma: Array1<f64>,
    pub intercept: f64,
    pub beta_max: f64,
    /// All coordinates achieving the maximum.
    pub argmax: Vec<usize>,
}

impl ScenarioSpec {
    pub fn example1() -> ScenarioSpec {
        let p2 = 498;
        let mut gamma = vec![0.0; p2];
        gamma[0] = 1.0;
        ScenarioSpec {
            design: DesignKind::Example1,
            n: 100,
            p1: 2,
            p2,
            beta_case: BetaCase::Custom(vec![0.5, 0.5]),
            gamma_case: GammaCase::Custom(gamma),
            intercept: 0.0,
            noise_sd: 1.0,
            rho: 0.5,
            seed: 0,
            label: "example1".into(),
        }
    }

    /// Desk-scale variant of the main simulation designs.
    pub fn table1(binary: bool, spurious: bool, p1: usize) -> ScenarioSpec {
        let design = if binary {
            DesignKind::Sec6Binary
        } else {
            DesignKind::Sec6Continuous
        };
        let beta_case = if spurious {
            BetaCase::Spurious
        } else {
            BetaCase::Heterogeneous
        };
        let label = format!(
            "table1-{}-{}-p{}",
            if binary { "binary" } else { "continuous" },
            if spurious { "spurious" } else { "heterogeneous" },
            p1
        );
        ScenarioSpec {
            design,
            n: 300,
            p1,
            p2: 400,
            beta_case,
            gamma_case: GammaCase::Sparse4,
            intercept: 0.5,
            noise_sd: 1.0,
            rho: 0.5,
            seed: 0,
            label,
        }
    }

    /// Low-noise continuous design for power studies; `effect` goes on the
    /// last subgroup coordinate.
    pub fn power_continuous(effect: f64, p1: usize) -> ScenarioSpec {
        let mut beta = vec![0.0; p1];
        if p1 > 0 {
            beta[p1 - 1] = effect;
        }
        ScenarioSpec {
            design: DesignKind::PowerContinuous,
            n: 300,
            p1,
            p2: 400,
            beta_case: BetaCase::Custom(beta),
            gamma_case: GammaCase::Sparse4,
            intercept: 0.5,
            noise_sd: 1.0,
            rho: 0.5,
            seed: 0,
            label: format!("power-continuous-p{p1}-effect{effect}"),
        }
    }

    /// Parse preset names used by the command line:
    /// `example1`, `table1-{binary|continuous}-{spurious|heterogeneous}-p<k>`,
    /// `power-continuous`.
    pub fn from_preset(name: &str) -> Result<ScenarioSpec> {
        if name == "example1" {
            return Ok(ScenarioSpec::example1());
        }
        if name == "power-continuous" {
            return Ok(ScenarioSpec::power_continuous(0.0, 2));
        }
        if let Some(rest) = name.strip_prefix("table1-") {
            let parts: Vec<&str> = rest.split('-').collect();
            if parts.len() == 3 {
                let binary = match parts[0] {
                    "binary" => true,
                    "continuous" => false,
                    _ => return Err(Error::config(format!("unknown preset '{name}'"))),
                };
                let spurious = match parts[1] {
                    "spurious" => true,
                    "heterogeneous" => false,
                    _ => return Err(Error::config(format!("unknown preset '{name}'"))),
                };
                let p1: usize = parts[2]
                    .strip_prefix('p')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::config(format!("unknown preset '{name}'")))?;
                return Ok(ScenarioSpec::table1(binary, spurious, p1));
            }
        }
        Err(Error::config(format!("unknown preset '{name}'")))
    }

    pub fn beta(&self) -> Array1<f64> {
        match &self.beta_case {
            BetaCase::Heterogeneous => {
                let mut b = Array1::zeros(self.p1);
                b[self.p1 - 1] = 1.0;
                b
            }
            BetaCase::Spurious => Array1::zeros(self.p1),
            BetaCase::Custom(v) => Array1::from_vec(v.clone()),
        }
    }

    pub fn gamma(&self) -> Array1<f64> {
        match &self.gamma_case {
            GammaCase::Sparse4 => {
                let mut g = Array1::zeros(self.p2);
                for j in 0..4.min(self.p2) {
                    g[j] = 1.0;
                }
                g
            }
            GammaCase::InverseSquare => {
                Array1::from_iter((1..=self.p2).map(|j| 1.0 / (j as f64 * j as f64)))
            }
            GammaCase::Custom(v) => Array1::from_vec(v.clone()),
        }
    }
}

/// Default penalty rule for the debiased route per design family: the
/// universal threshold for the binary designs, an inflated one-SE level for
/// the continuous ones, and the CV minimum for the small tied-maximum
/// design, where heavier shrinkage leaves bias the bootstrap cannot see.
pub fn default_lambda_for(design: DesignKind) -> GridSelection {
    match design {
        DesignKind::Sec6Binary => GridSelection::Lambda0,
        DesignKind::Example1 => GridSelection::MinCv,
        DesignKind::Sec6Continuous | DesignKind::PowerContinuous => GridSelection::ScaledOneSe(1.1),
    }
}

/// Default fixed calibration exponent per design family. The main designs
/// separate a unit effect from noise only once the exponent sits near the
/// top of its window at this sample size; the small tied design and the
/// power sweeps keep the conventional 0.1.
pub fn default_r_for(design: DesignKind) -> f64 {
    match design {
        DesignKind::Sec6Binary | DesignKind::Sec6Continuous => 0.4,
        DesignKind::Example1 | DesignKind::PowerContinuous => 0.1,
    }
}

fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Generate one dataset plus its ground truth, deterministically from
/// `spec.seed`. Autoregressive Gaussian rows use the sequential recursion
/// `w_j = rho w_{j-1} + sqrt(1-rho^2) e_j`, the triangular factor of the
/// power-decay covariance.
pub fn generate(spec: &ScenarioSpec) -> Result<(DataSet, GroundTruth)> {
    use rand_distr::Distribution;
    let n = spec.n;
    let p1 = spec.p1;
    let p2 = spec.p2;
    if n < 2 || p1 < 1 {
        return Err(Error::config("scenario needs n >= 2, p1 >= 1"));
    }
    let beta = spec.beta();
    let gamma = spec.gamma();
    if beta.len() != p1 || gamma.len() != p2 {
        return Err(Error::config(
            "custom coefficient lengths do not match (p1, p2)",
        ));
    }
    let mut rng = rng::derived_rng(spec.seed, rng::stream::GENERATE, 0);
    let normal = rand_distr::StandardNormal;
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { normal.sample(rng) };

    let mut z = Array2::<f64>::zeros((n, p1));
    let mut x = Array2::<f64>::zeros((n, p2));
    match spec.design {
        DesignKind::Example1 => {
            if p1 != 2 {
                return Err(Error::config("the example design is defined for p1 = 2"));
            }
            let p = p1 + p2;
            let rho = spec.rho;
            let scale = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                let mut prev = 0.0;
                for j in 0..p {
                    let w = if j == 0 {
                        draw(&mut rng)
                    } else {
                        rho * prev + scale * draw(&mut rng)
                    };
                    if j < 2 {
                        z[[i, j]] = if w > 0.5 { 1.0 } else { 0.0 };
                    } else {
                        x[[i, j - 2]] = w;
                    }
                    prev = w;
                }
            }
        }
        DesignKind::Sec6Binary => {
            if 2 * p1 > p2 {
                return Err(Error::config(format!(
                    "binary design needs p2 >= 2*p1 (p1={p1}, p2={p2})"
                )));
            }
            let rho = spec.rho;
            let scale = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                let mut prev = 0.0;
                for j in 0..p2 {
                    let w = if j == 0 {
                        draw(&mut rng)
                    } else {
                        rho * prev + scale * draw(&mut rng)
                    };
                    x[[i, j]] = w;
                    prev = w;
                }
                for j in 0..p1 {
                    let s = x[[i, 2 * j]] + x[[i, 2 * j + 1]];
                    let uni: f64 = rand::Rng::random::<f64>(&mut rng);
                    z[[i, j]] = if uni < expit(s) { 1.0 } else { 0.0 };
                }
            }
        }
        DesignKind::Sec6Continuous | DesignKind::PowerContinuous => {
            if 2 * p1 + 4 > p2 {
                return Err(Error::config(format!(
                    "continuous design needs p2 >= 2*p1 + 4 (p1={p1}, p2={p2})"
                )));
            }
            let nu_sd = if spec.design == DesignKind::PowerContinuous {
                0.1_f64.sqrt()
            } else {
                1.0
            };
            for i in 0..n {
                for j in 0..p2 {
                    x[[i, j]] = draw(&mut rng);
                }
                for j in 0..p1 {
                    // 1-based columns 2j+3 and 2j+4.
                    let a = x[[i, 2 * j + 4]];
                    let b = x[[i, 2 * j + 5]];
                    let nu = nu_sd * draw(&mut rng);
                    z[[i, j]] = 0.5 * a + 0.5 / 2.0_f64.sqrt() * b + nu;
                }
            }
        }
    }

    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut v = spec.intercept;
        for j in 0..p1 {
            v += z[[i, j]] * beta[j];
        }
        for j in 0..p2 {
            if gamma[j] != 0.0 {
                v += x[[i, j]] * gamma[j];
            }
        }
        y[i] = v + spec.noise_sd * draw(&mut rng);
    }

    let data = DataSet::new(
        y,
        z,
        x,
        "y".into(),
        (1..=p1).map(|j| format!("z{j}")).collect(),
        (1..=p2).map(|j| format!("x{j}")).collect(),
        InterceptPolicy::IncludeUnpenalized,
    )?;
    let beta_max = beta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let argmax = (0..p1).filter(|&j| beta[j] == beta_max).collect();
    Ok((
        data,
        GroundTruth {
            beta,
            gamma,
            intercept: spec.intercept,
            beta_max,
            argmax,
        },
    ))
}

/// Inference methods the harness can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMethod {
    CalibratedDebiased,
    NaiveDebiased,
    SimultaneousDebiased,
    CalibratedRsplit,
    NaiveRsplit,
    SimultaneousRsplit,
    /// Plug-in max of OLS on the true covariate support (simulation only).
    OraclePlugin,
}

impl SimMethod {
    pub fn name(self) -> &'static str {
        match self {
            SimMethod::CalibratedDebiased => "calibrated-debiased",
            SimMethod::NaiveDebiased => "naive-debiased",
            SimMethod::SimultaneousDebiased => "simultaneous-debiased",
            SimMethod::CalibratedRsplit => "calibrated-rsplit",
            SimMethod::NaiveRsplit => "naive-rsplit",
            SimMethod::SimultaneousRsplit => "simultaneous-rsplit",
            SimMethod::OraclePlugin => "oracle-plugin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "calibrated-debiased" => Some(SimMethod::CalibratedDebiased),
            "naive-debiased" => Some(SimMethod::NaiveDebiased),
            "simultaneous-debiased" => Some(SimMethod::SimultaneousDebiased),
            "calibrated-rsplit" => Some(SimMethod::CalibratedRsplit),
            "naive-rsplit" => Some(SimMethod::NaiveRsplit),
            "simultaneous-rsplit" => Some(SimMethod::SimultaneousRsplit),
            "oracle-plugin" => Some(SimMethod::OraclePlugin),
            _ => None,
        }
    }

    fn route(self) -> Option<PipelineMethod> {
        match self {
            SimMethod::CalibratedDebiased
            | SimMethod::NaiveDebiased
            | SimMethod::SimultaneousDebiased => Some(PipelineMethod::Debiased),
            SimMethod::CalibratedRsplit
            | SimMethod::NaiveRsplit
            | SimMethod::SimultaneousRsplit => Some(PipelineMethod::Rsplit),
            SimMethod::OraclePlugin => None,
        }
    }
}

/// Harness configuration.
#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub reps: usize,
    pub methods: Vec<SimMethod>,
    pub inference: InferenceConfig,
    pub confidence: f64,
    pub seed: u64,
    /// Abort when any method fails on more than this fraction of reps.
    pub max_failure_fraction: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            reps: 300,
            methods: vec![SimMethod::CalibratedDebiased, SimMethod::NaiveDebiased],
            inference: InferenceConfig::default(),
            confidence: 0.95,
            seed: 0,
            max_failure_fraction: 0.02,
        }
    }
}

#[derive(Debug, Clone)]
struct RepMethodResult {
    point: f64,
    lower: f64,
    selected: usize,
}

/// Aggregated metrics for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub coverage_max: f64,
    pub coverage_max_se: Option<f64>,
    pub coverage_selected: f64,
    pub coverage_selected_se: Option<f64>,
    pub sqrt_n_bias: f64,
    pub sqrt_n_bias_se: Option<f64>,
    /// Fraction of reps whose lower bound excludes zero.
    pub rejection_rate: f64,
    pub mean_lower: f64,
    pub reps_used: usize,
    pub failures: usize,
}

/// Monte Carlo results for one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsTable {
    pub scenario: String,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub beta_max: f64,
    pub confidence: f64,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<MethodMetrics>,
    /// Wall time is informational only and never written to output files,
    /// so identical runs produce identical artifacts.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

fn oracle_plugin(
    data: &DataSet,
    truth: &GroundTruth,
    confidence: f64,
) -> Result<RepMethodResult> {
    let n = data.n();
    let p1 = data.p1();
    let support: Vec<usize> = (0..data.p2()).filter(|&j| truth.gamma[j] != 0.0).collect();
    let k = 1 + p1 + support.len();
    if n <= k {
        return Err(Error::numerical("oracle refit needs n > k"));
    }
    let mut w = Array2::<f64>::zeros((n, k));
    for i in 0..n {
        w[[i, 0]] = 1.0;
        for j in 0..p1 {
            w[[i, 1 + j]] = data.z[[i, j]];
        }
        for (a, &m) in support.iter().enumerate() {
            w[[i, 1 + p1 + a]] = data.x[[i, m]];
        }
    }
    let gram = w.t().dot(&w) / n as f64;
    let g_inv = linalg::inv_spd(&gram, 1e-12)?;
    let rhs = w.t().dot(&data.y) / n as f64;
    let coefs = g_inv.dot(&rhs);
    let fitted = w.dot(&coefs);
    let rss: f64 = data
        .y
        .iter()
        .zip(fitted.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let sigma2 = rss / (n - k) as f64;
    let mut best = 0usize;
    for j in 1..p1 {
        if coefs[1 + j] > coefs[1 + best] {
            best = j;
        }
    }
    let point = coefs[1 + best];
    let se = (sigma2 * g_inv[[1 + best, 1 + best]] / n as f64).sqrt();
    let lower = point - linalg::normal_quantile(confidence) * se;
    Ok(RepMethodResult {
        point,
        lower,
        selected: best,
    })
}

fn method_result(
    method: SimMethod,
    out: &pipeline::EstimatorOutput,
    r: f64,
    confidence: f64,
) -> Result<RepMethodResult> {
    match method {
        SimMethod::CalibratedDebiased | SimMethod::CalibratedRsplit => {
            let inf = calibration::infer_max(
                out.estimates.view(),
                out.replicates.view(),
                &out.anchor,
                out.n,
                r,
            )?;
            Ok(RepMethodResult {
                point: inf.bias_reduced,
                lower: inf.lower_bound(confidence),
                selected: inf.selected_index,
            })
        }
        SimMethod::NaiveDebiased | SimMethod::NaiveRsplit => {
            let inf = calibration::naive_inference(out.estimates.view(), out.se.view())?;
            Ok(RepMethodResult {
                point: inf.point,
                lower: inf.lower_bound(confidence),
                selected: inf.selected_index,
            })
        }
        SimMethod::SimultaneousDebiased | SimMethod::SimultaneousRsplit => {
            let inf = calibration::simultaneous_inference(
                out.estimates.view(),
                out.replicates.view(),
                out.anchor.anchor.view(),
                Some(out.se.view()),
                SimultaneousMode::Raw,
            )?;
            let mut best = 0usize;
            for j in 1..out.estimates.len() {
                if out.estimates[j] > out.estimates[best] {
                    best = j;
                }
            }
            Ok(RepMethodResult {
                point: inf.point,
                lower: inf.lower_bound(confidence),
                selected: best,
            })
        }
        SimMethod::OraclePlugin => unreachable!("handled separately"),
    }
}

/// Run the harness: generate, fit every requested method, aggregate.
/// Deterministic under `(spec, cfg.seed)` and invariant to worker count.
pub fn run_monte_carlo(spec: &ScenarioSpec, cfg: &MonteCarloConfig) -> Result<MetricsTable> {
    if cfg.reps == 0 {
        return Err(Error::config("Monte Carlo needs reps >= 1"));
    }
    let start = std::time::Instant::now();
    let needs_debiased = cfg
        .methods
        .iter()
        .any(|m| m.route() == Some(PipelineMethod::Debiased));
    let needs_rsplit = cfg
        .methods
        .iter()
        .any(|m| m.route() == Some(PipelineMethod::Rsplit));
    let needs_oracle = cfg.methods.contains(&SimMethod::OraclePlugin);

    type RepOutcome = (Vec<std::result::Result<RepMethodResult, String>>, GroundTruth);
    let rep_results: Vec<Result<RepOutcome>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rep_spec = spec.clone();
            rep_spec.seed = rng::derive_seed(cfg.seed, rng::stream::MC_REP, rep as u64);
            let (data, truth) = generate(&rep_spec)?;

            let run_route = |method: PipelineMethod| -> std::result::Result<
                (pipeline::EstimatorOutput, f64),
                String,
            > {
                let mut icfg = cfg.inference.clone();
                icfg.method = method;
                let (r, _) =
                    pipeline::resolve_r(&data, &icfg, rep_spec.seed).map_err(|e| e.to_string())?;
                let out =
                    pipeline::run_estimator(&data, &icfg, rep_spec.seed).map_err(|e| e.to_string())?;
                Ok((out, r))
            };
            let debiased = if needs_debiased {
                Some(run_route(PipelineMethod::Debiased))
            } else {
                None
            };
            let rsplit = if needs_rsplit {
                Some(run_route(PipelineMethod::Rsplit))
            } else {
                None
            };
            let oracle = if needs_oracle {
                Some(oracle_plugin(&data, &truth, cfg.confidence).map_err(|e| e.to_string()))
            } else {
                None
            };

            let mut per_method = Vec::with_capacity(cfg.methods.len());
            for &method in &cfg.methods {
                let res: std::result::Result<RepMethodResult, String> = match method.route() {
                    Some(PipelineMethod::Debiased) => match debiased.as_ref().unwrap() {
                        Ok((out, r)) => {
                            method_result(method, out, *r, cfg.confidence).map_err(|e| e.to_string())
                        }
                        Err(e) => Err(e.clone()),
                    },
                    Some(PipelineMethod::Rsplit) => match rsplit.as_ref().unwrap() {
                        Ok((out, r)) => {
                            method_result(method, out, *r, cfg.confidence).map_err(|e| e.to_string())
                        }
                        Err(e) => Err(e.clone()),
                    },
                    None => oracle.clone().unwrap(),
                };
                per_method.push(res);
            }
            Ok((per_method, truth))
        })
        .collect();

    let sqrt_n = (spec.n as f64).sqrt();
    let mut rows = Vec::with_capacity(cfg.methods.len());
    let mut beta_max_ref = f64::NAN;
    for (mi, &method) in cfg.methods.iter().enumerate() {
        let mut covered_max = Vec::new();
        let mut covered_sel = Vec::new();
        let mut bias = Vec::new();
        let mut lowers = Vec::new();
        let mut rejections = Vec::new();
        let mut failures = 0usize;
        let mut first_failure: Option<String> = None;
        for rep in rep_results.iter() {
            let (per_method, truth) = match rep {
                Ok(v) => v,
                Err(e) => {
                    failures += 1;
                    if first_failure.is_none() {
                        first_failure = Some(e.to_string());
                    }
                    continue;
                }
            };
            beta_max_ref = truth.beta_max;
            match &per_method[mi] {
                Ok(res) => {
                    covered_max.push(f64::from(res.lower <= truth.beta_max));
                    covered_sel.push(f64::from(res.lower <= truth.beta[res.selected]));
                    bias.push(res.point - truth.beta_max);
                    lowers.push(res.lower);
                    rejections.push(f64::from(res.lower > 0.0));
                }
                Err(e) => {
                    failures += 1;
                    if first_failure.is_none() {
                        first_failure = Some(e.clone());
                    }
                }
            }
        }
        let max_failures = (cfg.max_failure_fraction * cfg.reps as f64).ceil() as usize;
        if failures > max_failures.max(0) {
            return Err(Error::numerical(format!(
                "method {} failed on {failures}/{} reps (limit {max_failures}); first failure: {}",
                method.name(),
                cfg.reps,
                first_failure.unwrap_or_default()
            )));
        }
        let reps_used = covered_max.len();
        let coverage = linalg::mean(&covered_max);
        let coverage_sel = linalg::mean(&covered_sel);
        let mean_bias = linalg::mean(&bias);
        let binomial_se = |p: f64| {
            if reps_used >= 2 {
                Some((p * (1.0 - p) / reps_used as f64).sqrt())
            } else {
                None
            }
        };
        rows.push(MethodMetrics {
            method: method.name().to_string(),
            coverage_max: coverage,
            coverage_max_se: binomial_se(coverage),
            coverage_selected: coverage_sel,
            coverage_selected_se: binomial_se(coverage_sel),
            sqrt_n_bias: sqrt_n * mean_bias,
            sqrt_n_bias_se: if reps_used >= 2 {
                Some(sqrt_n * linalg::sample_sd(&bias) / (reps_used as f64).sqrt())
            } else {
                None
            },
            rejection_rate: linalg::mean(&rejections),
            mean_lower: linalg::mean(&lowers),
            reps_used,
            failures,
        });
    }
    Ok(MetricsTable {
        scenario: spec.label.clone(),
        n: spec.n,
        p1: spec.p1,
        p2: spec.p2,
        beta_max: beta_max_ref,
        confidence: cfg.confidence,
        reps: cfg.reps,
        seed: cfg.seed,
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

impl MetricsTable {
    /// Tab-separated rendering (stable field order, no timing information).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# scenario={} n={} p1={} p2={} beta_max={} confidence={} reps={} seed={}",
            self.scenario,
            self.n,
            self.p1,
            self.p2,
            self.beta_max,
            self.confidence,
            self.reps,
            self.seed
        );
        let _ = writeln!(
            out,
            "method\tcoverage\tcoverage_se\tcoverage_selected\tcoverage_selected_se\tsqrt_n_bias\tsqrt_n_bias_se\trejection_rate\tmean_lower\treps_used\tfailures"
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                row.method,
                row.coverage_max,
                fmt_opt(row.coverage_max_se),
                row.coverage_selected,
                fmt_opt(row.coverage_selected_se),
                row.sqrt_n_bias,
                fmt_opt(row.sqrt_n_bias_se),
                row.rejection_rate,
                row.mean_lower,
                row.reps_used,
                row.failures
            );
        }
        out
    }

    pub fn row(&self, method: SimMethod) -> Option<&MethodMetrics> {
        self.rows.iter().find(|r| r.method == method.name())
    }
}
