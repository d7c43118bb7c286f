//! Penalized least squares by cyclic coordinate descent.
//!
//! Minimizes `(1/2n)||y - D theta||^2 + lambda * sum_j w_j |theta_j|` with
//! per-coordinate penalty weights (`w_j = 0` leaves a coordinate free, which
//! is how the intercept and, for the splitting estimator, the subgroup block
//! stay unpenalized).
//!
//! The solver keeps an ever-active set with cached Gram rows (covariance
//! updates), iterates the active set to convergence, and certifies the
//! result with a full KKT scan; warm starts and a sequential strong rule
//! make descending-lambda paths cheap. Fits at `lambda = 0` drop to an exact
//! least-squares solve on the requested columns.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Column-major design storage so coordinate updates stream contiguously.
#[derive(Debug, Clone)]
pub struct ColMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>,
    norms2: Vec<f64>,
}

impl ColMatrix {
    fn with_norms(n: usize, m: usize, data: Vec<f64>) -> Self {
        let norms2 = (0..m)
            .map(|j| {
                let col = &data[j * n..(j + 1) * n];
                dot(col, col)
            })
            .collect();
        ColMatrix { n, m, data, norms2 }
    }

    pub fn from_array(a: ArrayView2<f64>) -> Self {
        let (n, m) = (a.nrows(), a.ncols());
        let mut data = vec![0.0; n * m];
        for j in 0..m {
            let col = a.column(j);
            let dst = &mut data[j * n..(j + 1) * n];
            for (d, v) in dst.iter_mut().zip(col.iter()) {
                *d = *v;
            }
        }
        ColMatrix::with_norms(n, m, data)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.m
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn subset_rows(&self, rows: &[usize]) -> ColMatrix {
        let n = rows.len();
        let mut data = vec![0.0; n * self.m];
        for j in 0..self.m {
            let src = self.col(j);
            let dst = &mut data[j * n..(j + 1) * n];
            for (d, &i) in dst.iter_mut().zip(rows.iter()) {
                *d = src[i];
            }
        }
        ColMatrix::with_norms(n, self.m, data)
    }

    /// Drop one column (nodewise designs regress a column on all others).
    pub fn without_column(&self, drop: usize) -> ColMatrix {
        let mut data = Vec::with_capacity(self.n * (self.m - 1));
        let mut norms2 = Vec::with_capacity(self.m - 1);
        for j in 0..self.m {
            if j != drop {
                data.extend_from_slice(self.col(j));
                norms2.push(self.norms2[j]);
            }
        }
        ColMatrix {
            n: self.n,
            m: self.m - 1,
            data,
            norms2,
        }
    }

    pub fn col_norm2(&self, j: usize) -> f64 {
        self.norms2[j]
    }

    /// `D theta` using only nonzero coefficients.
    pub fn predict(&self, coefs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (j, &t) in coefs.iter().enumerate() {
            if t != 0.0 {
                axpy(t, self.col(j), &mut out);
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Options controlling convergence of a single fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Cap on active-set sweeps for one certified fit.
    pub max_cycles: usize,
    /// Sweep convergence: max scaled coefficient change per sweep.
    pub coef_tol: f64,
    /// Final KKT tolerance certified by a full gradient scan.
    pub kkt_tol: f64,
    /// Sweep budget per path point. Path fits are best-effort: tail points
    /// of a dense grid on p > n designs are too ill-conditioned to certify
    /// cheaply, and cross-validation only needs their predictions.
    pub path_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_cycles: 100_000,
            coef_tol: 1e-7,
            kkt_tol: 1e-8,
            path_sweeps: 30,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum SolveMode {
    /// Iterate until the KKT scan certifies `kkt_tol`; error at the cycle cap.
    Strict,
    /// Bounded sweeps, violations recorded instead of fatal.
    BestEffort,
}

/// A converged penalized fit.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub coefs: Array1<f64>,
    pub lambda: f64,
    pub residuals: Array1<f64>,
    /// Indices with nonzero coefficients (free coordinates included).
    pub active_set: Vec<usize>,
    pub kkt_violation: f64,
    pub iterations: usize,
    /// Penalized columns with zero variance; their coefficients were forced
    /// to zero.
    pub zero_variance: Vec<usize>,
}

impl LassoFit {
    pub fn support(&self, weights: &[f64]) -> Vec<usize> {
        self.active_set
            .iter()
            .copied()
            .filter(|&j| weights[j] > 0.0)
            .collect()
    }
}

/// One solved point of a descending-lambda path.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub coefs: Array1<f64>,
    /// Count of nonzero penalized coefficients.
    pub support: usize,
    pub kkt_violation: f64,
}

struct Solver<'a> {
    d: &'a ColMatrix,
    y: &'a [f64],
    w: &'a [f64],
    lambda: f64,
    theta: Vec<f64>,
    /// Ever-active columns, in activation order.
    ever: Vec<usize>,
    /// Position of each column in `ever`, or usize::MAX.
    pos: Vec<usize>,
    /// Lower-triangular Gram rows over `ever`: gram[a][b] for b <= a.
    gram: Vec<Vec<f64>>,
    /// x_j'y/n for ever-active columns.
    cy: Vec<f64>,
    cycles: usize,
    zero_variance: Vec<usize>,
    zero_var_mask: Vec<bool>,
    /// Gradient from the most recent full scan (for the strong rule).
    last_scan_g: Vec<f64>,
    has_scan: bool,
}

impl<'a> Solver<'a> {
    fn new(d: &'a ColMatrix, y: &'a [f64], w: &'a [f64]) -> Result<Self> {
        if w.len() != d.ncols() {
            return Err(Error::config("penalty weight length != design width"));
        }
        if y.len() != d.nrows() {
            return Err(Error::config("response length != design rows"));
        }
        if w.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::config("penalty weights must be finite and >= 0"));
        }
        let m = d.ncols();
        let mut zero_variance = Vec::new();
        let mut zero_var_mask = vec![false; m];
        for j in 0..m {
            if w[j] > 0.0 && d.col_norm2(j) <= 0.0 {
                zero_variance.push(j);
                zero_var_mask[j] = true;
            }
        }
        let mut solver = Solver {
            d,
            y,
            w,
            lambda: 0.0,
            theta: vec![0.0; m],
            ever: Vec::new(),
            pos: vec![usize::MAX; m],
            gram: Vec::new(),
            cy: Vec::new(),
            cycles: 0,
            zero_variance,
            zero_var_mask,
            last_scan_g: vec![0.0; m],
            has_scan: false,
        };
        // Free coordinates participate from the start.
        for j in 0..m {
            if w[j] == 0.0 {
                solver.activate(j);
            }
        }
        Ok(solver)
    }

    fn warm_start(&mut self, coefs: &[f64]) {
        for (j, &v) in coefs.iter().enumerate() {
            if v != 0.0 {
                self.activate(j);
                self.theta[j] = v;
            }
        }
    }

    fn activate(&mut self, j: usize) {
        if self.pos[j] != usize::MAX {
            return;
        }
        let n = self.d.nrows() as f64;
        let xj = self.d.col(j);
        let a = self.ever.len();
        let mut row = Vec::with_capacity(a + 1);
        for b in 0..a {
            row.push(dot(xj, self.d.col(self.ever[b])) / n);
        }
        row.push(dot(xj, xj) / n);
        self.gram.push(row);
        self.cy.push(dot(xj, self.y) / n);
        self.pos[j] = a;
        self.ever.push(j);
    }

    fn gram_at(&self, a: usize, b: usize) -> f64 {
        if a >= b {
            self.gram[a][b]
        } else {
            self.gram[b][a]
        }
    }

    /// One sweep over the ever-active set; returns the max scaled change.
    fn sweep(&mut self) -> f64 {
        let lambda = self.lambda;
        let mut max_delta = 0.0_f64;
        for a in 0..self.ever.len() {
            let j = self.ever[a];
            let gjj = self.gram[a][a];
            if gjj <= 0.0 {
                self.theta[j] = 0.0;
                continue;
            }
            let mut s = 0.0;
            for b in 0..self.ever.len() {
                let tb = self.theta[self.ever[b]];
                if tb != 0.0 {
                    s += self.gram_at(a, b) * tb;
                }
            }
            let old = self.theta[j];
            let z = self.cy[a] - s + gjj * old;
            let new = if self.w[j] > 0.0 {
                soft_threshold(z, lambda * self.w[j]) / gjj
            } else {
                z / gjj
            };
            if new != old {
                self.theta[j] = new;
                max_delta = max_delta.max((new - old).abs() * gjj.sqrt());
            }
        }
        self.cycles += 1;
        max_delta
    }

    fn residuals(&self) -> Vec<f64> {
        let mut r = self.y.to_vec();
        for &j in &self.ever {
            let t = self.theta[j];
            if t != 0.0 {
                axpy(-t, self.d.col(j), &mut r);
            }
        }
        r
    }

    fn violation(&self, j: usize, g: f64) -> f64 {
        if self.zero_var_mask[j] {
            return 0.0;
        }
        let wj = self.w[j];
        let t = self.theta[j];
        if wj == 0.0 {
            g.abs()
        } else if t != 0.0 {
            (g - t.signum() * self.lambda * wj).abs()
        } else {
            (g.abs() - self.lambda * wj).max(0.0)
        }
    }

    /// Full KKT scan. Activates violators above `kkt_tol` and reports the
    /// max violation over all coordinates.
    fn full_scan(&mut self, kkt_tol: f64) -> (f64, bool) {
        let n = self.d.nrows() as f64;
        let r = self.residuals();
        let mut max_viol = 0.0_f64;
        let mut activated = false;
        for j in 0..self.d.ncols() {
            let g = dot(self.d.col(j), &r) / n;
            self.last_scan_g[j] = g;
            let v = self.violation(j, g);
            max_viol = max_viol.max(v);
            if v > kkt_tol && self.pos[j] == usize::MAX {
                self.activate(j);
                activated = true;
            }
        }
        self.has_scan = true;
        (max_viol, activated)
    }

    /// Check strong-rule candidates against the current residual; activate
    /// violators. Returns true when anything was added.
    fn check_candidates(&mut self, candidates: &[usize], kkt_tol: f64) -> bool {
        if candidates.is_empty() {
            return false;
        }
        let n = self.d.nrows() as f64;
        let r = self.residuals();
        let mut activated = false;
        for &j in candidates {
            if self.pos[j] != usize::MAX {
                continue;
            }
            let g = dot(self.d.col(j), &r) / n;
            if self.violation(j, g) > kkt_tol {
                self.activate(j);
                activated = true;
            }
        }
        activated
    }

    /// Solve at `lambda`. `strong_from` carries the previous lambda of a
    /// descending path so the strong rule can screen candidates.
    fn solve(
        &mut self,
        lambda: f64,
        opts: &FitOptions,
        strong_from: Option<f64>,
        mode: SolveMode,
    ) -> Result<f64> {
        self.lambda = lambda;
        if lambda == 0.0 {
            return self.solve_unpenalized(opts);
        }

        let strong: Vec<usize> = match (strong_from, self.has_scan) {
            (Some(prev), true) => (0..self.d.ncols())
                .filter(|&j| {
                    self.pos[j] == usize::MAX
                        && self.w[j] > 0.0
                        && self.last_scan_g[j].abs() >= self.w[j] * (2.0 * lambda - prev)
                })
                .collect(),
            _ => Vec::new(),
        };

        let budget = match mode {
            SolveMode::Strict => opts.max_cycles,
            SolveMode::BestEffort => opts.path_sweeps,
        };
        let mut spent = 0usize;
        let mut coef_tol = opts.coef_tol;
        loop {
            // Inner: iterate the active set, then pull in strong candidates.
            loop {
                while spent < budget {
                    spent += 1;
                    if self.sweep() <= coef_tol {
                        break;
                    }
                }
                if spent >= budget || !self.check_candidates(&strong, opts.kkt_tol) {
                    break;
                }
            }
            let (viol, activated) = self.full_scan(opts.kkt_tol);
            if viol <= opts.kkt_tol && !activated {
                return Ok(viol);
            }
            if spent >= budget {
                return match mode {
                    SolveMode::Strict => Err(Error::NonConvergence {
                        iterations: self.cycles,
                        kkt_violation: viol,
                    }),
                    SolveMode::BestEffort => Ok(viol),
                };
            }
            if !activated {
                // Active set is right but sweeps stopped early: tighten.
                coef_tol /= 10.0;
            }
        }
    }

    /// Exact least squares on the penalized-and-free column set when
    /// `lambda = 0`; zero-variance columns stay out.
    fn solve_unpenalized(&mut self, opts: &FitOptions) -> Result<f64> {
        let n = self.d.nrows() as f64;
        let m = self.d.ncols();
        let cols: Vec<usize> = (0..m).filter(|&j| self.d.col_norm2(j) > 0.0).collect();
        let k = cols.len();
        let mut gram = ndarray::Array2::<f64>::zeros((k, k));
        let mut rhs = Array1::<f64>::zeros(k);
        for (a, &ja) in cols.iter().enumerate() {
            for (b, &jb) in cols.iter().enumerate().take(a + 1) {
                let v = dot(self.d.col(ja), self.d.col(jb)) / n;
                gram[[a, b]] = v;
                gram[[b, a]] = v;
            }
            rhs[a] = dot(self.d.col(ja), self.y) / n;
        }
        let sol = linalg::solve_spd(&gram, rhs.view(), 1e-12).map_err(|_| {
            Error::numerical("unpenalized fit: design is rank deficient")
        })?;
        self.theta = vec![0.0; m];
        for (a, &j) in cols.iter().enumerate() {
            self.activate(j);
            self.theta[j] = sol[a];
        }
        self.cycles += 1;
        let (viol, _) = self.full_scan(opts.kkt_tol);
        Ok(viol)
    }

    fn finish(self, lambda: f64, kkt_violation: f64) -> LassoFit {
        let residuals = Array1::from_vec(self.residuals());
        let active_set: Vec<usize> = (0..self.theta.len())
            .filter(|&j| self.theta[j] != 0.0)
            .collect();
        LassoFit {
            coefs: Array1::from_vec(self.theta),
            lambda,
            residuals,
            active_set,
            kkt_violation,
            iterations: self.cycles,
            zero_variance: self.zero_variance,
        }
    }

    fn penalized_support(&self) -> usize {
        self.ever
            .iter()
            .filter(|&&j| self.w[j] > 0.0 && self.theta[j] != 0.0)
            .count()
    }
}

/// Fit at a single penalty level. Errors on non-convergence, carrying the
/// residual KKT violation.
pub fn fit_lasso(
    design: &ColMatrix,
    y: &[f64],
    lambda: f64,
    weights: &[f64],
    opts: &FitOptions,
    warm: Option<&Array1<f64>>,
) -> Result<LassoFit> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::config("lambda must be finite and >= 0"));
    }
    let mut solver = Solver::new(design, y, weights)?;
    if let Some(w0) = warm {
        solver.warm_start(w0.as_slice().expect("contiguous"));
    }
    let viol = solver.solve(lambda, opts, None, SolveMode::Strict)?;
    Ok(solver.finish(lambda, viol))
}

/// Smallest lambda at which every penalized coefficient is zero, after
/// profiling the free coordinates out by least squares.
pub fn lambda_max(design: &ColMatrix, y: &[f64], weights: &[f64]) -> Result<f64> {
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::config("lambda_max needs at least one penalized column"));
    }
    let n = design.nrows() as f64;
    let free: Vec<usize> = (0..design.ncols())
        .filter(|&j| weights[j] == 0.0 && design.col_norm2(j) > 0.0)
        .collect();
    let mut r = y.to_vec();
    if !free.is_empty() {
        let k = free.len();
        let mut gram = ndarray::Array2::<f64>::zeros((k, k));
        let mut rhs = Array1::<f64>::zeros(k);
        for (a, &ja) in free.iter().enumerate() {
            for (b, &jb) in free.iter().enumerate().take(a + 1) {
                let v = dot(design.col(ja), design.col(jb));
                gram[[a, b]] = v;
                gram[[b, a]] = v;
            }
            rhs[a] = dot(design.col(ja), y);
        }
        let sol = linalg::solve_spd(&gram, rhs.view(), 1e-12)
            .map_err(|_| Error::numerical("lambda_max: free block is rank deficient"))?;
        for (a, &j) in free.iter().enumerate() {
            axpy(-sol[a], design.col(j), &mut r);
        }
    }
    let mut best = 0.0_f64;
    for j in 0..design.ncols() {
        if weights[j] > 0.0 {
            let g = dot(design.col(j), &r).abs() / (n * weights[j]);
            best = best.max(g);
        }
    }
    Ok(best)
}

/// How a lambda is picked off a grid or curve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSelection {
    /// Minimizer of the CV curve.
    MinCv,
    /// Largest lambda within one SE of the CV minimum.
    OneSe,
    /// `factor * lambda_1se`.
    ScaledOneSe(f64),
    /// A fixed value, bypassing CV.
    Fixed(f64),
    /// `sigma_hat * sqrt(2 log(p) / n)` with `sigma_hat` taken from a
    /// preliminary one-SE fit.
    Lambda0,
}

/// Descending penalty grid.
#[derive(Debug, Clone)]
pub struct LambdaGrid {
    pub values: Vec<f64>,
    pub selection: GridSelection,
}

impl LambdaGrid {
    /// 100 log-spaced values from `lambda_max` down to `ratio * lambda_max`.
    pub fn log_spaced(lambda_max: f64, len: usize, ratio: f64) -> LambdaGrid {
        assert!(lambda_max > 0.0 && ratio > 0.0 && ratio < 1.0 && len >= 1);
        let values = if len == 1 {
            vec![lambda_max]
        } else {
            let log_top = lambda_max.ln();
            let log_bot = (lambda_max * ratio).ln();
            (0..len)
                .map(|i| {
                    let t = i as f64 / (len - 1) as f64;
                    (log_top + t * (log_bot - log_top)).exp()
                })
                .collect()
        };
        LambdaGrid {
            values,
            selection: GridSelection::OneSe,
        }
    }

    pub fn default_for(design: &ColMatrix, y: &[f64], weights: &[f64]) -> Result<LambdaGrid> {
        let lmax = lambda_max(design, y, weights)?;
        let lmax = if lmax > 0.0 { lmax } else { 1.0 };
        Ok(LambdaGrid::log_spaced(lmax, 100, 1e-3))
    }
}

/// Warm-started descending path. Per-point KKT failures are recorded rather
/// than fatal so CV can use best-effort tails; `support_cap` stops the path
/// once the penalized support exceeds it.
pub fn solve_path(
    design: &ColMatrix,
    y: &[f64],
    weights: &[f64],
    lambdas: &[f64],
    opts: &FitOptions,
    support_cap: Option<usize>,
) -> Result<Vec<PathPoint>> {
    let mut solver = Solver::new(design, y, weights)?;
    let mut out = Vec::with_capacity(lambdas.len());
    let mut prev_lambda: Option<f64> = None;
    for &lambda in lambdas {
        let viol = solver.solve(lambda, opts, prev_lambda, SolveMode::BestEffort)?;
        out.push(PathPoint {
            lambda,
            coefs: Array1::from_vec(solver.theta.clone()),
            support: solver.penalized_support(),
            kkt_violation: viol,
        });
        prev_lambda = Some(lambda);
        if let Some(cap) = support_cap {
            if solver.penalized_support() > cap {
                break;
            }
        }
    }
    Ok(out)
}

/// Penalized objective `(1/2n)||y - D theta||^2 + lambda ||w . theta||_1`.
pub fn objective(design: &ColMatrix, y: &[f64], weights: &[f64], lambda: f64, coefs: &[f64]) -> f64 {
    let n = design.nrows() as f64;
    let pred = design.predict(coefs);
    let mut rss = 0.0;
    for i in 0..y.len() {
        let r = y[i] - pred[i];
        rss += r * r;
    }
    let l1: f64 = coefs
        .iter()
        .zip(weights.iter())
        .map(|(t, w)| w * t.abs())
        .sum();
    rss / (2.0 * n) + lambda * l1
}

/// Fold assignment for cross-validation.
#[derive(Debug, Clone)]
pub enum FoldSpec {
    /// `k` folds from a seeded shuffle.
    Seeded { k: usize },
    /// Explicit fold id per row.
    Explicit(Vec<usize>),
}

impl FoldSpec {
    pub(crate) fn assign(&self, n: usize, seed: u64) -> Result<Vec<usize>> {
        match self {
            FoldSpec::Seeded { k } => {
                let k = *k;
                if k < 2 {
                    return Err(Error::config("cross-validation needs at least 2 folds"));
                }
                if n < 2 * k {
                    return Err(Error::config(format!(
                        "cross-validation needs n >= 2K (n={n}, K={k})"
                    )));
                }
                let mut rng = rng::derived_rng(seed, rng::stream::CV_FOLDS, 0);
                let perm = rng::permutation(n, &mut rng);
                let mut ids = vec![0usize; n];
                for (rank, &row) in perm.iter().enumerate() {
                    ids[row] = rank % k;
                }
                Ok(ids)
            }
            FoldSpec::Explicit(ids) => {
                if ids.len() != n {
                    return Err(Error::config("explicit fold assignment length != n"));
                }
                Ok(ids.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvCurvePoint {
    pub lambda: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub curve: Vec<CvCurvePoint>,
    /// Folds whose error was zeroed because their residuals were degenerate.
    pub degenerate_folds: usize,
}

/// K-fold cross-validation over a lambda grid. Deterministic under `seed`;
/// folds and grid points are scored in a fixed order.
pub fn cv_lambda(
    design: &ColMatrix,
    y: &[f64],
    weights: &[f64],
    folds: &FoldSpec,
    grid: &LambdaGrid,
    seed: u64,
    opts: &FitOptions,
) -> Result<CvResult> {
    let n = design.nrows();
    let ids = folds.assign(n, seed)?;
    let k = ids.iter().copied().max().map(|v| v + 1).unwrap_or(0);
    if k < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    let n_lambda = grid.values.len();
    let mut fold_errors = vec![vec![0.0_f64; k]; n_lambda];
    let mut degenerate_folds = 0usize;

    for fold in 0..k {
        let train_rows: Vec<usize> = (0..n).filter(|&i| ids[i] != fold).collect();
        let test_rows: Vec<usize> = (0..n).filter(|&i| ids[i] == fold).collect();
        if train_rows.is_empty() || test_rows.is_empty() {
            return Err(Error::config(format!("fold {fold} is empty")));
        }
        let train_d = design.subset_rows(&train_rows);
        let train_y: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
        let test_d = design.subset_rows(&test_rows);
        let test_y: Vec<f64> = test_rows.iter().map(|&i| y[i]).collect();

        let path = solve_path(&train_d, &train_y, weights, &grid.values, opts, None)?;
        for (li, point) in path.iter().enumerate() {
            let pred = test_d.predict(point.coefs.as_slice().expect("contiguous"));
            let mut errs: Vec<f64> = Vec::with_capacity(test_y.len());
            for i in 0..test_y.len() {
                errs.push(test_y[i] - pred[i]);
            }
            let mse = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
            let first = errs[0];
            let degenerate = !mse.is_finite() || errs.iter().all(|&e| e == first && e != 0.0);
            if degenerate {
                degenerate_folds += 1;
                fold_errors[li][fold] = 0.0;
            } else {
                fold_errors[li][fold] = mse;
            }
        }
    }

    let mut curve = Vec::with_capacity(n_lambda);
    for (li, lambda) in grid.values.iter().enumerate() {
        let errs = &fold_errors[li];
        let mean = linalg::mean(errs);
        let se = linalg::sample_sd(errs) / (k as f64).sqrt();
        curve.push(CvCurvePoint {
            lambda: *lambda,
            mean,
            se,
        });
    }

    // Grid is descending; scanning in order breaks ties toward larger lambda.
    let mut best = 0usize;
    for li in 0..n_lambda {
        if curve[li].mean < curve[best].mean {
            best = li;
        }
    }
    let threshold = curve[best].mean + curve[best].se;
    let mut one_se = best;
    for li in 0..n_lambda {
        if curve[li].mean <= threshold {
            one_se = li;
            break;
        }
    }
    Ok(CvResult {
        lambda_min: curve[best].lambda,
        lambda_1se: curve[one_se].lambda,
        curve,
        degenerate_folds,
    })
}
