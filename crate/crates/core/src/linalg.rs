//! Small dense linear-algebra helpers: Cholesky solves for the OLS refits
//! and Gram inversions, plus the type-7 empirical quantile.
//!
//! Refit problems here are tiny (tens of columns), so a hand-rolled Cholesky
//! avoids pulling in a BLAS backend.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Cholesky factor (lower) of a symmetric positive definite matrix.
/// Fails when a pivot falls below `tol`, which doubles as the rank check for
/// refit designs.
pub fn cholesky(a: &Array2<f64>, tol: f64) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::numerical("cholesky: matrix not square"));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= tol {
            return Err(Error::numerical(format!(
                "cholesky: non-positive pivot {d:.3e} at column {j}"
            )));
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
pub fn solve_spd(a: &Array2<f64>, b: ArrayView1<f64>, tol: f64) -> Result<Array1<f64>> {
    let l = cholesky(a, tol)?;
    Ok(cholesky_solve(&l, b))
}

/// Solve with a precomputed lower Cholesky factor.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[[i, k]] * v;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = y[k];
            y[i] -= l[[k, i]] * v;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Invert a symmetric positive definite matrix via Cholesky.
pub fn inv_spd(a: &Array2<f64>, tol: f64) -> Result<Array2<f64>> {
    let n = a.nrows();
    let l = cholesky(a, tol)?;
    let mut inv = Array2::<f64>::zeros((n, n));
    let mut e = Array1::<f64>::zeros(n);
    for j in 0..n {
        e.fill(0.0);
        e[j] = 1.0;
        let col = cholesky_solve(&l, e.view());
        inv.column_mut(j).assign(&col);
    }
    Ok(inv)
}

/// Ordinary least squares of `y` on the columns of `design`, solved through
/// the normal equations. Errors when the Gram matrix is numerically rank
/// deficient.
pub fn ols(design: ArrayView2<f64>, y: ArrayView1<f64>, tol: f64) -> Result<Array1<f64>> {
    let gram = design.t().dot(&design);
    let rhs = design.t().dot(&y);
    solve_spd(&gram, rhs.view(), tol)
}

/// Type-7 empirical quantile (linear interpolation between order statistics)
/// of an unsorted sample. `p` is clamped to [0, 1].
pub fn quantile_type7(sample: &[f64], p: f64) -> f64 {
    assert!(!sample.is_empty(), "quantile of empty sample");
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    quantile_type7_sorted(&sorted, p)
}

/// Type-7 quantile of an already sorted sample.
pub fn quantile_type7_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let p = p.clamp(0.0, 1.0);
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Mean of a slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n-1 denominator).
pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Upper-tail standard normal quantile for one-sided intervals.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    let n = statrs::distribution::Normal::new(0.0, 1.0).expect("unit normal");
    n.inverse_cdf(p)
}
