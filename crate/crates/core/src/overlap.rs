//! Overlapping subgroup support.
//!
//! Overlapping subgroup definitions (say male/female crossed with
//! young/senior) cannot be coded directly as treatment-interaction columns.
//! The fix: refine them into the partition generated by the distinct
//! membership patterns (the "atoms"), estimate per-atom effects, and map
//! estimates, anchors, and every bootstrap row back to the original
//! subgroups through the row-stochastic conditional-proportion matrix
//! `A[k][j] = P(atom j | subgroup k)`. Calibration then runs on the
//! transformed K-dimensional objects.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the proportion matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ASource {
    FromSample,
    External,
}

/// Atom labeling of a membership matrix.
#[derive(Debug, Clone)]
pub struct Atomization {
    /// Atom index per individual.
    pub labels: Vec<usize>,
    /// Distinct membership patterns, lexicographically ordered; atom j is
    /// `patterns[j]`.
    pub patterns: Vec<Vec<bool>>,
}

impl Atomization {
    pub fn n_atoms(&self) -> usize {
        self.patterns.len()
    }

    /// Indicator block: one column per atom.
    pub fn indicator_matrix(&self, n: usize) -> Array2<f64> {
        let mut z = Array2::<f64>::zeros((n, self.n_atoms()));
        for (i, &a) in self.labels.iter().enumerate() {
            z[[i, a]] = 1.0;
        }
        z
    }

    /// Interaction block: atom indicator times a treatment indicator, the
    /// coding that keeps per-atom coefficients interpretable as treatment
    /// effects.
    pub fn interaction_matrix(&self, treatment: ArrayView1<f64>) -> Array2<f64> {
        let n = treatment.len();
        let mut z = self.indicator_matrix(n);
        for i in 0..n {
            for j in 0..self.n_atoms() {
                z[[i, j]] *= treatment[i];
            }
        }
        z
    }
}

/// Options for rows that belong to no subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundPolicy {
    /// Reject all-zero membership rows.
    #[default]
    Reject,
    /// Collect them into an explicit background atom (the all-false
    /// pattern).
    BackgroundAtom,
}

/// Split overlapping subgroups into the partition generated by their
/// membership patterns. Atoms are ordered lexicographically by pattern.
pub fn atomize(membership: ArrayView2<f64>, background: BackgroundPolicy) -> Result<Atomization> {
    let n = membership.nrows();
    let k = membership.ncols();
    if n == 0 || k == 0 {
        return Err(Error::data("membership matrix is empty"));
    }
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    let mut row_patterns = Vec::with_capacity(n);
    for i in 0..n {
        let mut pat = Vec::with_capacity(k);
        for j in 0..k {
            let v = membership[[i, j]];
            if v != 0.0 && v != 1.0 {
                return Err(Error::data(format!(
                    "membership must be binary; found {v} at (row {i}, col {j})"
                )));
            }
            pat.push(v == 1.0);
        }
        if pat.iter().all(|&b| !b) && background == BackgroundPolicy::Reject {
            return Err(Error::data(format!(
                "individual {i} belongs to no subgroup; enable a background atom or fix the data"
            )));
        }
        if !patterns.contains(&pat) {
            patterns.push(pat.clone());
        }
        row_patterns.push(pat);
    }
    patterns.sort();
    let labels = row_patterns
        .into_iter()
        .map(|pat| patterns.iter().position(|p| *p == pat).expect("present"))
        .collect();
    Ok(Atomization { labels, patterns })
}

/// Conditional-proportion matrix and its provenance.
#[derive(Debug, Clone)]
pub struct OverlapSpec {
    pub a: Array2<f64>,
    pub source: ASource,
    pub subgroup_names: Vec<String>,
}

/// Estimate `A[k][j] = #(S_k and atom j) / #S_k` from the sample.
pub fn build_a_from_sample(
    membership: ArrayView2<f64>,
    atoms: &Atomization,
) -> Result<Array2<f64>> {
    let n = membership.nrows();
    let k = membership.ncols();
    let p1 = atoms.n_atoms();
    let mut counts = Array2::<f64>::zeros((k, p1));
    let mut group_sizes = vec![0usize; k];
    for i in 0..n {
        for g in 0..k {
            if membership[[i, g]] == 1.0 {
                group_sizes[g] += 1;
                counts[[g, atoms.labels[i]]] += 1.0;
            }
        }
    }
    for g in 0..k {
        if group_sizes[g] == 0 {
            return Err(Error::data(format!("subgroup {g} is empty")));
        }
        for j in 0..p1 {
            counts[[g, j]] /= group_sizes[g] as f64;
        }
    }
    Ok(counts)
}

/// Validate an externally supplied proportion table (rows must sum to one).
pub fn validate_external_a(a: ArrayView2<f64>) -> Result<()> {
    for (kk, row) in a.outer_iter().enumerate() {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::data(format!(
                "proportion row {kk} sums to {sum}, not 1"
            )));
        }
        if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::data(format!("proportion row {kk} leaves [0, 1]")));
        }
    }
    Ok(())
}

/// Check the complete-separation condition: every atom is contained in or
/// disjoint from every original subgroup. Returns the violating pairs.
pub fn check_complete_separation(
    membership: ArrayView2<f64>,
    atoms: &Atomization,
) -> (bool, Vec<(usize, usize)>) {
    let n = membership.nrows();
    let k = membership.ncols();
    let p1 = atoms.n_atoms();
    let mut inside = vec![vec![0usize; k]; p1];
    let mut total = vec![0usize; p1];
    for i in 0..n {
        let a = atoms.labels[i];
        total[a] += 1;
        for g in 0..k {
            if membership[[i, g]] == 1.0 {
                inside[a][g] += 1;
            }
        }
    }
    let mut violations = Vec::new();
    for (j, counts) in inside.iter().enumerate() {
        for (g, &c) in counts.iter().enumerate() {
            if c != 0 && c != total[j] {
                violations.push((j, g));
            }
        }
    }
    (violations.is_empty(), violations)
}

/// Map atom-scale estimates, anchors, and bootstrap rows to the original
/// subgroup scale: multiply everything by `A`.
pub fn transform_to_original(
    theta_estimates: ArrayView1<f64>,
    theta_replicates: ArrayView2<f64>,
    theta_anchor: ArrayView1<f64>,
    a: ArrayView2<f64>,
) -> Result<(Array1<f64>, Array2<f64>, Array1<f64>)> {
    let p1 = a.ncols();
    let k = a.nrows();
    if theta_estimates.len() != p1
        || theta_anchor.len() != p1
        || theta_replicates.ncols() != p1
    {
        return Err(Error::config(format!(
            "proportion matrix has {p1} atom columns; estimates do not match"
        )));
    }
    validate_external_a(a)?;
    let beta_estimates = a.dot(&theta_estimates);
    let beta_anchor = a.dot(&theta_anchor);
    let b = theta_replicates.nrows();
    let mut beta_replicates = Array2::<f64>::zeros((b, k));
    for (bi, row) in theta_replicates.outer_iter().enumerate() {
        let mapped = a.dot(&row);
        beta_replicates.row_mut(bi).assign(&mapped);
    }
    Ok((beta_estimates, beta_replicates, beta_anchor))
}
