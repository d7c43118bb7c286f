//! Structured inference reports: a machine-readable JSON document plus a
//! grep-able human summary. Timing is printed to stderr, never written into
//! artifacts, so identical runs produce identical files.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use maxeffect::tuning::TuningResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineReport {
    pub point: f64,
    pub selected_index: usize,
    pub lower_bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceReport {
    /// Fully resolved settings; re-running from these reproduces the report.
    pub config: BTreeMap<String, String>,
    pub command: String,
    pub method: String,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    /// Names of the coordinates being ranked (original subgroups after an
    /// overlap transform).
    pub subgroup_names: Vec<String>,
    pub estimates: Vec<f64>,
    pub scales: Vec<f64>,
    pub anchor: Vec<f64>,
    pub selected_index: usize,
    pub selected_name: String,
    pub point_raw: f64,
    pub bias_reduced: f64,
    pub r_used: f64,
    pub tuning: Option<TuningResult>,
    pub b: usize,
    pub lambda: Option<f64>,
    /// (confidence level, one-sided lower bound).
    pub lower_bounds: Vec<(f64, f64)>,
    /// Summary quantiles of the modified bootstrap maxima.
    pub t_star_quantiles: Vec<(f64, f64)>,
    pub naive: Option<BaselineReport>,
    pub simultaneous: Option<BaselineReport>,
    pub warnings: Vec<String>,
}

impl InferenceReport {
    /// One grep-able line per confidence level plus a header.
    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "method={} n={} p1={} selected={} index={} point_raw={:.6} bias_reduced={:.6} r={:.4}\n",
            self.method,
            self.n,
            self.p1,
            self.selected_name,
            self.selected_index,
            self.point_raw,
            self.bias_reduced,
            self.r_used
        ));
        for (conf, lb) in &self.lower_bounds {
            out.push_str(&format!(
                "confidence={conf} selected={} bias_reduced={:.6} lower_bound={:.6}\n",
                self.selected_name, self.bias_reduced, lb
            ));
        }
        if let Some(naive) = &self.naive {
            for (conf, lb) in &naive.lower_bounds {
                out.push_str(&format!(
                    "baseline=naive confidence={conf} point={:.6} lower_bound={:.6}\n",
                    naive.point, lb
                ));
            }
        }
        if let Some(sim) = &self.simultaneous {
            for (conf, lb) in &sim.lower_bounds {
                out.push_str(&format!(
                    "baseline=simultaneous confidence={conf} point={:.6} lower_bound={:.6}\n",
                    sim.point, lb
                ));
            }
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}
