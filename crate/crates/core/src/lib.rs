//! Estimation and sharp one-sided inference for the best subgroup treatment
//! effect in high-dimensional linear models.
//!
//! The library fits `Y = intercept + Z'beta + X'gamma + noise` where `Z`
//! carries the subgroup (treatment-effect-heterogeneity) block and `X` a
//! possibly high-dimensional covariate block, then answers: how large is the
//! largest coordinate of `beta`, and how large is the effect of the subgroup
//! we just picked because it looked best? Plug-in maxima of noisy estimates
//! are biased upward; the calibrated bootstrap here corrects both that
//! selection bias and the penalization bias of the underlying estimators.
//!
//! Two estimation routes are provided:
//! - [`debiased`]: de-sparsified Lasso coordinates with a wild bootstrap,
//!   suited to many subgroups;
//! - [`rsplit`]: repeated data splitting (select on one half, refit OLS on
//!   the other, average), suited to a small, fixed number of subgroups.
//!
//! [`calibration`] turns either route's replicates into bias-reduced point
//! estimates and one-sided lower confidence bounds; [`tuning`] picks the
//! calibration exponent by cross-validation; [`overlap`] maps overlapping
//! subgroup definitions onto a non-overlapping atomic partition and back;
//! [`sim`] generates the synthetic designs and runs the Monte Carlo harness
//! used for validation.

pub mod calibration;
pub mod data;
pub mod debiased;
pub mod error;
pub mod lasso;
pub mod linalg;
pub mod overlap;
pub mod pipeline;
pub mod rng;
pub mod rsplit;
pub mod sim;
pub mod tuning;

pub use error::{Error, Result};
