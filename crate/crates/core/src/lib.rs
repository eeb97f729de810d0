//! Debiasing toolkit for machine-learning-predicted outcomes.
//!
//! Loss-minimizing predictors shrink extreme outcomes toward dense regions of
//! the training distribution. When such predictions stand in for true outcomes
//! in downstream analyses, difference-in-means and IPTW treatment-effect
//! estimates are attenuated toward zero. This crate implements post-hoc
//! corrections that undo the attenuation without fresh labels at analysis
//! time, plus the machinery to benchmark them:
//!
//! - [`calibration`] — estimate the linear shrinkage model (slope, intercept,
//!   noise variance) on a held-out labeled set and package it as a portable
//!   artifact.
//! - [`score`] — Gaussian-kernel density estimation and the log-density
//!   derivative (score function) with trimming in low-density regions.
//! - [`corrections`] — transform predictions: linear calibration correction
//!   (LCC), the empirical-Bayes Tweedie adjustment, and the PPI rectified
//!   mean.
//! - [`estimators`] — difference-in-means, self-normalized IPTW, and
//!   PPI-based average treatment effects.
//! - [`diagnostics`] — calibration-slope regression with a joint F-test
//!   against the unbiased null, MAE, and the score-swapping correlation
//!   diagnostic.
//! - [`sim`] — a seeded benchmark: confounded populations, a frozen random
//!   embedding network, small predictors trained under MSE or a
//!   quintile-bias-penalized loss, and a full sweep over true effect sizes.
//!
//! The workflow splits into an upstream phase (fit predictions, calibrate,
//! ship a [`data::CalibrationArtifact`]) and a downstream phase (correct
//! trial predictions, estimate effects). No ground-truth labels cross that
//! boundary except through the explicit PPI surface.

pub mod calibration;
pub mod corrections;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod score;
pub mod sim;
pub mod special;

pub use data::{AteReport, CalibrationArtifact, CalibrationPair, TrialData, TrialRecord};
pub use error::{Error, Result};
