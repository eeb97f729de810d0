//! Upstream calibration: fit the linear shrinkage model on held-out labeled
//! pairs and package it as a [`CalibrationArtifact`].
//!
//! The model is `y_pred = k * y_true + m + e` with mean-zero noise `e`. The
//! slope `k` is what attenuates downstream effect estimates; the residual
//! variance drives the Tweedie adjustment.

use crate::data::{CalibrationArtifact, CalibrationPair, SigmaSource};
use crate::error::{Error, Result};

/// Ordinary least squares of predictions on true outcomes.
#[derive(Debug, Clone)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Per-pair residuals `y_pred - slope * y_true - intercept`, input order.
    pub residuals: Vec<f64>,
    /// Fraction of prediction variance explained by the line, in [0, 1].
    pub r_squared: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

/// Fits `y_pred ~ y_true` by OLS.
///
/// Requires at least 3 pairs and non-constant `y_true`.
pub fn fit_linear_calibration(pairs: &[CalibrationPair]) -> Result<LinearFit> {
    if pairs.len() < 3 {
        return Err(Error::validation(format!(
            "need at least 3 calibration pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_true = pairs.iter().map(|p| p.y_true).sum::<f64>() / n;
    let mean_pred = pairs.iter().map(|p| p.y_pred).sum::<f64>() / n;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut spp = 0.0;
    for p in pairs {
        let dx = p.y_true - mean_true;
        let dp = p.y_pred - mean_pred;
        sxx += dx * dx;
        sxy += dx * dp;
        spp += dp * dp;
    }
    if sxx == 0.0 {
        return Err(Error::degenerate(
            "y_true is constant across the calibration set; the shrinkage slope is unidentified",
        ));
    }

    let slope = sxy / sxx;
    let intercept = mean_pred - slope * mean_true;
    let residuals: Vec<f64> =
        pairs.iter().map(|p| p.y_pred - slope * p.y_true - intercept).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = if spp == 0.0 { 1.0 } else { (1.0 - rss / spp).clamp(0.0, 1.0) };

    Ok(LinearFit { slope, intercept, residuals, r_squared, rss })
}

/// Noise variance of the calibration fit: the mean squared residual of the
/// full fit (intercept subtracted), `(1/n) * sum((y_pred - k*y_true - m)^2)`.
pub fn estimate_noise_variance(pairs: &[CalibrationPair], fit: &LinearFit) -> Result<f64> {
    if pairs.len() != fit.residuals.len() {
        return Err(Error::validation(format!(
            "fit has {} residuals but {} pairs were supplied",
            fit.residuals.len(),
            pairs.len()
        )));
    }
    Ok(fit.rss / pairs.len() as f64)
}

/// Packages a fit into a portable artifact. Fails when the slope is not
/// positive: a non-positive slope means the predictions are uncorrelated or
/// anti-correlated with the truth, and no linear inversion can recover
/// outcome-scale values from them.
pub fn build_artifact(
    fit: &LinearFit,
    sigma2: f64,
    n_cal: usize,
    sigma_source: SigmaSource,
) -> Result<CalibrationArtifact> {
    if fit.slope <= 0.0 {
        return Err(Error::validation(format!(
            "calibration slope is {:.6}; predictions are anti-correlated with outcomes \
             and cannot be linearly inverted",
            fit.slope
        )));
    }
    CalibrationArtifact::new(fit.slope, fit.intercept, sigma2, n_cal, sigma_source)
}
