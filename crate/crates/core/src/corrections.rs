//! Prediction-level debiasing transforms.
//!
//! Three ways to turn a shrunken prediction back into an outcome-scale
//! value:
//!
//! - `naive`: pass the prediction through unchanged (the baseline every
//!   correction is judged against);
//! - `lcc`: invert the fitted shrinkage line, `(y_hat - m) / k`;
//! - `tweedie`: the empirical-Bayes adjustment
//!   `(y_hat + sigma^2 * score(y_hat)) / k`, where the score is the
//!   log-density derivative of the predictions in the unit's own treatment
//!   arm. When the score term vanishes (flat density) this reduces to an
//!   intercept-free LCC.
//!
//! Plus the PPI rectified mean, which trades fresh labels for a direct
//! bias estimate instead of modeling the shrinkage.

use std::fmt;

use crate::data::{CalibrationArtifact, TrialData};
use crate::error::{Error, Result};
use crate::score::ScoreModel;

/// Correction applied to individual predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionMethod {
    Naive,
    Lcc,
    Tweedie,
}

impl fmt::Display for CorrectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CorrectionMethod::Naive => "naive",
            CorrectionMethod::Lcc => "lcc",
            CorrectionMethod::Tweedie => "tweedie",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for CorrectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(CorrectionMethod::Naive),
            "lcc" => Ok(CorrectionMethod::Lcc),
            "tweedie" => Ok(CorrectionMethod::Tweedie),
            other => Err(Error::validation(format!(
                "unknown correction method {other:?} (expected naive, lcc, or tweedie)"
            ))),
        }
    }
}

/// One corrected outcome value, keyed back to its unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedOutcome {
    pub unit_id: String,
    pub value: f64,
    pub method: CorrectionMethod,
}

/// Linear calibration correction: `(y_hat - m_hat) / k_hat`.
pub fn lcc_correct(artifact: &CalibrationArtifact, y_hat: f64) -> f64 {
    (y_hat - artifact.m_hat) / artifact.k_hat
}

/// The Tweedie adjustment with an explicit score value:
/// `(y_hat + sigma2_hat * score) / k_hat`.
///
/// This is the raw identity; use it directly when the score comes from an
/// analytic density rather than a fitted one.
pub fn tweedie_adjust(artifact: &CalibrationArtifact, score: f64, y_hat: f64) -> f64 {
    (y_hat + artifact.sigma2_hat * score) / artifact.k_hat
}

/// The Tweedie adjustment with the score evaluated from a fitted
/// [`ScoreModel`]. The model must be fitted on predictions from the same
/// treatment arm as `y_hat`.
pub fn tweedie_correct(
    artifact: &CalibrationArtifact,
    score_model: &ScoreModel,
    y_hat: f64,
) -> f64 {
    tweedie_adjust(artifact, score_model.score_at(y_hat), y_hat)
}

/// PPI rectified mean: `mean(unlabeled) - mean(f_x - y over labeled)`.
///
/// `labeled` holds `(prediction, true outcome)` pairs; `unlabeled` holds
/// predictions only. The rectifier is the average prediction error on the
/// labeled subset, so a perfect predictor leaves the plain unlabeled mean.
pub fn ppi_mean(labeled: &[(f64, f64)], unlabeled: &[f64]) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::validation("ppi_mean requires at least one labeled pair"));
    }
    if unlabeled.is_empty() {
        return Err(Error::validation("ppi_mean requires at least one unlabeled prediction"));
    }
    let imputed = unlabeled.iter().sum::<f64>() / unlabeled.len() as f64;
    let rectifier =
        labeled.iter().map(|(f_x, y)| f_x - y).sum::<f64>() / labeled.len() as f64;
    Ok(imputed - rectifier)
}

/// Applies a correction to every record of a trial, preserving order.
///
/// For `tweedie`, a score model is fitted per treatment arm on that arm's
/// own predictions, so the correction of one arm never depends on the other
/// arm's values.
pub fn correct_trial(
    trial: &TrialData,
    artifact: &CalibrationArtifact,
    method: CorrectionMethod,
) -> Result<Vec<CorrectedOutcome>> {
    artifact.validate()?;
    let corrected_value: Box<dyn Fn(f64, bool) -> f64> = match method {
        CorrectionMethod::Naive => Box::new(|y_hat, _| y_hat),
        CorrectionMethod::Lcc => Box::new(move |y_hat, _| lcc_correct(artifact, y_hat)),
        CorrectionMethod::Tweedie => {
            let arm_model = |treated: bool| -> Result<ScoreModel> {
                let arm_name = if treated { "treated" } else { "control" };
                let preds: Vec<f64> = trial
                    .records
                    .iter()
                    .filter(|r| r.treated == treated)
                    .map(|r| r.y_pred)
                    .collect();
                ScoreModel::fit(&preds).map_err(|e| {
                    Error::degenerate(format!(
                        "cannot fit a score model on the {arm_name} arm: {e}"
                    ))
                })
            };
            let treated_model = arm_model(true)?;
            let control_model = arm_model(false)?;
            Box::new(move |y_hat, treated| {
                let model = if treated { &treated_model } else { &control_model };
                tweedie_correct(artifact, model, y_hat)
            })
        }
    };

    Ok(trial
        .records
        .iter()
        .map(|r| CorrectedOutcome {
            unit_id: r.unit_id.clone(),
            value: corrected_value(r.y_pred, r.treated),
            method,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{SigmaSource, TrialRecord};
    use crate::score::analytic_gaussian_score;
    use approx::assert_relative_eq;

    fn artifact(k: f64, m: f64, s2: f64) -> CalibrationArtifact {
        CalibrationArtifact::new(k, m, s2, 100, SigmaSource::Calibration).unwrap()
    }

    #[test]
    fn lcc_inverts_the_line() {
        assert_relative_eq!(lcc_correct(&artifact(0.5, 10.0, 0.0), 35.0), 50.0);
        assert_relative_eq!(lcc_correct(&artifact(0.8, 2.0, 0.0), 42.0), 50.0);
        let id = artifact(1.0, 0.0, 0.0);
        for y in [-3.0, 0.0, 17.5] {
            assert_eq!(lcc_correct(&id, y), y);
        }
    }

    #[test]
    fn lcc_is_affine() {
        let art = artifact(0.7, 3.0, 0.0);
        let base = lcc_correct(&art, 0.0);
        for y in [-2.0, 1.0, 8.0] {
            let linear_part = lcc_correct(&art, y) - base;
            assert_relative_eq!(linear_part, y / 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn tweedie_reduces_to_lcc_without_intercept_when_score_is_zero() {
        let art = artifact(0.8, 5.0, 2.0);
        for y in [1.0, 10.0, -4.0] {
            assert_relative_eq!(tweedie_adjust(&art, 0.0, y), y / 0.8, epsilon = 1e-12);
        }
    }

    #[test]
    fn tweedie_is_identity_with_zero_variance_unit_slope() {
        let art = artifact(1.0, 0.0, 0.0);
        let model = ScoreModel::with_bandwidth(vec![0.0, 1.0], 1.0).unwrap();
        for y in [-2.0, 0.3, 5.0] {
            assert_eq!(tweedie_correct(&art, &model, y), y);
        }
    }

    // Conjugate-Gaussian oracle: latent W ~ N(mu0, tau0^2), observation
    // y_hat = W + eps with eps ~ N(0, sigma^2), k = 1. The marginal is
    // N(mu0, tau0^2 + sigma^2), and the adjusted value must equal the
    // closed-form posterior mean (sigma^2 mu0 + tau0^2 y_hat) / (sigma^2 + tau0^2).
    #[test]
    fn tweedie_matches_conjugate_posterior_mean() {
        let (mu0, tau0_sq, sigma_sq) = (0.0, 3.0, 1.0);
        let art = artifact(1.0, 0.0, sigma_sq);
        let marginal_var = tau0_sq + sigma_sq;
        for i in 0..=100 {
            let y = -10.0 + 0.2 * i as f64;
            let score = analytic_gaussian_score(mu0, marginal_var, y).unwrap();
            let adjusted = tweedie_adjust(&art, score, y);
            let posterior = (sigma_sq * mu0 + tau0_sq * y) / (sigma_sq + tau0_sq);
            assert_relative_eq!(adjusted, posterior, epsilon = 1e-12);
        }
        // Spot value: y_hat = 4 -> 3.0.
        let score = analytic_gaussian_score(mu0, marginal_var, 4.0).unwrap();
        assert_relative_eq!(tweedie_adjust(&art, score, 4.0), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn ppi_mean_examples() {
        // Perfect predictor: rectifier is exactly zero.
        let labeled = [(4.0, 4.0), (8.0, 8.0)];
        let unlabeled = [6.0, 6.0, 9.0];
        assert_eq!(ppi_mean(&labeled, &unlabeled).unwrap(), 7.0);

        // Constant bias b is subtracted.
        let labeled = [(5.0, 3.0), (9.0, 7.0)];
        assert_relative_eq!(ppi_mean(&labeled, &unlabeled).unwrap(), 5.0, epsilon = 1e-12);

        // Rectifier (1 + (-1)) / 2 = 0.
        let labeled = [(5.0, 4.0), (7.0, 8.0)];
        assert_eq!(ppi_mean(&labeled, &unlabeled).unwrap(), 7.0);
    }

    #[test]
    fn ppi_mean_rejects_empty_inputs() {
        assert!(ppi_mean(&[], &[1.0]).is_err());
        assert!(ppi_mean(&[(1.0, 1.0)], &[]).is_err());
    }

    #[test]
    fn ppi_exactness_when_unlabeled_equals_labeled() {
        let labeled = [(1.25, 0.5), (-0.75, 2.0), (3.5, 3.0)];
        let unlabeled: Vec<f64> = labeled.iter().map(|(f, _)| *f).collect();
        let mean_y = labeled.iter().map(|(_, y)| y).sum::<f64>() / 3.0;
        assert_relative_eq!(ppi_mean(&labeled, &unlabeled).unwrap(), mean_y, epsilon = 1e-12);
    }

    fn two_arm_trial(treated: &[f64], control: &[f64]) -> TrialData {
        let mut records = Vec::new();
        for (i, &p) in treated.iter().enumerate() {
            records.push(TrialRecord {
                unit_id: format!("t{i}"),
                y_pred: p,
                treated: true,
                confounder: None,
                propensity: None,
            });
        }
        for (i, &p) in control.iter().enumerate() {
            records.push(TrialRecord {
                unit_id: format!("c{i}"),
                y_pred: p,
                treated: false,
                confounder: None,
                propensity: None,
            });
        }
        TrialData { trial_id: "test".into(), records }
    }

    #[test]
    fn correct_trial_naive_copies_predictions() {
        let trial = two_arm_trial(&[1.0, 2.0], &[3.0]);
        let art = artifact(0.5, 0.0, 1.0);
        let out = correct_trial(&trial, &art, CorrectionMethod::Naive).unwrap();
        let values: Vec<f64> = out.iter().map(|o| o.value).collect();
        assert_eq!(values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn correct_trial_lcc_doubles_under_half_slope() {
        let trial = two_arm_trial(&[1.0, 2.0], &[3.0]);
        let art = artifact(0.5, 0.0, 1.0);
        let out = correct_trial(&trial, &art, CorrectionMethod::Lcc).unwrap();
        let values: Vec<f64> = out.iter().map(|o| o.value).collect();
        assert_eq!(values, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn tweedie_corrections_condition_on_arm() {
        // Permuting the control arm's predictions must leave every treated
        // correction bit-identical: the treated score model never sees them.
        let treated = [0.1, 0.9, 1.7, 2.2, 3.0];
        let control = [5.0, 6.5, 7.0, 8.1];
        let art = artifact(0.9, 0.0, 0.5);

        let out_a = correct_trial(
            &two_arm_trial(&treated, &control),
            &art,
            CorrectionMethod::Tweedie,
        )
        .unwrap();
        let permuted = [8.1, 7.0, 5.0, 6.5];
        let out_b = correct_trial(
            &two_arm_trial(&treated, &permuted),
            &art,
            CorrectionMethod::Tweedie,
        )
        .unwrap();
        for i in 0..treated.len() {
            assert_eq!(out_a[i].value.to_bits(), out_b[i].value.to_bits());
        }
    }

    #[test]
    fn tweedie_names_the_degenerate_arm() {
        let trial = two_arm_trial(&[1.0, 1.0], &[3.0, 4.0]);
        let err =
            correct_trial(&trial, &artifact(1.0, 0.0, 1.0), CorrectionMethod::Tweedie).unwrap_err();
        assert!(err.to_string().contains("treated arm"), "{err}");
    }

    #[test]
    fn order_is_preserved() {
        let trial = two_arm_trial(&[1.0, 2.0, 3.0], &[4.0, 5.0]);
        let art = artifact(1.0, 0.0, 0.0);
        let out = correct_trial(&trial, &art, CorrectionMethod::Naive).unwrap();
        let ids: Vec<&str> = out.iter().map(|o| o.unit_id.as_str()).collect();
        assert_eq!(ids, vec!["t0", "t1", "t2", "c0", "c1"]);
    }
}
