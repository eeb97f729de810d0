//! Treatment-effect estimators over (possibly corrected) outcome values.
//!
//! All estimators are pure functions. IPTW uses the Hajek (self-normalized)
//! form, which equals difference-in-means under a constant propensity and is
//! variance-stable when weights vary.

use std::collections::HashMap;

use crate::data::{AteReport, EstimatorKind, Method, TrialData};
use crate::error::{Error, Result};

/// Where propensities come from when a trial is weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PropensitySpec {
    /// Use the trial's `propensity` column (must be present on every row).
    KnownColumn,
    /// `1 / (1 + exp(-confounder))`, the benchmark's assignment mechanism.
    SigmoidOfConfounder,
    /// A single constant in (0, 1) for every unit.
    Constant(f64),
}

impl PropensitySpec {
    pub fn constant(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::validation(format!(
                "constant propensity must lie strictly in (0, 1), got {p}"
            )));
        }
        Ok(PropensitySpec::Constant(p))
    }
}

/// Resolves one propensity per record according to the spec.
pub fn resolve_propensities(trial: &TrialData, spec: &PropensitySpec) -> Result<Vec<f64>> {
    trial
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| match spec {
            PropensitySpec::KnownColumn => r.propensity.ok_or_else(|| {
                Error::validation(format!(
                    "record {} ({}) has no propensity column value",
                    i, r.unit_id
                ))
            }),
            PropensitySpec::SigmoidOfConfounder => match r.confounder {
                Some(c) => Ok(sigmoid_propensity(c)),
                None => Err(Error::validation(format!(
                    "record {} ({}) has no confounder value to derive a propensity from",
                    i, r.unit_id
                ))),
            },
            PropensitySpec::Constant(p) => Ok(*p),
        })
        .collect()
}

/// `1 / (1 + exp(-c))`, strictly inside (0, 1) for finite `c`.
pub fn sigmoid_propensity(c: f64) -> f64 {
    1.0 / (1.0 + (-c).exp())
}

fn arm_counts(treated_flags: impl Iterator<Item = bool>) -> (usize, usize) {
    let mut n_treated = 0;
    let mut n_control = 0;
    for t in treated_flags {
        if t {
            n_treated += 1;
        } else {
            n_control += 1;
        }
    }
    (n_treated, n_control)
}

/// Difference of arm means: `mean(treated) - mean(control)`.
pub fn diff_in_means(outcomes: &[(f64, bool)], method: Method) -> Result<AteReport> {
    let (n_treated, n_control) = arm_counts(outcomes.iter().map(|(_, t)| *t));
    if n_treated == 0 || n_control == 0 {
        return Err(Error::degenerate(format!(
            "difference in means needs both arms non-empty (treated: {n_treated}, control: {n_control})"
        )));
    }
    let mut sum_t = 0.0;
    let mut sum_c = 0.0;
    for &(v, t) in outcomes {
        if t {
            sum_t += v;
        } else {
            sum_c += v;
        }
    }
    let tau_hat = sum_t / n_treated as f64 - sum_c / n_control as f64;
    Ok(AteReport { method, tau_hat, n_treated, n_control, estimator: EstimatorKind::DiffInMeans })
}

/// Hajek IPTW: treated units weighted by `1/e`, control by `1/(1-e)`, each
/// arm self-normalized by its weight total.
pub fn iptw_ate(records: &[(f64, bool, f64)], method: Method) -> Result<AteReport> {
    let (n_treated, n_control) = arm_counts(records.iter().map(|(_, t, _)| *t));
    if n_treated == 0 || n_control == 0 {
        return Err(Error::degenerate(format!(
            "IPTW needs both arms non-empty (treated: {n_treated}, control: {n_control})"
        )));
    }
    let mut wsum_t = 0.0;
    let mut wv_t = 0.0;
    let mut wsum_c = 0.0;
    let mut wv_c = 0.0;
    for &(v, t, e) in records {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::validation(format!(
                "propensity must lie strictly in (0, 1), got {e}"
            )));
        }
        if t {
            let w = 1.0 / e;
            wsum_t += w;
            wv_t += w * v;
        } else {
            let w = 1.0 / (1.0 - e);
            wsum_c += w;
            wv_c += w * v;
        }
    }
    let tau_hat = wv_t / wsum_t - wv_c / wsum_c;
    Ok(AteReport { method, tau_hat, n_treated, n_control, estimator: EstimatorKind::Iptw })
}

/// PPI-based ATE: per treatment arm, the rectified mean
/// `mean(arm predictions) - mean(f - y over that arm's labeled units)`,
/// then the difference of arms.
///
/// The imputed term averages over every unit in the arm (labeled ones
/// included); with full labels the estimator collapses to the
/// difference-in-means of the true outcomes. Labels are matched to records
/// by `unit_id` and must reference existing, unique units, with at least one
/// labeled unit in each arm.
pub fn ppi_ate(trial: &TrialData, labeled: &[(String, f64)]) -> Result<AteReport> {
    let (n_treated, n_control) = arm_counts(trial.records.iter().map(|r| r.treated));
    if n_treated == 0 || n_control == 0 {
        return Err(Error::degenerate(format!(
            "PPI estimation needs both arms non-empty (treated: {n_treated}, control: {n_control})"
        )));
    }
    if labeled.is_empty() {
        return Err(Error::validation("ppi_ate requires at least one labeled unit"));
    }

    let mut by_id: HashMap<&str, (f64, bool)> = HashMap::with_capacity(trial.records.len());
    for r in &trial.records {
        if by_id.insert(r.unit_id.as_str(), (r.y_pred, r.treated)).is_some() {
            return Err(Error::validation(format!(
                "duplicate unit_id {:?} in trial; PPI label matching needs unique ids",
                r.unit_id
            )));
        }
    }

    // (prediction, truth) pairs per arm, in label order.
    let mut labeled_t: Vec<(f64, f64)> = Vec::new();
    let mut labeled_c: Vec<(f64, f64)> = Vec::new();
    for (unit_id, y_true) in labeled {
        match by_id.get(unit_id.as_str()) {
            Some(&(y_pred, true)) => labeled_t.push((y_pred, *y_true)),
            Some(&(y_pred, false)) => labeled_c.push((y_pred, *y_true)),
            None => {
                return Err(Error::validation(format!(
                    "label references unknown unit_id {unit_id:?}"
                )))
            }
        }
    }

    let arm_mean = |treated: bool, labeled_arm: &[(f64, f64)]| -> Result<f64> {
        if labeled_arm.is_empty() {
            let arm = if treated { "treated" } else { "control" };
            return Err(Error::validation(format!(
                "no labeled units in the {arm} arm; PPI needs labels in both arms"
            )));
        }
        let preds: Vec<f64> = trial
            .records
            .iter()
            .filter(|r| r.treated == treated)
            .map(|r| r.y_pred)
            .collect();
        crate::corrections::ppi_mean(labeled_arm, &preds)
    };

    let tau_hat = arm_mean(true, &labeled_t)? - arm_mean(false, &labeled_c)?;
    Ok(AteReport {
        method: Method::Ppi,
        tau_hat,
        n_treated,
        n_control,
        estimator: EstimatorKind::PpiMeanDiff,
    })
}
