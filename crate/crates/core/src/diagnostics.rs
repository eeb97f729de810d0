//! Debiasing quality diagnostics.
//!
//! The central diagnostic regresses estimated effects on true effects across
//! a sweep and tests the joint null "slope = 1 and intercept = 0" with an
//! F-test on two restrictions:
//!
//! `F = ((RSS_restricted - RSS_unrestricted) / 2) / (RSS_unrestricted / (n - 2))`
//!
//! where the restricted model is the identity (`tau_hat = tau_true`), so
//! `RSS_restricted = sum((tau_hat - tau_true)^2)`. The p-value comes from the
//! upper tail of F(2, n-2). An unbiased method has slope near 1 and a large
//! p-value; attenuated methods are flagged by small slopes and tiny p-values.

use std::io::Write;

use crate::error::{Error, Result};
use crate::score::ScoreModel;
use crate::special::inc_beta;

/// Calibration-regression summary for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDiagnostic {
    pub slope: f64,
    pub intercept: f64,
    /// Joint F-statistic for slope = 1, intercept = 0; `+inf` when the
    /// unrestricted fit is perfect but the identity is not.
    pub f_statistic: f64,
    pub p_value: f64,
    pub mae: f64,
    pub n_points: usize,
    pub pearson_r: f64,
}

/// Regresses `tau_hat` on `tau_true` and summarizes bias.
///
/// Requires equal lengths, at least 4 points, and non-constant `tau_true`.
/// Perfect fits are handled by a sentinel: if the unrestricted residuals are
/// exactly zero, F is `+inf` with p = 0 unless the restricted residuals are
/// zero too (the estimates are identical to the truth), in which case F = 0
/// and p = 1.
pub fn calibration_regression(tau_true: &[f64], tau_hat: &[f64]) -> Result<CalibrationDiagnostic> {
    if tau_true.len() != tau_hat.len() {
        return Err(Error::validation(format!(
            "length mismatch: {} true values vs {} estimates",
            tau_true.len(),
            tau_hat.len()
        )));
    }
    let n = tau_true.len();
    if n < 4 {
        return Err(Error::validation(format!(
            "calibration regression needs at least 4 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = tau_true.iter().sum::<f64>() / nf;
    let mean_y = tau_hat.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in tau_true.iter().zip(tau_hat) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::degenerate(
            "tau_true is constant; the calibration slope is unidentified",
        ));
    }

    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let rss_unrestricted: f64 = tau_true
        .iter()
        .zip(tau_hat)
        .map(|(&x, &y)| {
            let r = y - slope * x - intercept;
            r * r
        })
        .sum();
    let rss_restricted: f64 = tau_true
        .iter()
        .zip(tau_hat)
        .map(|(&x, &y)| (y - x) * (y - x))
        .sum();

    let (f_statistic, p_value) = if rss_unrestricted == 0.0 {
        if rss_restricted == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = ((rss_restricted - rss_unrestricted) / 2.0) / (rss_unrestricted / (nf - 2.0));
        // Nesting guarantees rss_restricted >= rss_unrestricted in exact
        // arithmetic; clamp away any tiny negative rounding.
        let f = f.max(0.0);
        (f, f_upper_tail(f, 2, (n - 2) as u32)?)
    };

    let mae =
        tau_true.iter().zip(tau_hat).map(|(&x, &y)| (y - x).abs()).sum::<f64>() / nf;
    let pearson_r = if syy == 0.0 { 0.0 } else { sxy / (sxx.sqrt() * syy.sqrt()) };

    Ok(CalibrationDiagnostic {
        slope,
        intercept,
        f_statistic,
        p_value,
        mae,
        n_points: n,
        pearson_r: pearson_r.clamp(-1.0, 1.0),
    })
}

/// Upper tail probability `P(F_{df1, df2} > f)` via the regularized
/// incomplete beta function: `I_{df2 / (df2 + df1 f)}(df2/2, df1/2)`.
pub fn f_upper_tail(f: f64, df1: u32, df2: u32) -> Result<f64> {
    if df1 < 1 || df2 < 1 {
        return Err(Error::validation(format!(
            "degrees of freedom must be at least 1, got ({df1}, {df2})"
        )));
    }
    if !f.is_finite() {
        if f == f64::INFINITY {
            return Ok(0.0);
        }
        return Err(Error::validation(format!("F statistic must be finite, got {f}")));
    }
    if f < 0.0 {
        return Err(Error::validation(format!("F statistic must be non-negative, got {f}")));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    let d1 = f64::from(df1);
    let d2 = f64::from(df2);
    let x = d2 / (d2 + d1 * f);
    Ok(inc_beta(x, d2 / 2.0, d1 / 2.0))
}

/// Pearson correlation of the two fitted score functions over a grid.
///
/// Both samples get their own KDE (Scott bandwidth, default regularization);
/// strongly correlated scores indicate the two samples carry interchangeable
/// density information.
pub fn score_correlation(
    sample_a: &[f64],
    sample_b: &[f64],
    eval_points: &[f64],
) -> Result<f64> {
    if eval_points.len() < 2 {
        return Err(Error::validation("score correlation needs at least 2 evaluation points"));
    }
    let model_a = ScoreModel::fit(sample_a)?;
    let model_b = ScoreModel::fit(sample_b)?;
    let sa: Vec<f64> = eval_points.iter().map(|&y| model_a.score_at(y)).collect();
    let sb: Vec<f64> = eval_points.iter().map(|&y| model_b.score_at(y)).collect();
    pearson(&sa, &sb)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::degenerate(
            "a score vector is constant over the evaluation grid; correlation is undefined",
        ));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Writes per-method diagnostics as CSV with the columns
/// `method,mae,slope,f_statistic,p_value`.
pub fn write_summary_csv<W: Write>(
    rows: &[(String, CalibrationDiagnostic)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "method,mae,slope,f_statistic,p_value")?;
    for (method, d) in rows {
        writeln!(out, "{},{},{},{},{}", method, d.mae, d.slope, d.f_statistic, d.p_value)?;
    }
    Ok(())
}
