//! Core domain types, file ingestion, and artifact serialization.
//!
//! File formats:
//! - calibration pairs: CSV with header `y_true,y_pred` (unknown columns ignored)
//! - trial data: CSV with header `unit_id,y_pred,treatment` and optional
//!   `confounder,propensity` columns
//! - labels (PPI): CSV with header `unit_id,y_true`
//! - calibration artifact: JSON document with exactly the fields
//!   `schema_version, k_hat, m_hat, sigma2_hat, n_cal, sigma_source`
//!
//! Ingestion is strict about values (NaN/Inf and malformed numbers are hard
//! errors naming the row and column) and tolerant about extra columns, so
//! real survey exports load unchanged. No row is ever silently dropped.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Artifact schema understood by this build.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

/// One labeled observation from the held-out calibration set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPair {
    pub y_true: f64,
    pub y_pred: f64,
}

/// Which split the noise variance was estimated on.
///
/// Under an overfit upstream model the two differ: training residuals stay
/// small while calibration residuals grow, and the choice changes how strong
/// the Tweedie adjustment is. Both are supported; `calibration` is the
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSource {
    Calibration,
    Training,
}

impl fmt::Display for SigmaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSource::Calibration => write!(f, "calibration"),
            SigmaSource::Training => write!(f, "training"),
        }
    }
}

impl FromStr for SigmaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibration" => Ok(SigmaSource::Calibration),
            "training" => Ok(SigmaSource::Training),
            other => Err(Error::validation(format!(
                "unknown sigma source {other:?} (expected \"calibration\" or \"training\")"
            ))),
        }
    }
}

/// The upstream product: everything a downstream team needs to correct
/// shrinkage in predictions without seeing any labels.
///
/// `k_hat` and `m_hat` come from regressing predictions on true outcomes on a
/// held-out calibration set; `sigma2_hat` is the residual noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationArtifact {
    pub schema_version: u32,
    /// Shrinkage slope; must be positive since corrections divide by it.
    pub k_hat: f64,
    /// Intercept, in outcome units.
    pub m_hat: f64,
    /// Residual noise variance, in squared outcome units.
    pub sigma2_hat: f64,
    /// Number of calibration pairs the fit used.
    pub n_cal: usize,
    pub sigma_source: SigmaSource,
}

impl CalibrationArtifact {
    pub fn new(
        k_hat: f64,
        m_hat: f64,
        sigma2_hat: f64,
        n_cal: usize,
        sigma_source: SigmaSource,
    ) -> Result<Self> {
        let artifact = CalibrationArtifact {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            k_hat,
            m_hat,
            sigma2_hat,
            n_cal,
            sigma_source,
        };
        artifact.validate()?;
        Ok(artifact)
    }

    /// Checks the field invariants (positive slope, non-negative variance,
    /// at least 3 calibration pairs, finite values).
    pub fn validate(&self) -> Result<()> {
        if !self.k_hat.is_finite() || !self.m_hat.is_finite() || !self.sigma2_hat.is_finite() {
            return Err(Error::validation("artifact fields must be finite"));
        }
        if self.k_hat <= 0.0 {
            return Err(Error::validation(format!(
                "artifact k_hat must be positive, got {}; corrections divide by it",
                self.k_hat
            )));
        }
        if self.sigma2_hat < 0.0 {
            return Err(Error::validation(format!(
                "artifact sigma2_hat must be non-negative, got {}",
                self.sigma2_hat
            )));
        }
        if self.n_cal < 3 {
            return Err(Error::validation(format!(
                "artifact n_cal must be at least 3, got {}",
                self.n_cal
            )));
        }
        Ok(())
    }

    /// Writes the artifact as a JSON document. Round-trips all floats at
    /// full precision.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::MalformedArtifact(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Reads and validates an artifact document. Rejects unknown schema
    /// versions before looking at any other field.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::MalformedArtifact(format!("{}: {e}", path.display())))?;
        let version = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| {
                Error::MalformedArtifact(format!(
                    "{}: missing integer field `schema_version`",
                    path.display()
                ))
            })?;
        if version != u64::from(ARTIFACT_SCHEMA_VERSION) {
            return Err(Error::SchemaVersion {
                found: version.min(u64::from(u32::MAX)) as u32,
                supported: ARTIFACT_SCHEMA_VERSION,
            });
        }
        let artifact: CalibrationArtifact = serde_json::from_value(value)
            .map_err(|e| Error::MalformedArtifact(format!("{}: {e}", path.display())))?;
        artifact.validate()?;
        Ok(artifact)
    }
}

/// One downstream unit: a prediction, a treatment flag, and optional
/// confounder / known propensity. Never carries a true outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub unit_id: String,
    pub y_pred: f64,
    pub treated: bool,
    pub confounder: Option<f64>,
    /// If present, constrained to the open interval (0, 1).
    pub propensity: Option<f64>,
}

/// An ordered downstream trial table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub trial_id: String,
    pub records: Vec<TrialRecord>,
}

impl TrialData {
    pub fn n_treated(&self) -> usize {
        self.records.iter().filter(|r| r.treated).count()
    }

    pub fn n_control(&self) -> usize {
        self.records.len() - self.n_treated()
    }
}

/// Which pipeline produced the outcome values an estimate was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Naive,
    Lcc,
    Tweedie,
    Ppi,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Naive => "naive",
            Method::Lcc => "lcc",
            Method::Tweedie => "tweedie",
            Method::Ppi => "ppi",
            Method::Oracle => "oracle",
        };
        write!(f, "{s}")
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Method::Naive),
            "lcc" => Ok(Method::Lcc),
            "tweedie" => Ok(Method::Tweedie),
            "ppi" => Ok(Method::Ppi),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::validation(format!("unknown method {other:?}"))),
        }
    }
}

/// The estimator an [`AteReport`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    DiffInMeans,
    Iptw,
    PpiMeanDiff,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorKind::DiffInMeans => "diff_in_means",
            EstimatorKind::Iptw => "iptw",
            EstimatorKind::PpiMeanDiff => "ppi_mean_diff",
        };
        write!(f, "{s}")
    }
}

/// One method's treatment-effect estimate with arm sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct AteReport {
    pub method: Method,
    pub tau_hat: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub estimator: EstimatorKind,
}

fn parse_error(path: &Path, row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Parses a required finite float cell.
fn parse_cell(path: &Path, row: usize, column: &str, raw: &str) -> Result<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(parse_error(path, row, column, "empty cell"));
    }
    let value: f64 = trimmed
        .parse()
        .map_err(|_| parse_error(path, row, column, format!("not a number: {trimmed:?}")))?;
    if !value.is_finite() {
        return Err(parse_error(path, row, column, format!("non-finite value: {trimmed:?}")));
    }
    Ok(value)
}

/// Looks up required column positions by name in a CSV header.
fn column_index(path: &Path, headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| parse_error(path, 0, name, "missing required column"))
}

fn open_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(csv::ReaderBuilder::new().flexible(false).from_reader(file))
}

/// Loads `y_true,y_pred` pairs from a CSV file, preserving row order.
/// Unknown columns are ignored; malformed or non-finite cells are errors.
pub fn load_calibration_pairs(path: &Path) -> Result<Vec<CalibrationPair>> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 0, "<header>", e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(parse_error(path, 0, "<header>", "empty file"));
    }
    let col_true = column_index(path, &headers, "y_true")?;
    let col_pred = column_index(path, &headers, "y_pred")?;

    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_error(path, row, "<record>", e.to_string()))?;
        let y_true = parse_cell(path, row, "y_true", &record[col_true])?;
        let y_pred = parse_cell(path, row, "y_pred", &record[col_pred])?;
        pairs.push(CalibrationPair { y_true, y_pred });
    }
    if pairs.is_empty() {
        return Err(parse_error(path, 0, "<body>", "empty file: no data rows"));
    }
    Ok(pairs)
}

/// Loads a downstream trial table. The treatment column must be exactly 0 or
/// 1; a propensity column, when present, must lie strictly inside (0, 1).
/// Missing optional cells are allowed and load as `None`.
pub fn load_trial(path: &Path) -> Result<TrialData> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 0, "<header>", e.to_string()))?
        .clone();
    let col_id = column_index(path, &headers, "unit_id")?;
    let col_pred = column_index(path, &headers, "y_pred")?;
    let col_treat = column_index(path, &headers, "treatment")?;
    let col_conf = headers.iter().position(|h| h.trim() == "confounder");
    let col_prop = headers.iter().position(|h| h.trim() == "propensity");

    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_error(path, row, "<record>", e.to_string()))?;
        let unit_id = record[col_id].trim().to_string();
        if unit_id.is_empty() {
            return Err(parse_error(path, row, "unit_id", "empty cell"));
        }
        let y_pred = parse_cell(path, row, "y_pred", &record[col_pred])?;
        let treat_value = parse_cell(path, row, "treatment", &record[col_treat])?;
        let treated = if treat_value == 0.0 {
            false
        } else if treat_value == 1.0 {
            true
        } else {
            return Err(Error::validation(format!(
                "{} row {row}: treatment must be 0 or 1, got {treat_value}",
                path.display()
            )));
        };
        let optional = |col: Option<usize>, name: &str| -> Result<Option<f64>> {
            match col {
                Some(c) if !record[c].trim().is_empty() => {
                    parse_cell(path, row, name, &record[c]).map(Some)
                }
                _ => Ok(None),
            }
        };
        let confounder = optional(col_conf, "confounder")?;
        let propensity = optional(col_prop, "propensity")?;
        if let Some(e) = propensity {
            if e <= 0.0 || e >= 1.0 {
                return Err(Error::validation(format!(
                    "{} row {row}: propensity must lie strictly in (0, 1), got {e}",
                    path.display()
                )));
            }
        }
        records.push(TrialRecord { unit_id, y_pred, treated, confounder, propensity });
    }
    if records.is_empty() {
        return Err(parse_error(path, 0, "<body>", "empty file: no data rows"));
    }
    let trial_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trial".to_string());
    Ok(TrialData { trial_id, records })
}

/// Loads `unit_id,y_true` label rows for the PPI surface.
pub fn load_labels(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 0, "<header>", e.to_string()))?
        .clone();
    let col_id = column_index(path, &headers, "unit_id")?;
    let col_true = column_index(path, &headers, "y_true")?;

    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_error(path, row, "<record>", e.to_string()))?;
        let unit_id = record[col_id].trim().to_string();
        if unit_id.is_empty() {
            return Err(parse_error(path, row, "unit_id", "empty cell"));
        }
        let y_true = parse_cell(path, row, "y_true", &record[col_true])?;
        labels.push((unit_id, y_true));
    }
    if labels.is_empty() {
        return Err(parse_error(path, 0, "<body>", "empty file: no data rows"));
    }
    Ok(labels)
}
