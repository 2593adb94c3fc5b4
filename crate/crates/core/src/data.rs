//! Observed-data structures shared by estimators, diagnostics and simulations.
//!
//! Outcomes of unlabeled rows cannot be stored in a [`Dataset`]: a row is
//! either [`Outcome::Observed`] or [`Outcome::Unobserved`], so no estimator can
//! read ground truth it should not see. Simulations keep true outcomes in a
//! separate structure.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_quantile;

/// Version stamped into every JSON document the toolkit emits.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Observed(f64),
    Unobserved,
}

impl Outcome {
    pub fn is_labeled(&self) -> bool {
        matches!(self, Outcome::Observed(_))
    }
}

/// Covariates for every row plus outcomes for the labeled ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    covariate_names: Vec<String>,
    // row-major, n * p
    covariates: Vec<f64>,
    outcomes: Vec<Outcome>,
    row_ids: Vec<i64>,
    dropped_incomplete: usize,
}

impl Dataset {
    /// Builds a dataset from row-major covariates. `outcomes[i]` is `Some(y)`
    /// exactly when row `i` is labeled.
    pub fn new(
        covariate_names: Vec<String>,
        covariates: Vec<Vec<f64>>,
        outcomes: Vec<Option<f64>>,
        row_ids: Vec<i64>,
    ) -> Result<Self> {
        let n = outcomes.len();
        let p = covariate_names.len();
        if covariates.len() != n || row_ids.len() != n {
            return Err(Error::InvalidSpec(format!(
                "row count mismatch: {} covariate rows, {} outcomes, {} ids",
                covariates.len(),
                n,
                row_ids.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * p);
        for (i, row) in covariates.iter().enumerate() {
            if row.len() != p {
                return Err(Error::MalformedRow {
                    line: i as u64 + 1,
                    reason: format!("expected {p} covariates, found {}", row.len()),
                });
            }
            if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::MalformedRow {
                    line: i as u64 + 1,
                    reason: format!("covariate `{}` is not finite", covariate_names[bad]),
                });
            }
            flat.extend_from_slice(row);
        }
        let mut out = Vec::with_capacity(n);
        for (i, y) in outcomes.into_iter().enumerate() {
            out.push(match y {
                Some(v) if v.is_finite() => Outcome::Observed(v),
                Some(_) => {
                    return Err(Error::MalformedRow { line: i as u64 + 1, reason: "outcome is not finite".into() })
                }
                None => Outcome::Unobserved,
            });
        }
        if !out.iter().any(Outcome::is_labeled) {
            return Err(Error::EmptyLabeledSet);
        }
        Ok(Dataset { covariate_names, covariates: flat, outcomes: out, row_ids, dropped_incomplete: 0 })
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_labeled(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_labeled()).count()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.n() - self.n_labeled()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.covariates[i * p..(i + 1) * p]
    }

    /// Column `j` over all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.row(i)[j]).collect()
    }

    pub fn outcome(&self, i: usize) -> Outcome {
        self.outcomes[i]
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.outcomes[i].is_labeled()
    }

    pub fn label_indicator(&self) -> Vec<u8> {
        self.outcomes.iter().map(|o| o.is_labeled() as u8).collect()
    }

    pub fn row_ids(&self) -> &[i64] {
        &self.row_ids
    }

    /// Rows dropped at ingestion because a covariate was missing.
    pub fn dropped_incomplete(&self) -> usize {
        self.dropped_incomplete
    }

    /// Partitions the rows into labeled and unlabeled views, preserving the
    /// original row order within each.
    pub fn split_views(&self) -> (LabeledView<'_>, UnlabeledView<'_>) {
        let (lab, unl): (Vec<usize>, Vec<usize>) = (0..self.n()).partition(|&i| self.is_labeled(i));
        (LabeledView { data: self, rows: lab }, UnlabeledView { data: self, rows: unl })
    }

    /// Covariate matrix of the given rows, optionally with a leading column of ones.
    pub(crate) fn design(&self, rows: &[usize], intercept: bool) -> DMatrix<f64> {
        let p = self.p();
        let d = p + intercept as usize;
        DMatrix::from_fn(rows.len(), d, |r, c| {
            if intercept {
                if c == 0 {
                    1.0
                } else {
                    self.row(rows[r])[c - 1]
                }
            } else {
                self.row(rows[r])[c]
            }
        })
    }
}

/// Read-only view of the labeled rows.
#[derive(Clone, Debug)]
pub struct LabeledView<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> LabeledView<'a> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Positions of the labeled rows in the parent dataset.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn row_ids(&self) -> Vec<i64> {
        self.rows.iter().map(|&i| self.data.row_ids[i]).collect()
    }

    pub fn x(&self, k: usize) -> &'a [f64] {
        self.data.row(self.rows[k])
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|&i| match self.data.outcomes[i] {
                Outcome::Observed(y) => y,
                Outcome::Unobserved => unreachable!("labeled view holds only observed rows"),
            })
            .collect()
    }

    pub fn predictions(&self, preds: &PredictionSet) -> Vec<f64> {
        self.rows.iter().map(|&i| preds.values[i]).collect()
    }
}

/// Read-only view of the unlabeled rows. Exposes no outcomes.
#[derive(Clone, Debug)]
pub struct UnlabeledView<'a> {
    data: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> UnlabeledView<'a> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn row_ids(&self) -> Vec<i64> {
        self.rows.iter().map(|&i| self.data.row_ids[i]).collect()
    }

    pub fn x(&self, k: usize) -> &'a [f64] {
        self.data.row(self.rows[k])
    }

    pub fn predictions(&self, preds: &PredictionSet) -> Vec<f64> {
        self.rows.iter().map(|&i| preds.values[i]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Pretrained,
    /// `fold_assignment[k]` is the fold of the k-th labeled row (labeled-view
    /// order); that row was predicted by the model trained without the fold.
    CrossFitted {
        fold_assignment: Vec<usize>,
        model_count: usize,
    },
}

/// One prediction per dataset row.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    values: Vec<f64>,
    provenance: Provenance,
}

impl PredictionSet {
    pub fn new(values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingPredictions(format!("prediction for row {i} is not finite")));
        }
        Ok(PredictionSet { values, provenance })
    }

    pub fn pretrained(values: Vec<f64>) -> Result<Self> {
        Self::new(values, Provenance::Pretrained)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_covers(&self, d: &Dataset) -> Result<()> {
        if self.values.len() != d.n() {
            return Err(Error::MissingPredictions(format!("{} predictions for {} rows", self.values.len(), d.n())));
        }
        Ok(())
    }
}

/// The loss whose population minimizer is the inferential target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossTarget {
    Mean,
    LinearRegression { include_intercept: bool },
}

impl LossTarget {
    /// Number of parameters for a dataset with `p` covariates.
    pub fn dimension(&self, p: usize) -> usize {
        match self {
            LossTarget::Mean => 1,
            LossTarget::LinearRegression { include_intercept } => p + *include_intercept as usize,
        }
    }

    pub fn coefficient_names(&self, covariates: &[String]) -> Vec<String> {
        match self {
            LossTarget::Mean => vec!["mean".into()],
            LossTarget::LinearRegression { include_intercept } => {
                let mut v = Vec::new();
                if *include_intercept {
                    v.push("intercept".into());
                }
                v.extend(covariates.iter().cloned());
                v
            }
        }
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        match self {
            LossTarget::LinearRegression { .. } if p == 0 => {
                Err(Error::InvalidTarget("linear regression needs at least one covariate".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Classical,
    Ppi,
    PpiPlusPlus { lambda: f64 },
    CrossPpi,
    CrossPpBoot,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Classical => "Classical",
            Method::Ppi => "PPI",
            Method::PpiPlusPlus { .. } => "PPIpp",
            Method::CrossPpi => "CrossPPI",
            Method::CrossPpBoot => "CrossPPBoot",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Method::PpiPlusPlus { lambda } => Some(*lambda),
            _ => None,
        }
    }
}

/// Point estimate with its asymptotic covariance (already divided by the
/// sample size, so standard errors are the square roots of the diagonal).
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub theta: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub method: Method,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
}

impl Estimate {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.covariance[(j, j)].max(0.0).sqrt()).collect()
    }

    /// Normal-quantile interval at `level`.
    pub fn confidence_interval(&self, level: f64) -> Result<ConfidenceInterval> {
        confidence_interval(self, level)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConfidenceInterval {
    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn contains(&self, j: usize, value: f64) -> bool {
        self.lower[j] <= value && value <= self.upper[j]
    }
}

pub const DEFAULT_LEVEL: f64 = 0.90;

/// Componentwise `theta ± z_{(1+level)/2} * se`.
pub fn confidence_interval(e: &Estimate, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    let se = e.standard_errors();
    Ok(ConfidenceInterval {
        level,
        lower: e.theta.iter().zip(&se).map(|(t, s)| t - z * s).collect(),
        upper: e.theta.iter().zip(&se).map(|(t, s)| t + z * s).collect(),
    })
}

/// JSON form of an estimate and its interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub coefficients: Vec<String>,
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_level: f64,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub n_l: usize,
    pub n_u: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapMeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapMeta {
    pub replicates: usize,
    pub seed: u64,
    /// Always `"frozen"`: predictions are computed once and reused by every replicate.
    pub predictions: String,
}

impl EstimateReport {
    pub fn new(e: &Estimate, ci: &ConfidenceInterval, coefficients: Vec<String>) -> Self {
        EstimateReport {
            schema_version: SCHEMA_VERSION,
            method: e.method.tag().to_string(),
            lambda: e.method.lambda(),
            coefficients,
            theta: e.theta.clone(),
            se: e.standard_errors(),
            ci_level: ci.level,
            ci_lower: ci.lower.clone(),
            ci_upper: ci.upper.clone(),
            n_l: e.n_labeled,
            n_u: e.n_unlabeled,
            interval: None,
            bootstrap: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Column mapping for CSV ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub id: String,
    pub covariates: Vec<String>,
    pub outcome: String,
    pub label: String,
    #[serde(default)]
    pub prediction: Option<String>,
}

impl CsvSchema {
    /// Default layout: `id, x1..xp, y, s[, yhat]`.
    pub fn infer(headers: &[String]) -> Self {
        let covariates = headers
            .iter()
            .filter(|h| h.len() > 1 && h.starts_with('x') && h[1..].chars().all(|c| c.is_ascii_digit()))
            .cloned()
            .collect();
        CsvSchema {
            id: "id".into(),
            covariates,
            outcome: "y".into(),
            label: "s".into(),
            prediction: headers.iter().any(|h| h == "yhat").then(|| "yhat".to_string()),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("schema: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Drop rows with a missing covariate (counted in the dataset) instead of
    /// rejecting the file.
    pub drop_incomplete_rows: bool,
}

pub fn ingest_csv(
    path: &Path,
    schema: Option<&CsvSchema>,
    opts: IngestOptions,
) -> Result<(Dataset, Option<PredictionSet>)> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schema, opts)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    schema: Option<&CsvSchema>,
    opts: IngestOptions,
) -> Result<(Dataset, Option<PredictionSet>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let schema = match schema {
        Some(s) => s.clone(),
        None => CsvSchema::infer(&headers),
    };
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let id_col = col(&schema.id)?;
    let y_col = col(&schema.outcome)?;
    let s_col = col(&schema.label)?;
    let x_cols = schema.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let yhat_col = schema.prediction.as_deref().map(col).transpose()?;

    let mut covariates = Vec::new();
    let mut outcomes = Vec::new();
    let mut ids = Vec::new();
    let mut preds = Vec::new();
    let mut dropped = 0usize;

    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |reason: String| Error::MalformedRow { line, reason };
        let field = |c: usize| rec.get(c).unwrap_or("");

        let id: i64 = field(id_col).parse().map_err(|_| bad(format!("id `{}` is not an integer", field(id_col))))?;
        let labeled = match field(s_col) {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("label must be 0 or 1, found `{other}`"))),
        };

        let mut row = Vec::with_capacity(x_cols.len());
        let mut incomplete = None;
        for (&c, name) in x_cols.iter().zip(&schema.covariates) {
            let raw = field(c);
            if raw.is_empty() {
                incomplete = Some(name.clone());
                break;
            }
            let v: f64 = raw.parse().map_err(|_| bad(format!("covariate `{name}` = `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad(format!("covariate `{name}` is not finite")));
            }
            row.push(v);
        }
        if let Some(name) = incomplete {
            if opts.drop_incomplete_rows {
                dropped += 1;
                continue;
            }
            return Err(bad(format!("covariate `{name}` is missing; every covariate must be observed on every row")));
        }

        let outcome = if labeled {
            let raw = field(y_col);
            if raw.is_empty() {
                return Err(bad("labeled row has an empty outcome".into()));
            }
            let y: f64 = raw.parse().map_err(|_| bad(format!("outcome `{raw}` is not a number")))?;
            if !y.is_finite() {
                return Err(bad("outcome is not finite".into()));
            }
            Some(y)
        } else {
            // Outcomes of unlabeled rows are never read, even if the file has them.
            None
        };

        if let Some(c) = yhat_col {
            let raw = field(c);
            if raw.is_empty() {
                return Err(bad("prediction is missing".into()));
            }
            let v: f64 = raw.parse().map_err(|_| bad(format!("prediction `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(bad("prediction is not finite".into()));
            }
            preds.push(v);
        }

        covariates.push(row);
        outcomes.push(outcome);
        ids.push(id);
    }

    let mut data = Dataset::new(schema.covariates.clone(), covariates, outcomes, ids)?;
    data.dropped_incomplete = dropped;
    let preds = match yhat_col {
        Some(_) => Some(PredictionSet::pretrained(preds)?),
        None => None,
    };
    Ok((data, preds))
}

/// Writes the dataset in the default `id, x.., y, s[, yhat]` layout. Reals use
/// the shortest representation that parses back to the same bits.
pub fn emit_csv<W: Write>(d: &Dataset, preds: Option<&PredictionSet>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(d.covariate_names.iter().cloned());
    header.push("y".into());
    header.push("s".into());
    if preds.is_some() {
        header.push("yhat".into());
    }
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for i in 0..d.n() {
        let mut rec = vec![d.row_ids[i].to_string()];
        rec.extend(d.row(i).iter().map(|v| v.to_string()));
        match d.outcomes[i] {
            Outcome::Observed(y) => {
                rec.push(y.to_string());
                rec.push("1".into());
            }
            Outcome::Unobserved => {
                rec.push(String::new());
                rec.push("0".into());
            }
        }
        if let Some(p) = preds {
            rec.push(p.values[i].to_string());
        }
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "id,x1,y,s,yhat\n1,0.5,1,1,2\n2,1.5,3,1,2\n3,2.5,,0,4\n4,3.5,,0,6\n";

    fn load(text: &str) -> Result<(Dataset, Option<PredictionSet>)> {
        ingest_reader(text.as_bytes(), None, IngestOptions::default())
    }

    #[test]
    fn four_row_fixture() {
        let (d, p) = load(FIXTURE).unwrap();
        assert_eq!((d.n(), d.n_labeled(), d.n_unlabeled()), (4, 2, 2));
        assert_eq!(p.unwrap().values(), &[2.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn labeled_row_without_outcome_is_rejected() {
        let err = load("id,x1,y,s\n1,0.5,,1\n2,1.5,3,1\n3,1,,0\n").unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn missing_covariate_is_rejected() {
        let err = load("id,x1,y,s\n1,,1,1\n2,1.5,3,1\n3,1,,0\n").unwrap_err();
        match err {
            Error::MalformedRow { reason, .. } => assert!(reason.contains("every covariate")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_covariate_can_be_dropped_and_counted() {
        let opts = IngestOptions { drop_incomplete_rows: true };
        let (d, _) = ingest_reader("id,x1,y,s\n1,,1,1\n2,1.5,3,1\n3,1,,0\n".as_bytes(), None, opts).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.dropped_incomplete(), 1);
    }

    #[test]
    fn missing_column_and_empty_labeled_set() {
        assert_eq!(load("id,x1,y\n1,2,3\n").unwrap_err(), Error::MissingColumn("s".into()));
        assert_eq!(load("id,x1,y,s\n1,2,,0\n").unwrap_err(), Error::EmptyLabeledSet);
    }

    #[test]
    fn label_must_be_literal_binary() {
        assert!(matches!(load("id,x1,y,s\n1,2,3,yes\n").unwrap_err(), Error::MalformedRow { .. }));
    }

    #[test]
    fn unlabeled_outcomes_are_masked() {
        let (d, _) = load("id,x1,y,s\n1,0,1,1\n2,0,9,0\n").unwrap();
        assert_eq!(d.outcome(1), Outcome::Unobserved);
    }

    #[test]
    fn views_partition_rows() {
        let d = Dataset::new(
            vec!["x1".into()],
            (0..10).map(|i| vec![i as f64]).collect(),
            (0..10).map(|i| (i % 3 == 0).then_some(i as f64)).collect(),
            (100..110).collect(),
        )
        .unwrap();
        let (l, u) = d.split_views();
        assert_eq!(l.len(), 4);
        assert_eq!(l.row_ids(), vec![100, 103, 106, 109]);
        let mut all: Vec<i64> = l.row_ids().into_iter().chain(u.row_ids()).collect();
        all.sort();
        assert_eq!(all, (100..110).collect::<Vec<_>>());
    }

    #[test]
    fn all_labeled_gives_empty_unlabeled_view() {
        let d = Dataset::new(vec!["x1".into()], vec![vec![0.0], vec![1.0]], vec![Some(1.0), Some(2.0)], vec![1, 2])
            .unwrap();
        let (l, u) = d.split_views();
        assert_eq!((l.len(), u.len()), (2, 0));
    }

    #[test]
    fn interval_at_ninety_percent() {
        let e = Estimate {
            theta: vec![0.0],
            covariance: DMatrix::from_element(1, 1, 1.0),
            method: Method::Classical,
            n_labeled: 2,
            n_unlabeled: 0,
        };
        let ci = confidence_interval(&e, 0.90).unwrap();
        assert!((ci.lower[0] + 1.6449).abs() < 5e-5);
        assert!((ci.upper[0] - 1.6449).abs() < 5e-5);
        assert_eq!(confidence_interval(&e, 1.2).unwrap_err(), Error::InvalidLevel(1.2));
    }

    #[test]
    fn zero_variance_interval_is_degenerate() {
        let e = Estimate {
            theta: vec![3.0],
            covariance: DMatrix::zeros(1, 1),
            method: Method::Classical,
            n_labeled: 2,
            n_unlabeled: 0,
        };
        let ci = confidence_interval(&e, 0.95).unwrap();
        assert_eq!((ci.lower[0], ci.upper[0]), (3.0, 3.0));
    }

    mod roundtrip {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn emit_then_ingest_is_identity(
                rows in prop::collection::vec(
                    (prop::collection::vec(-1e6f64..1e6, 2), prop::option::of(-1e3f64..1e3), -1e3f64..1e3),
                    2..20,
                )
            ) {
                let mut rows = rows;
                rows[0].1 = Some(1.0);
                let d = Dataset::new(
                    vec!["x1".into(), "x2".into()],
                    rows.iter().map(|r| r.0.clone()).collect(),
                    rows.iter().map(|r| r.1).collect(),
                    (0..rows.len() as i64).collect(),
                ).unwrap();
                let p = PredictionSet::pretrained(rows.iter().map(|r| r.2).collect()).unwrap();
                let mut buf = Vec::new();
                emit_csv(&d, Some(&p), &mut buf).unwrap();
                let (d2, p2) = ingest_reader(buf.as_slice(), None, IngestOptions::default()).unwrap();
                prop_assert_eq!(d2, d);
                prop_assert_eq!(p2.unwrap(), p);
            }
        }
    }
}
