//! Prediction-powered inference.
//!
//! Combines a small labeled sample with model predictions on a larger
//! unlabeled sample to estimate means and linear-regression coefficients with
//! valid confidence intervals. Provides complete-case, PPI and PPI++
//! estimators, cross-fitted variants for when no independent model exists,
//! assumption diagnostics, and Monte Carlo studies of coverage under correct
//! and violated assumptions.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod crossfit;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod par;
pub mod simlab;
pub mod stats;

pub use crossfit::{
    cross_ppboot_ci, cross_ppi_estimate, crossfit_predict, fit_learner, make_folds, BootConfig, BootstrapResult,
    FoldPlan, LearnerSpec, Predictor,
};
pub use data::{
    confidence_interval, emit_csv, ingest_csv, ingest_reader, ConfidenceInterval, CsvSchema, Dataset, Estimate,
    EstimateReport, IngestOptions, LossTarget, Method, PredictionSet, Provenance,
};
pub use diagnostics::{build_report, recommend, DiagnosticReport, Recommendation, Thresholds, Variant};
pub use error::{Error, Result};
pub use estimators::{
    cc_estimate, ppi_estimate, ppi_estimate_with, ppipp_estimate, variance_gap, LambdaPolicy, PpiOptions, VarianceGap,
};
pub use par::Execution;
pub use simlab::{
    apply_labeling, emit_table, generate, run_scenario, run_scenario_with, CoverageTable, DgpSpec, LabelMechanism,
    MethodKind, Regime, ScenarioConfig, ScenarioSpec,
};
