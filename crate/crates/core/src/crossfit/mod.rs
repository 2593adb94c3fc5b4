//! Cross-fitted predictions for when no independently trained model exists:
//! fold plans, out-of-fold prediction, Cross-PPI and the Cross-PPBoot
//! percentile bootstrap.

mod learners;

pub use learners::{fit_learner, LearnerSpec, Predictor, Stump};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ConfidenceInterval, Dataset, Estimate, LossTarget, Method, PredictionSet, Provenance};
use crate::error::{Error, Result};
use crate::estimators::{ppi_fit, PpiOptions, Sample};
use crate::linalg::row_covariance;
use crate::par::{map_indexed, Execution};
use crate::stats::{order_statistic, stream_rng};

pub const DEFAULT_FOLDS: usize = 5;
pub const MIN_BOOT_REPLICATES: usize = 100;

/// Balanced random assignment of labeled rows to folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: usize,
    /// Fold of each labeled row, in labeled-view order.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn make_folds(n_labeled: usize, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 || folds > n_labeled {
        return Err(Error::TooFewLabeled { n_labeled, folds });
    }
    let mut order: Vec<usize> = (0..n_labeled).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let mut assignment = vec![0; n_labeled];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    Ok(FoldPlan { folds, assignment, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootConfig {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

impl BootConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_BOOT_REPLICATES {
            return Err(Error::InvalidBootConfig(format!(
                "{} replicates; need at least {MIN_BOOT_REPLICATES}",
                self.replicates
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidLevel(self.level));
        }
        Ok(())
    }
}

pub fn crossfit_predict(d: &Dataset, spec: &LearnerSpec, plan: &FoldPlan) -> Result<PredictionSet> {
    crossfit_predict_with(d, spec, plan, Execution::default())
}

/// Each labeled row is predicted by the model trained without its fold;
/// unlabeled rows get the average over all fold models.
pub fn crossfit_predict_with(
    d: &Dataset,
    spec: &LearnerSpec,
    plan: &FoldPlan,
    exec: Execution,
) -> Result<PredictionSet> {
    spec.validate()?;
    let (lab, unl) = d.split_views();
    if plan.assignment.len() != lab.len() {
        return Err(Error::FoldMismatch(format!(
            "plan covers {} rows but dataset has {} labeled rows",
            plan.assignment.len(),
            lab.len()
        )));
    }
    if plan.assignment.iter().any(|&f| f >= plan.folds) {
        return Err(Error::FoldMismatch("fold index out of range".into()));
    }
    let y = lab.outcomes();
    let models = map_indexed(exec, plan.folds, |k| {
        let train: Vec<usize> = (0..lab.len()).filter(|&i| plan.assignment[i] != k).collect();
        let xs: Vec<&[f64]> = train.iter().map(|&i| lab.x(i)).collect();
        let ys: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        fit_learner(spec, &xs, &ys)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0.0; d.n()];
    for (k, &row) in lab.rows().iter().enumerate() {
        values[row] = models[plan.assignment[k]].predict(lab.x(k));
    }
    for (k, &row) in unl.rows().iter().enumerate() {
        let x = unl.x(k);
        let sum: f64 = models.iter().map(|m| m.predict(x)).sum();
        values[row] = sum / models.len() as f64;
    }
    PredictionSet::new(
        values,
        Provenance::CrossFitted { fold_assignment: plan.assignment.clone(), model_count: plan.folds },
    )
}

/// Cross-fitted predictions followed by the PPI estimator.
pub fn cross_ppi_estimate(
    d: &Dataset,
    spec: &LearnerSpec,
    folds: usize,
    seed: u64,
    target: LossTarget,
) -> Result<Estimate> {
    let plan = make_folds(d.n_labeled(), folds, seed)?;
    let preds = crossfit_predict(d, spec, &plan)?;
    cross_ppi_from_predictions(d, &preds, target)
}

pub(crate) fn cross_ppi_from_predictions(d: &Dataset, preds: &PredictionSet, target: LossTarget) -> Result<Estimate> {
    let s = Sample::new(d, Some(preds), target)?;
    let fit = ppi_fit(&s, PpiOptions::default())?;
    Ok(Estimate {
        theta: fit.theta,
        covariance: fit.covariance,
        method: Method::CrossPpi,
        n_labeled: s.n_l(),
        n_unlabeled: s.n_u(),
    })
}

/// Output of [`cross_ppboot_ci`]. The estimate's covariance is the sample
/// covariance of the bootstrap replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapResult {
    pub estimate: Estimate,
    pub interval: ConfidenceInterval,
    /// Replicate point estimates, `replicates[r][j]`.
    pub replicates: Vec<Vec<f64>>,
}

pub fn cross_ppboot_ci(
    d: &Dataset,
    spec: &LearnerSpec,
    folds: usize,
    seed: u64,
    target: LossTarget,
    boot: &BootConfig,
) -> Result<BootstrapResult> {
    boot.validate()?;
    let plan = make_folds(d.n_labeled(), folds, seed)?;
    let preds = crossfit_predict(d, spec, &plan)?;
    cross_ppboot_from_predictions(d, &preds, target, boot, Execution::default())
}

/// Percentile bootstrap over frozen predictions. Replicate `r` resamples
/// labeled and unlabeled rows independently from stream `(boot.seed, r)`.
pub fn cross_ppboot_from_predictions(
    d: &Dataset,
    preds: &PredictionSet,
    target: LossTarget,
    boot: &BootConfig,
    exec: Execution,
) -> Result<BootstrapResult> {
    boot.validate()?;
    let s = Sample::new(d, Some(preds), target)?;
    let point = ppi_fit(&s, PpiOptions::default())?;
    let (n_l, n_u) = (s.n_l(), s.n_u());

    let replicates = map_indexed(exec, boot.replicates, |r| {
        let mut rng = stream_rng(boot.seed, r as u64);
        let lab: Vec<usize> = (0..n_l).map(|_| rng.random_range(0..n_l)).collect();
        let unl: Vec<usize> = (0..n_u).map(|_| rng.random_range(0..n_u)).collect();
        ppi_fit(&s.resample(&lab, &unl), PpiOptions::default()).map(|f| f.theta)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let dim = point.theta.len();
    let alpha = 1.0 - boot.level;
    let b = boot.replicates as f64;
    // ceil with a guard against representation error in alpha
    let lo_rank = ((b * alpha / 2.0) - 1e-9).ceil().max(1.0) as usize;
    let hi_rank = ((b * (1.0 - alpha / 2.0)) - 1e-9).ceil().max(1.0) as usize;
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col: Vec<f64> = replicates.iter().map(|t| t[j]).collect();
        col.sort_by(f64::total_cmp);
        lower.push(order_statistic(&col, lo_rank));
        upper.push(order_statistic(&col, hi_rank));
    }
    let reps = nalgebra::DMatrix::from_fn(replicates.len(), dim, |r, j| replicates[r][j]);
    Ok(BootstrapResult {
        estimate: Estimate {
            theta: point.theta,
            covariance: row_covariance(&reps),
            method: Method::CrossPpBoot,
            n_labeled: n_l,
            n_unlabeled: n_u,
        },
        interval: ConfidenceInterval { level: boot.level, lower, upper },
        replicates,
    })
}
