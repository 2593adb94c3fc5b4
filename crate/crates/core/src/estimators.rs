//! Complete-case, PPI and PPI++ point estimates with asymptotic covariances.
//!
//! All linear-regression estimators solve the squared-loss estimating equation
//! of the power-tuned objective
//!
//! ```text
//!   λ/n_u Σ_u ℓ(Ŷ) − 1/n_l Σ_l { λ ℓ(Ŷ) − ℓ(Y) },   ℓ(y) = (y − x'θ)² / 2
//! ```
//!
//! which gives `[λ H_u + (1 − λ) H_l] θ = λ X_u'Ŷ_u/n_u − λ X_l'Ŷ_l/n_l + X_l'Y/n_l`.
//! λ = 0 is ordinary least squares on labeled rows, λ = 1 is PPI. The
//! covariance is the sandwich `H⁻¹ [λ² S_u/n_u + S_l/n_l] H⁻¹` with `S_u`, `S_l`
//! the sample covariances of the per-row scores on each side.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Estimate, LossTarget, Method, PredictionSet};
use crate::error::{Error, Result};
use crate::linalg::{checked_inverse, row_covariance, scale_rows, scaled_cross, scaled_gram, symmetrize};
use crate::stats::{mean, sample_cov, sample_var};

/// Step of the λ grid used for regression targets.
pub const LAMBDA_GRID_STEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed(f64),
    Optimized,
}

impl LambdaPolicy {
    fn validate(&self) -> Result<()> {
        match self {
            LambdaPolicy::Fixed(l) if !(0.0..=1.0).contains(l) => Err(Error::InvalidLambda(*l)),
            _ => Ok(()),
        }
    }
}

/// Options for [`ppi_estimate_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PpiOptions {
    /// Mean target only: average predictions over all rows rather than the
    /// unlabeled rows in the first term.
    pub all_rows_prediction_mean: bool,
}

/// Labeled and unlabeled pieces of a dataset, laid out for the estimators.
///
/// For a mean target the design is a single column of ones.
#[derive(Clone, Debug)]
pub(crate) struct Sample {
    pub target: LossTarget,
    pub xl: DMatrix<f64>,
    pub yl: Vec<f64>,
    pub fl: Vec<f64>,
    pub xu: DMatrix<f64>,
    pub fu: Vec<f64>,
}

impl Sample {
    pub fn new(d: &Dataset, preds: Option<&PredictionSet>, target: LossTarget) -> Result<Self> {
        target.validate(d.p())?;
        if let Some(p) = preds {
            p.check_covers(d)?;
        }
        let (lab, unl) = d.split_views();
        let design = |rows: &[usize]| match target {
            LossTarget::Mean => DMatrix::from_element(rows.len(), 1, 1.0),
            LossTarget::LinearRegression { include_intercept } => d.design(rows, include_intercept),
        };
        Ok(Sample {
            target,
            xl: design(lab.rows()),
            yl: lab.outcomes(),
            fl: preds.map(|p| lab.predictions(p)).unwrap_or_default(),
            xu: design(unl.rows()),
            fu: preds.map(|p| unl.predictions(p)).unwrap_or_default(),
        })
    }

    pub fn n_l(&self) -> usize {
        self.yl.len()
    }

    pub fn n_u(&self) -> usize {
        self.xu.nrows()
    }

    pub fn dim(&self) -> usize {
        self.xl.ncols()
    }

    /// Copy restricted to the given labeled and unlabeled positions (with repeats).
    pub fn resample(&self, lab: &[usize], unl: &[usize]) -> Sample {
        Sample {
            target: self.target,
            xl: self.xl.select_rows(lab),
            yl: lab.iter().map(|&i| self.yl[i]).collect(),
            fl: lab.iter().map(|&i| self.fl[i]).collect(),
            xu: self.xu.select_rows(unl),
            fu: unl.iter().map(|&i| self.fu[i]).collect(),
        }
    }

    fn require_labeled(&self) -> Result<()> {
        let needed = match self.target {
            LossTarget::Mean => 2,
            LossTarget::LinearRegression { .. } => (self.dim() + 1).max(2),
        };
        if self.n_l() < needed {
            return Err(Error::InsufficientLabeled { needed, have: self.n_l() });
        }
        Ok(())
    }

    fn require_predictions(&self) -> Result<()> {
        if self.n_u() == 0 {
            return Err(Error::EmptyUnlabeled);
        }
        if self.fl.len() != self.n_l() || self.fu.len() != self.n_u() {
            return Err(Error::MissingPredictions("no prediction set supplied".into()));
        }
        Ok(())
    }

    fn require_ppi(&self) -> Result<()> {
        self.require_predictions()?;
        if self.n_l() < 2 {
            return Err(Error::InsufficientLabeled { needed: 2, have: self.n_l() });
        }
        Ok(())
    }
}

/// Point estimate and covariance before method tagging.
#[derive(Clone, Debug)]
pub(crate) struct Fit {
    pub theta: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

fn scalar_fit(theta: f64, var: f64) -> Fit {
    Fit { theta: vec![theta], covariance: DMatrix::from_element(1, 1, var) }
}

fn residual_scaled(y: &[f64], f: &[f64], lambda: f64) -> Vec<f64> {
    y.iter().zip(f).map(|(y, f)| y - lambda * f).collect()
}

/// Mean with power parameter λ: `ȳ_l + λ (f̄_u − f̄_l)`.
fn mean_power_tuned(s: &Sample, lambda: f64) -> Fit {
    let cc = mean(&s.yl);
    if lambda == 0.0 {
        return scalar_fit(cc, sample_var(&s.yl) / s.n_l() as f64);
    }
    let theta = cc + lambda * (mean(&s.fu) - mean(&s.fl));
    let var = sample_var(&residual_scaled(&s.yl, &s.fl, lambda)) / s.n_l() as f64
        + lambda * lambda * sample_var(&s.fu) / s.n_u() as f64;
    scalar_fit(theta, var)
}

/// Power-tuned linear regression. λ = 0 touches only labeled rows.
fn linear_power_tuned(s: &Sample, lambda: f64) -> Result<Fit> {
    let n_l = s.n_l() as f64;
    let yl = DVector::from_column_slice(&s.yl);
    let (h, b) = if lambda == 0.0 {
        (scaled_gram(&s.xl), scaled_cross(&s.xl, &yl))
    } else {
        let fl = DVector::from_column_slice(&s.fl);
        let fu = DVector::from_column_slice(&s.fu);
        let h = scaled_gram(&s.xu) * lambda + scaled_gram(&s.xl) * (1.0 - lambda);
        let b = scaled_cross(&s.xu, &fu) * lambda - scaled_cross(&s.xl, &fl) * lambda + scaled_cross(&s.xl, &yl);
        (h, b)
    };
    let context = if lambda == 0.0 { "labeled Gram matrix" } else { "prediction-augmented Gram matrix" };
    let h_inv = checked_inverse(&h, context)?;
    let theta = &h_inv * b;

    let fitted_l = &s.xl * &theta;
    let mut weights_l = &fitted_l - &yl;
    let mut meat = DMatrix::zeros(s.dim(), s.dim());
    if lambda != 0.0 {
        let fl = DVector::from_column_slice(&s.fl);
        let fu = DVector::from_column_slice(&s.fu);
        weights_l -= (&fitted_l - &fl) * lambda;
        let weights_u = &s.xu * &theta - &fu;
        meat += row_covariance(&scale_rows(&s.xu, &weights_u)) * (lambda * lambda / s.n_u() as f64);
    }
    meat += row_covariance(&scale_rows(&s.xl, &weights_l)) / n_l;
    let cov = symmetrize(&(&h_inv * meat * &h_inv));
    Ok(Fit { theta: theta.iter().copied().collect(), covariance: cov })
}

pub(crate) fn cc_fit(s: &Sample) -> Result<Fit> {
    s.require_labeled()?;
    match s.target {
        LossTarget::Mean => Ok(mean_power_tuned(s, 0.0)),
        LossTarget::LinearRegression { .. } => linear_power_tuned(s, 0.0),
    }
}

pub(crate) fn ppi_fit(s: &Sample, opts: PpiOptions) -> Result<Fit> {
    s.require_ppi()?;
    match s.target {
        LossTarget::Mean if opts.all_rows_prediction_mean => {
            let n = (s.n_l() + s.n_u()) as f64;
            let all_mean = (s.fl.iter().sum::<f64>() + s.fu.iter().sum::<f64>()) / n;
            let theta = all_mean + mean(&residual_scaled(&s.yl, &s.fl, 1.0));
            // Equivalent to the power-tuned form with weight n_u / n.
            let w = s.n_u() as f64 / n;
            let var = sample_var(&residual_scaled(&s.yl, &s.fl, w)) / s.n_l() as f64
                + w * w * sample_var(&s.fu) / s.n_u() as f64;
            Ok(scalar_fit(theta, var))
        }
        LossTarget::Mean => {
            let residuals = residual_scaled(&s.yl, &s.fl, 1.0);
            let theta = mean(&s.fu) + mean(&residuals);
            let var = sample_var(&s.fu) / s.n_u() as f64 + sample_var(&residuals) / s.n_l() as f64;
            Ok(scalar_fit(theta, var))
        }
        LossTarget::LinearRegression { .. } => linear_power_tuned(s, 1.0),
    }
}

/// Variance-minimizing λ for a mean target, clipped to `[0, 1]`.
pub(crate) fn optimal_mean_lambda(s: &Sample) -> f64 {
    let pooled: Vec<f64> = s.fl.iter().chain(&s.fu).copied().collect();
    let v = sample_var(&pooled);
    if v <= 0.0 {
        return 0.0;
    }
    let c = sample_cov(&s.yl, &s.fl);
    let lambda = c / (v * (1.0 + s.n_l() as f64 / s.n_u() as f64));
    if lambda.is_finite() {
        lambda.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub(crate) fn ppipp_fit(s: &Sample, policy: LambdaPolicy) -> Result<(Fit, f64)> {
    policy.validate()?;
    s.require_ppi()?;
    match (s.target, policy) {
        (LossTarget::Mean, LambdaPolicy::Fixed(l)) => {
            s.require_labeled()?;
            Ok((mean_power_tuned(s, l), l))
        }
        (LossTarget::Mean, LambdaPolicy::Optimized) => {
            s.require_labeled()?;
            let l = optimal_mean_lambda(s);
            Ok((mean_power_tuned(s, l), l))
        }
        (LossTarget::LinearRegression { .. }, LambdaPolicy::Fixed(l)) => {
            if l < 1.0 {
                s.require_labeled()?;
            }
            Ok((linear_power_tuned(s, l)?, l))
        }
        (LossTarget::LinearRegression { .. }, LambdaPolicy::Optimized) => {
            let mut best: Option<(Fit, f64, f64)> = None;
            let mut last_err = None;
            for k in 0..=LAMBDA_GRID_STEPS {
                let l = k as f64 / LAMBDA_GRID_STEPS as f64;
                match linear_power_tuned(s, l) {
                    Ok(fit) => {
                        let trace = fit.covariance.trace();
                        if best.as_ref().is_none_or(|b| trace < b.2) {
                            best = Some((fit, l, trace));
                        }
                    }
                    Err(e) => last_err = Some(e),
                }
            }
            match best {
                Some((fit, l, _)) => Ok((fit, l)),
                None => Err(last_err.expect("grid is nonempty")),
            }
        }
    }
}

fn tag(fit: Fit, method: Method, s: &Sample) -> Estimate {
    Estimate { theta: fit.theta, covariance: fit.covariance, method, n_labeled: s.n_l(), n_unlabeled: s.n_u() }
}

/// Complete-case estimate from labeled rows only. Regression uses OLS with
/// a heteroskedasticity-robust sandwich covariance.
pub fn cc_estimate(d: &Dataset, target: LossTarget) -> Result<Estimate> {
    let s = Sample::new(d, None, target)?;
    Ok(tag(cc_fit(&s)?, Method::Classical, &s))
}

pub fn ppi_estimate(d: &Dataset, preds: &PredictionSet, target: LossTarget) -> Result<Estimate> {
    ppi_estimate_with(d, preds, target, PpiOptions::default())
}

pub fn ppi_estimate_with(d: &Dataset, preds: &PredictionSet, target: LossTarget, opts: PpiOptions) -> Result<Estimate> {
    let s = Sample::new(d, Some(preds), target)?;
    Ok(tag(ppi_fit(&s, opts)?, Method::Ppi, &s))
}

/// PPI++ with a fixed or variance-minimizing λ; the λ used is recorded in the
/// method tag.
pub fn ppipp_estimate(
    d: &Dataset,
    preds: &PredictionSet,
    target: LossTarget,
    policy: LambdaPolicy,
) -> Result<Estimate> {
    let s = Sample::new(d, Some(preds), target)?;
    let (fit, lambda) = ppipp_fit(&s, policy)?;
    Ok(tag(fit, Method::PpiPlusPlus { lambda }, &s))
}

/// Plug-in variance difference between PPI and the complete-case mean under a
/// fixed predictor. Negative values favor PPI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceGap {
    pub gap: f64,
    pub var_pred: f64,
    pub cov_y_pred: f64,
    pub pi: f64,
    pub n: usize,
}

impl VarianceGap {
    pub fn from_components(var_pred: f64, cov_y_pred: f64, pi: f64, n: usize) -> Self {
        let nf = n as f64;
        let gap = var_pred / (pi * (1.0 - pi) * nf) - 2.0 * cov_y_pred / (pi * nf);
        VarianceGap { gap, var_pred, cov_y_pred, pi, n }
    }

    pub fn favors_ppi(&self) -> bool {
        self.gap < 0.0
    }
}

pub fn variance_gap(d: &Dataset, preds: &PredictionSet) -> Result<VarianceGap> {
    preds.check_covers(d)?;
    let (lab, _) = d.split_views();
    if lab.len() < 2 {
        return Err(Error::InsufficientLabeled { needed: 2, have: lab.len() });
    }
    let var_pred = sample_var(preds.values());
    let cov = sample_cov(&lab.outcomes(), &lab.predictions(preds));
    let pi = lab.len() as f64 / d.n() as f64;
    Ok(VarianceGap::from_components(var_pred, cov, pi, d.n()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_data(yl: &[f64], fl: &[f64], fu: &[f64]) -> (Dataset, PredictionSet) {
        let n = yl.len() + fu.len();
        let outcomes: Vec<Option<f64>> =
            yl.iter().map(|&y| Some(y)).chain(std::iter::repeat_n(None, fu.len())).collect();
        let d = Dataset::new(
            vec!["x1".into()],
            (0..n).map(|i| vec![i as f64]).collect(),
            outcomes,
            (0..n as i64).collect(),
        )
        .unwrap();
        let p = PredictionSet::pretrained(fl.iter().chain(fu).copied().collect()).unwrap();
        (d, p)
    }

    const OLS: LossTarget = LossTarget::LinearRegression { include_intercept: true };

    #[test]
    fn cc_mean_hand_example() {
        let (d, _) = mean_data(&[1.0, 3.0], &[0.0, 0.0], &[0.0]);
        let e = cc_estimate(&d, LossTarget::Mean).unwrap();
        assert_eq!(e.theta, vec![2.0]);
        assert!((e.standard_errors()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cc_intercept_only_matches_mean() {
        let d = Dataset::new(vec!["one".into()], vec![vec![1.0]; 3], vec![Some(1.0), Some(3.0), None], vec![1, 2, 3])
            .unwrap();
        let e = cc_estimate(&d, LossTarget::LinearRegression { include_intercept: false }).unwrap();
        assert!((e.theta[0] - 2.0).abs() < 1e-12);
        assert!((e.standard_errors()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let d = Dataset::new(
            vec!["a".into(), "b".into()],
            (0..6).map(|i| vec![i as f64, i as f64]).collect(),
            (0..6).map(|i| (i < 5).then_some(i as f64 * 0.3)).collect(),
            (0..6).collect(),
        )
        .unwrap();
        assert!(matches!(cc_estimate(&d, OLS), Err(Error::RankDeficientDesign { .. })));
    }

    #[test]
    fn ppi_mean_hand_example() {
        let (d, p) = mean_data(&[1.0, 3.0], &[2.0, 2.0], &[4.0, 6.0]);
        let e = ppi_estimate(&d, &p, LossTarget::Mean).unwrap();
        assert_eq!(e.theta, vec![5.0]);
    }

    #[test]
    fn constant_predictions_cancel() {
        let (d, p) = mean_data(&[1.0, 4.0, 7.0], &[2.5; 3], &[2.5; 4]);
        let ppi = ppi_estimate(&d, &p, LossTarget::Mean).unwrap();
        let cc = cc_estimate(&d, LossTarget::Mean).unwrap();
        assert!((ppi.theta[0] - cc.theta[0]).abs() < 1e-14);
    }

    #[test]
    fn perfect_labeled_predictions_give_unlabeled_mean() {
        let (d, p) = mean_data(&[1.0, 4.0, 7.0], &[1.0, 4.0, 7.0], &[3.0, 5.0]);
        let ppi = ppi_estimate(&d, &p, LossTarget::Mean).unwrap();
        assert_eq!(ppi.theta, vec![4.0]);
    }

    #[test]
    fn ppi_requires_unlabeled_rows() {
        let (d, p) = mean_data(&[1.0, 4.0, 7.0], &[1.0, 4.0, 7.0], &[]);
        assert_eq!(ppi_estimate(&d, &p, LossTarget::Mean).unwrap_err(), Error::EmptyUnlabeled);
    }

    #[test]
    fn prediction_count_must_match() {
        let (d, _) = mean_data(&[1.0, 4.0], &[0.0, 0.0], &[1.0]);
        let p = PredictionSet::pretrained(vec![1.0, 2.0]).unwrap();
        assert!(matches!(ppi_estimate(&d, &p, LossTarget::Mean), Err(Error::MissingPredictions(_))));
    }

    #[test]
    fn all_rows_form_averages_every_prediction() {
        let (d, p) = mean_data(&[1.0, 3.0], &[2.0, 2.0], &[4.0, 6.0]);
        let opts = PpiOptions { all_rows_prediction_mean: true };
        let e = ppi_estimate_with(&d, &p, LossTarget::Mean, opts).unwrap();
        assert!((e.theta[0] - (3.5 + 0.0)).abs() < 1e-15);
    }

    #[test]
    fn lambda_out_of_range_is_rejected() {
        let (d, p) = mean_data(&[1.0, 3.0], &[2.0, 2.0], &[4.0, 6.0]);
        let err = ppipp_estimate(&d, &p, LossTarget::Mean, LambdaPolicy::Fixed(1.5)).unwrap_err();
        assert_eq!(err, Error::InvalidLambda(1.5));
    }

    #[test]
    fn constant_predictions_force_lambda_zero() {
        let (d, p) = mean_data(&[1.0, 4.0, 7.0], &[2.5; 3], &[2.5; 4]);
        let e = ppipp_estimate(&d, &p, LossTarget::Mean, LambdaPolicy::Optimized).unwrap();
        assert_eq!(e.method, Method::PpiPlusPlus { lambda: 0.0 });
    }

    #[test]
    fn gap_hand_arithmetic() {
        assert!(VarianceGap::from_components(1.0, 1.0, 0.5, 100).gap.abs() < 1e-15);
        let g = VarianceGap::from_components(1.0, 2.0, 0.5, 100);
        assert!((g.gap + 0.04).abs() < 1e-15);
        assert!(g.favors_ppi());
    }

    #[test]
    fn gap_is_zero_for_constant_predictions() {
        let (d, p) = mean_data(&[1.0, 4.0, 7.0], &[2.5; 3], &[2.5; 4]);
        let g = variance_gap(&d, &p).unwrap();
        assert_eq!((g.var_pred, g.cov_y_pred, g.gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gap_needs_two_labeled_rows() {
        let d = Dataset::new(vec!["x".into()], vec![vec![0.0], vec![1.0]], vec![Some(1.0), None], vec![1, 2]).unwrap();
        let p = PredictionSet::pretrained(vec![0.0, 1.0]).unwrap();
        assert!(matches!(variance_gap(&d, &p), Err(Error::InsufficientLabeled { .. })));
    }
}
