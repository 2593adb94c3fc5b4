//! Prediction learners used for cross-fitting and simulated training regimes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::checked_inverse;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ridge { penalty: f64 },
    GbStumps { rounds: usize, learning_rate: f64, min_leaf: usize },
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::Ridge { penalty } if !(penalty >= 0.0) || !penalty.is_finite() => {
                Err(Error::InvalidLearner(format!("ridge penalty {penalty} must be finite and >= 0")))
            }
            LearnerSpec::GbStumps { rounds: 0, .. } => {
                Err(Error::InvalidLearner("boosting needs at least one round".into()))
            }
            LearnerSpec::GbStumps { learning_rate, .. } if !(learning_rate > 0.0 && learning_rate <= 1.0) => {
                Err(Error::InvalidLearner(format!("learning rate {learning_rate} must lie in (0, 1]")))
            }
            LearnerSpec::GbStumps { min_leaf: 0, .. } => {
                Err(Error::InvalidLearner("min_leaf must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn min_rows(&self) -> usize {
        match *self {
            LearnerSpec::Ridge { .. } => 2,
            LearnerSpec::GbStumps { min_leaf, .. } => (2 * min_leaf).max(2),
        }
    }
}

impl std::str::FromStr for LearnerSpec {
    type Err = Error;

    /// `ridge[:penalty]` or `stumps[:rounds,learning_rate,min_leaf]`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<&str> = args.split(',').filter(|a| !a.is_empty()).collect();
        let bad = || Error::InvalidLearner(format!("cannot parse learner `{s}`"));
        let spec = match kind {
            "ridge" => LearnerSpec::Ridge {
                penalty: nums.first().map(|v| v.parse().map_err(|_| bad())).transpose()?.unwrap_or(1.0),
            },
            "stumps" | "gbstumps" => {
                let get = |i: usize| nums.get(i).copied();
                LearnerSpec::GbStumps {
                    rounds: get(0).map(|v| v.parse().map_err(|_| bad())).transpose()?.unwrap_or(200),
                    learning_rate: get(1).map(|v| v.parse().map_err(|_| bad())).transpose()?.unwrap_or(0.1),
                    min_leaf: get(2).map(|v| v.parse().map_err(|_| bad())).transpose()?.unwrap_or(5),
                }
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

/// A fitted model: a pure function from a covariate row to a real.
#[derive(Clone, Debug, PartialEq)]
pub enum Predictor {
    Linear { intercept: f64, coefficients: Vec<f64> },
    Stumps { base: f64, stumps: Vec<Stump> },
}

impl Predictor {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Predictor::Linear { intercept, coefficients } => {
                intercept + coefficients.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
            }
            Predictor::Stumps { base, stumps } => {
                let mut out = *base;
                for s in stumps {
                    out += if row[s.feature] <= s.threshold { s.left } else { s.right };
                }
                out
            }
        }
    }
}

/// Fits `spec` on the rows of `x` (one row per observation) against `y`.
pub fn fit_learner(spec: &LearnerSpec, x: &[&[f64]], y: &[f64]) -> Result<Predictor> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DegenerateTraining(format!("{} rows but {} outcomes", x.len(), y.len())));
    }
    if y.len() < spec.min_rows() {
        return Err(Error::DegenerateTraining(format!("{} training rows, need at least {}", y.len(), spec.min_rows())));
    }
    if y.iter().chain(x.iter().flat_map(|r| r.iter())).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateTraining("non-finite training value".into()));
    }
    match *spec {
        LearnerSpec::Ridge { penalty } => fit_ridge(penalty, x, y),
        LearnerSpec::GbStumps { rounds, learning_rate, min_leaf } => {
            Ok(fit_stumps(rounds, learning_rate, min_leaf, x, y))
        }
    }
}

/// Ridge on centered data so the intercept is unpenalized.
fn fit_ridge(penalty: f64, x: &[&[f64]], y: &[f64]) -> Result<Predictor> {
    let n = y.len();
    let p = x.first().map_or(0, |r| r.len());
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(Predictor::Linear { intercept: y_mean, coefficients: vec![] });
    }
    let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[i][j] - x_mean[j]);
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let mut gram = xc.tr_mul(&xc);
    for j in 0..p {
        gram[(j, j)] += penalty;
    }
    let beta = if yc.iter().all(|v| *v == 0.0) {
        DVector::zeros(p)
    } else {
        let inv = checked_inverse(&gram, "ridge system").map_err(|e| Error::DegenerateTraining(e.to_string()))?;
        inv * xc.tr_mul(&yc)
    };
    let intercept = y_mean - beta.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(Predictor::Linear { intercept, coefficients: beta.iter().copied().collect() })
}

struct SortedFeature {
    order: Vec<usize>,
    // candidate split after position k in `order`, with its midpoint threshold
    cuts: Vec<(usize, f64)>,
}

/// Greedy squared-error boosting of depth-one trees.
fn fit_stumps(rounds: usize, lr: f64, min_leaf: usize, x: &[&[f64]], y: &[f64]) -> Predictor {
    let n = y.len();
    let p = x.first().map_or(0, |r| r.len());
    let base = y.iter().sum::<f64>() / n as f64;

    let features: Vec<SortedFeature> = (0..p)
        .map(|j| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]).then(a.cmp(&b)));
            let cuts = (0..n - 1)
                .filter(|&k| x[order[k]][j] < x[order[k + 1]][j])
                .filter(|&k| k + 1 >= min_leaf && n - k > min_leaf)
                .map(|k| (k, 0.5 * (x[order[k]][j] + x[order[k + 1]][j])))
                .collect();
            SortedFeature { order, cuts }
        })
        .collect();

    let mut resid: Vec<f64> = y.iter().map(|v| v - base).collect();
    let mut stumps = Vec::new();
    let mut prefix = vec![0.0; n + 1];
    for _ in 0..rounds {
        let total: f64 = resid.iter().sum();
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (j, feat) in features.iter().enumerate() {
            for (k, &i) in feat.order.iter().enumerate() {
                prefix[k + 1] = prefix[k] + resid[i];
            }
            for &(k, thr) in &feat.cuts {
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let sl = prefix[k + 1];
                let sr = total - sl;
                let gain = sl * sl / nl + sr * sr / nr - total * total / n as f64;
                if best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, j, k, thr));
                }
            }
        }
        let Some((gain, j, k, thr)) = best else { break };
        if !(gain > 1e-12 * (1.0 + resid.iter().map(|r| r * r).sum::<f64>())) {
            break;
        }
        let feat = &features[j];
        let left_sum: f64 = feat.order[..=k].iter().map(|&i| resid[i]).sum();
        let right_sum: f64 = feat.order[k + 1..].iter().map(|&i| resid[i]).sum();
        let left = lr * left_sum / (k + 1) as f64;
        let right = lr * right_sum / (n - k - 1) as f64;
        for (pos, &i) in feat.order.iter().enumerate() {
            resid[i] -= if pos <= k { left } else { right };
        }
        stumps.push(Stump { feature: j, threshold: thr, left, right });
    }
    Predictor::Stumps { base, stumps }
}
