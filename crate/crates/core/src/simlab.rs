//! Synthetic data, labeling mechanisms, training regimes and Monte Carlo
//! coverage studies.
//!
//! Replication `r` of a study draws everything from streams keyed by
//! `(mc.seed, r)`, so the output does not depend on how replications are
//! scheduled across workers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::crossfit::{
    cross_ppboot_from_predictions, cross_ppi_from_predictions, crossfit_predict_with, fit_learner, make_folds,
    BootConfig, LearnerSpec, DEFAULT_FOLDS,
};
use crate::data::{ConfidenceInterval, Dataset, Estimate, LossTarget, PredictionSet};
use crate::error::{Error, Result};
use crate::estimators::{cc_estimate, ppi_estimate, ppipp_estimate, LambdaPolicy};
use crate::par::{map_indexed, Execution};
use crate::stats::{correlation, mean, sample_var, stream_rng};

/// Gaussian linear model with an optional `sin` term on the first covariate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub p: usize,
    /// Intercept first, then one slope per covariate.
    pub beta: Vec<f64>,
    pub noise_sd: f64,
    #[serde(default)]
    pub covariate_corr: f64,
    #[serde(default)]
    pub nonlinearity: f64,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if self.beta.len() != self.p + 1 {
            return bad(format!("beta has {} entries, expected p + 1 = {}", self.beta.len(), self.p + 1));
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return bad(format!("noise_sd {} must be positive", self.noise_sd));
        }
        if !(0.0..1.0).contains(&self.covariate_corr) {
            return bad(format!("covariate_corr {} must lie in [0, 1)", self.covariate_corr));
        }
        if !(self.nonlinearity >= 0.0) || !self.nonlinearity.is_finite() {
            return bad(format!("nonlinearity {} must be >= 0", self.nonlinearity));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be finite".into());
        }
        Ok(())
    }

    /// Population value of the target. Covariates are standard normal, so the
    /// least-squares projection of `sin(X1)` onto the covariates is
    /// `exp(-1/2) X1` (Stein's identity); regression targets absorb it into the
    /// first slope.
    pub fn true_parameter(&self, target: LossTarget) -> Vec<f64> {
        let shift = self.nonlinearity * (-0.5f64).exp();
        match target {
            LossTarget::Mean => vec![self.beta[0]],
            LossTarget::LinearRegression { include_intercept } => {
                let mut slopes = self.beta[1..].to_vec();
                slopes[0] += shift;
                if include_intercept {
                    std::iter::once(self.beta[0]).chain(slopes).collect()
                } else {
                    slopes
                }
            }
        }
    }
}

/// Draw from a [`DgpSpec`]. True outcomes live here, never in a [`Dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedData {
    pub covariates: Vec<Vec<f64>>,
    pub outcomes: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn generate(dgp: &DgpSpec, seed: u64) -> Result<SimulatedData> {
    dgp.validate()?;
    Ok(generate_rows(dgp, dgp.n, &mut stream_rng(seed, 0)))
}

fn generate_rows<R: Rng>(dgp: &DgpSpec, n: usize, rng: &mut R) -> SimulatedData {
    let common = dgp.covariate_corr.sqrt();
    let own = (1.0 - dgp.covariate_corr).sqrt();
    let mut covariates = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let z0: f64 = rng.sample(StandardNormal);
        let x: Vec<f64> = (0..dgp.p)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                common * z0 + own * z
            })
            .collect();
        let eps: f64 = rng.sample(StandardNormal);
        let y = dgp.beta[0]
            + x.iter().zip(&dgp.beta[1..]).map(|(a, b)| a * b).sum::<f64>()
            + dgp.nonlinearity * x[0].sin()
            + dgp.noise_sd * eps;
        covariates.push(x);
        outcomes.push(y);
    }
    SimulatedData { covariates, outcomes, beta: dgp.beta.clone() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LabelMechanism {
    Mcar {
        pi: f64,
    },
    /// Rows above the outcome `quantile` are `multiplier` times as likely to be labeled.
    Mnar {
        quantile: f64,
        multiplier: f64,
        target_pi: f64,
    },
}

impl LabelMechanism {
    pub const DEFAULT_MNAR_QUANTILE: f64 = 0.8;
    pub const DEFAULT_MNAR_MULTIPLIER: f64 = 10.0;

    /// `(p_low, p_high)` for MNAR, `(pi, pi)` for MCAR.
    pub fn probabilities(&self) -> Result<(f64, f64)> {
        let unit = |v: f64, what: &str| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} {v} must lie in (0, 1)")))
            }
        };
        match *self {
            LabelMechanism::Mcar { pi } => {
                unit(pi, "pi")?;
                Ok((pi, pi))
            }
            LabelMechanism::Mnar { quantile, multiplier, target_pi } => {
                unit(quantile, "quantile")?;
                unit(target_pi, "target_pi")?;
                if !(multiplier > 1.0) || !multiplier.is_finite() {
                    return Err(Error::InvalidSpec(format!("multiplier {multiplier} must exceed 1")));
                }
                let low = target_pi / (quantile + multiplier * (1.0 - quantile));
                let high = multiplier * low;
                if high > 1.0 {
                    return Err(Error::InfeasibleMechanism(high));
                }
                Ok((low, high))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Labeling {
    pub labeled: Vec<bool>,
    pub realized_fraction: f64,
}

/// Linear-interpolation sample quantile.
fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn apply_labeling(outcomes: &[f64], mech: &LabelMechanism, seed: u64) -> Result<Labeling> {
    label_with(outcomes, mech, &mut stream_rng(seed, 1))
}

fn label_with<R: Rng>(outcomes: &[f64], mech: &LabelMechanism, rng: &mut R) -> Result<Labeling> {
    if outcomes.is_empty() {
        return Err(Error::InvalidSpec("no outcomes to label".into()));
    }
    let (low, high) = mech.probabilities()?;
    let cut = match mech {
        LabelMechanism::Mcar { .. } => f64::INFINITY,
        LabelMechanism::Mnar { quantile, .. } => empirical_quantile(outcomes, *quantile),
    };
    let labeled: Vec<bool> = outcomes
        .iter()
        .map(|&y| {
            let p = if y > cut { high } else { low };
            rng.random::<f64>() < p
        })
        .collect();
    let realized_fraction = labeled.iter().filter(|&&s| s).count() as f64 / labeled.len() as f64;
    Ok(Labeling { labeled, realized_fraction })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// The learner sees only an external labeled sample.
    Holdout { n_external: usize },
    /// The learner sees the external sample plus the internal labeled rows.
    DoubleDipping { n_external: usize },
}

impl Regime {
    fn n_external(&self) -> usize {
        match *self {
            Regime::Holdout { n_external } | Regime::DoubleDipping { n_external } => n_external,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    Classical,
    #[serde(rename = "PPI")]
    Ppi,
    #[serde(rename = "PPIpp")]
    PpiPlusPlus,
    #[serde(rename = "CrossPPI")]
    CrossPpi,
    #[serde(rename = "CrossPPBoot")]
    CrossPpBoot,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::Classical,
        MethodKind::Ppi,
        MethodKind::PpiPlusPlus,
        MethodKind::CrossPpi,
        MethodKind::CrossPpBoot,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Classical => "Classical",
            MethodKind::Ppi => "PPI",
            MethodKind::PpiPlusPlus => "PPIpp",
            MethodKind::CrossPpi => "CrossPPI",
            MethodKind::CrossPpBoot => "CrossPPBoot",
        }
    }

    fn needs_pretrained(&self) -> bool {
        matches!(self, MethodKind::Ppi | MethodKind::PpiPlusPlus)
    }

    fn is_cross(&self) -> bool {
        matches!(self, MethodKind::CrossPpi | MethodKind::CrossPpBoot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

fn default_level() -> f64 {
    crate::data::DEFAULT_LEVEL
}

fn default_target() -> LossTarget {
    LossTarget::LinearRegression { include_intercept: true }
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_boot() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub regime: Regime,
    pub learner: LearnerSpec,
    pub methods: Vec<MethodKind>,
    pub mc: McConfig,
    #[serde(default = "default_target")]
    pub target: LossTarget,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_boot")]
    pub boot_replicates: usize,
    /// Refuse cross-fitted methods in the double-dipping regime.
    #[serde(default)]
    pub strict: bool,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidSpec("no methods requested".into()));
        }
        if self.mc.reps == 0 {
            return Err(Error::InvalidSpec("reps must be positive".into()));
        }
        if !(self.mc.ci_level > 0.0 && self.mc.ci_level < 1.0) {
            return Err(Error::InvalidLevel(self.mc.ci_level));
        }
        if self.strict
            && matches!(self.regime, Regime::DoubleDipping { .. })
            && self.methods.iter().any(MethodKind::is_cross)
        {
            return Err(Error::InvalidSpec(
                "cross-fitted methods are disabled for double dipping in strict mode".into(),
            ));
        }
        if self.regime.n_external() == 0 && self.methods.iter().any(MethodKind::needs_pretrained) {
            return Err(Error::InvalidSpec("n_external must be positive to train the prediction model".into()));
        }
        self.learner.validate()
    }
}

/// Full simulation config as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub dgp: DgpSpec,
    pub mechanism: LabelMechanism,
    pub scenario: ScenarioSpec,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: MethodKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One line of the per-replication audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub n_l: usize,
    pub n_u: usize,
    /// Labeled-sample correlation between outcomes and pretrained predictions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pred_corr: Option<f64>,
    pub methods: Vec<MethodRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: String,
    pub coefficient: String,
    #[serde(skip)]
    pub coefficient_index: usize,
    pub coverage: f64,
    pub mean_width: f64,
    pub mean_bias: f64,
    pub reps: usize,
    /// Standard deviation of the point estimates over replications divided by `sqrt(reps)`.
    #[serde(skip)]
    pub mc_se: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
    /// Failed replications per method, excluded from that method's rows.
    pub failed: BTreeMap<String, usize>,
}

impl CoverageTable {
    pub fn row(&self, method: MethodKind, coefficient: usize) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.method == method.name() && r.coefficient_index == coefficient)
    }

    pub fn rows_for(&self, method: MethodKind) -> impl Iterator<Item = &CoverageRow> {
        self.rows.iter().filter(move |r| r.method == method.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutcome {
    pub table: CoverageTable,
    pub records: Vec<ReplicationRecord>,
    pub truth: Vec<f64>,
}

impl ScenarioOutcome {
    /// Average labeled-sample correlation between outcomes and pretrained predictions.
    pub fn mean_pred_corr(&self) -> Option<f64> {
        let c: Vec<f64> = self.records.iter().filter_map(|r| r.pred_corr).collect();
        (!c.is_empty()).then(|| mean(&c))
    }
}

pub fn run_scenario(dgp: &DgpSpec, mech: &LabelMechanism, scenario: &ScenarioSpec) -> Result<ScenarioOutcome> {
    run_scenario_with(dgp, mech, scenario, Execution::default())
}

/// Seed for purpose `purpose` of replication `rep`.
fn derive_seed(seed: u64, rep: usize, purpose: u64) -> u64 {
    stream_rng(seed, ((rep as u64) << 8) | purpose).next_u64()
}

pub fn run_scenario_with(
    dgp: &DgpSpec,
    mech: &LabelMechanism,
    scenario: &ScenarioSpec,
    exec: Execution,
) -> Result<ScenarioOutcome> {
    dgp.validate()?;
    mech.probabilities()?;
    scenario.validate()?;
    let truth = dgp.true_parameter(scenario.target);
    let mut methods: Vec<MethodKind> = scenario.methods.clone();
    methods.sort();
    methods.dedup();

    let records = map_indexed(exec, scenario.mc.reps, |r| run_replication(dgp, mech, scenario, &methods, r));
    let table = aggregate(&records, &methods, &truth, scenario);
    Ok(ScenarioOutcome { table, records, truth })
}

fn run_replication(
    dgp: &DgpSpec,
    mech: &LabelMechanism,
    sc: &ScenarioSpec,
    methods: &[MethodKind],
    rep: usize,
) -> ReplicationRecord {
    let seed = sc.mc.seed;
    let internal = generate_rows(dgp, dgp.n, &mut stream_rng(derive_seed(seed, rep, 0), 0));
    let fail_all = |msg: String, n_l: usize, n_u: usize| ReplicationRecord {
        rep,
        n_l,
        n_u,
        pred_corr: None,
        methods: methods
            .iter()
            .map(|&m| MethodRecord {
                method: m,
                theta: None,
                lower: None,
                upper: None,
                lambda: None,
                error: Some(msg.clone()),
            })
            .collect(),
    };
    let labeling = match label_with(&internal.outcomes, mech, &mut stream_rng(derive_seed(seed, rep, 1), 0)) {
        Ok(l) => l,
        Err(e) => return fail_all(e.to_string(), 0, 0),
    };
    let n_l = labeling.labeled.iter().filter(|&&s| s).count();
    let n_u = dgp.n - n_l;
    let names: Vec<String> = (1..=dgp.p).map(|j| format!("x{j}")).collect();
    let data = match Dataset::new(
        names,
        internal.covariates.clone(),
        internal.outcomes.iter().zip(&labeling.labeled).map(|(y, &s)| s.then_some(*y)).collect(),
        (0..dgp.n as i64).collect(),
    ) {
        Ok(d) => d,
        Err(e) => return fail_all(e.to_string(), n_l, n_u),
    };

    let mut pred_corr = None;
    let pretrained: Option<Result<PredictionSet>> = methods.iter().any(MethodKind::needs_pretrained).then(|| {
        let n_ext = sc.regime.n_external();
        let external = generate_rows(dgp, n_ext, &mut stream_rng(derive_seed(seed, rep, 2), 0));
        let mut xs: Vec<&[f64]> = external.covariates.iter().map(|r| r.as_slice()).collect();
        let mut ys = external.outcomes.clone();
        if matches!(sc.regime, Regime::DoubleDipping { .. }) {
            for i in (0..dgp.n).filter(|&i| labeling.labeled[i]) {
                xs.push(&internal.covariates[i]);
                ys.push(internal.outcomes[i]);
            }
        }
        let model = fit_learner(&sc.learner, &xs, &ys)?;
        let values: Vec<f64> = internal.covariates.iter().map(|x| model.predict(x)).collect();
        let (lab, _) = data.split_views();
        let fl: Vec<f64> = lab.rows().iter().map(|&i| values[i]).collect();
        pred_corr = Some(correlation(&lab.outcomes(), &fl));
        PredictionSet::pretrained(values)
    });

    let crossfit: Option<Result<PredictionSet>> = methods.iter().any(MethodKind::is_cross).then(|| {
        let plan = make_folds(data.n_labeled(), sc.folds, derive_seed(seed, rep, 3))?;
        crossfit_predict_with(&data, &sc.learner, &plan, Execution::Sequential)
    });

    let level = sc.mc.ci_level;
    let interval = |e: Result<Estimate>| -> Result<(Estimate, ConfidenceInterval)> {
        let e = e?;
        let ci = e.confidence_interval(level)?;
        Ok((e, ci))
    };
    let records = methods
        .iter()
        .map(|&m| {
            let pre = || -> Result<&PredictionSet> {
                pretrained.as_ref().expect("computed when needed").as_ref().map_err(Clone::clone)
            };
            let cf = || -> Result<&PredictionSet> {
                crossfit.as_ref().expect("computed when needed").as_ref().map_err(Clone::clone)
            };
            let res = match m {
                MethodKind::Classical => interval(cc_estimate(&data, sc.target)),
                MethodKind::Ppi => pre().and_then(|p| interval(ppi_estimate(&data, p, sc.target))),
                MethodKind::PpiPlusPlus => {
                    pre().and_then(|p| interval(ppipp_estimate(&data, p, sc.target, LambdaPolicy::Optimized)))
                }
                MethodKind::CrossPpi => cf().and_then(|p| interval(cross_ppi_from_predictions(&data, p, sc.target))),
                MethodKind::CrossPpBoot => cf().and_then(|p| {
                    let boot = BootConfig { replicates: sc.boot_replicates, seed: derive_seed(seed, rep, 4), level };
                    cross_ppboot_from_predictions(&data, p, sc.target, &boot, Execution::Sequential)
                        .map(|b| (b.estimate, b.interval))
                }),
            };
            match res {
                Ok((e, ci)) => MethodRecord {
                    method: m,
                    lambda: e.method.lambda(),
                    theta: Some(e.theta),
                    lower: Some(ci.lower),
                    upper: Some(ci.upper),
                    error: None,
                },
                Err(err) => MethodRecord {
                    method: m,
                    theta: None,
                    lower: None,
                    upper: None,
                    lambda: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    ReplicationRecord { rep, n_l, n_u, pred_corr, methods: records }
}

fn aggregate(records: &[ReplicationRecord], methods: &[MethodKind], truth: &[f64], sc: &ScenarioSpec) -> CoverageTable {
    let names: Vec<String> = {
        let covs: Vec<String> = (1..truth.len() + 1).map(|j| format!("x{j}")).collect();
        match sc.target {
            LossTarget::Mean => vec!["mean".into()],
            LossTarget::LinearRegression { include_intercept: true } => {
                std::iter::once("intercept".to_string()).chain(covs.into_iter().take(truth.len() - 1)).collect()
            }
            LossTarget::LinearRegression { include_intercept: false } => covs.into_iter().take(truth.len()).collect(),
        }
    };
    let mut table = CoverageTable::default();
    for &m in methods {
        let ok: Vec<&MethodRecord> = records
            .iter()
            .filter_map(|r| r.methods.iter().find(|mr| mr.method == m))
            .filter(|mr| mr.error.is_none())
            .collect();
        table.failed.insert(m.name().to_string(), records.len() - ok.len());
        for (j, (&t, name)) in truth.iter().zip(&names).enumerate() {
            let thetas: Vec<f64> = ok.iter().map(|mr| mr.theta.as_ref().unwrap()[j]).collect();
            let covered =
                ok.iter().filter(|mr| mr.lower.as_ref().unwrap()[j] <= t && t <= mr.upper.as_ref().unwrap()[j]).count();
            let widths: Vec<f64> =
                ok.iter().map(|mr| mr.upper.as_ref().unwrap()[j] - mr.lower.as_ref().unwrap()[j]).collect();
            let reps = ok.len();
            let frac = |c: usize| if reps == 0 { f64::NAN } else { c as f64 / reps as f64 };
            table.rows.push(CoverageRow {
                method: m.name().to_string(),
                coefficient: name.clone(),
                coefficient_index: j,
                coverage: frac(covered),
                mean_width: if reps == 0 { f64::NAN } else { mean(&widths) },
                mean_bias: if reps == 0 { f64::NAN } else { mean(&thetas) - t },
                reps,
                mc_se: (sample_var(&thetas) / reps.max(1) as f64).sqrt(),
            });
        }
    }
    table
}

pub const TABLE_HEADER: &str = "method,coefficient,coverage,mean_width,mean_bias,reps";

/// CSV rendering with rows ordered by method, then coefficient index.
pub fn render_table(table: &CoverageTable) -> String {
    let rank = |name: &str| MethodKind::ALL.iter().position(|m| m.name() == name).unwrap_or(usize::MAX);
    let mut rows: Vec<&CoverageRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        rank(&a.method)
            .cmp(&rank(&b.method))
            .then(a.method.cmp(&b.method))
            .then(a.coefficient_index.cmp(&b.coefficient_index))
    });
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method, r.coefficient, r.coverage, r.mean_width, r.mean_bias, r.reps
        ));
    }
    out
}

pub fn emit_table(table: &CoverageTable, path: &Path) -> Result<()> {
    std::fs::write(path, render_table(table))?;
    Ok(())
}

/// Per-replication JSON lines.
pub fn write_audit_log<W: Write>(records: &[ReplicationRecord], mut out: W) -> Result<()> {
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Full-data least squares, for checking that a noiseless draw identifies beta.
pub fn full_data_ols(data: &SimulatedData) -> Result<Vec<f64>> {
    let n = data.outcomes.len();
    let p = data.covariates.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { data.covariates[i][j - 1] });
    let y = DVector::from_column_slice(&data.outcomes);
    let inv = crate::linalg::checked_inverse(&x.tr_mul(&x), "full-data design")?;
    Ok((inv * x.tr_mul(&y)).iter().copied().collect())
}
