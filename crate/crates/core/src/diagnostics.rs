//! Assumption checks on observed data and the variant recommender.
//!
//! Comparability of labeled and unlabeled rows is checked on covariates only
//! (standardized mean differences, two-sample KS, energy distance); the
//! prediction model is checked through the labeled residuals. Flags are
//! advisory and never block estimation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PredictionSet, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::stats::{mean, sample_var, stream_rng, student_t_two_sided};

/// Printed with every report.
pub const COVARIATE_ONLY_CAVEAT: &str = "Outcomes are unobserved on unlabeled rows, so these checks compare \
covariates only; selection driven by the outcome itself can leave no trace in the covariates.";

const KS_SERIES_TERMS: usize = 100;

pub fn standardized_mean_diff(labeled: &[f64], unlabeled: &[f64]) -> Result<f64> {
    for s in [labeled, unlabeled] {
        if s.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, have: s.len() });
        }
    }
    let diff = mean(labeled) - mean(unlabeled);
    let pooled = ((sample_var(labeled) + sample_var(unlabeled)) / 2.0).sqrt();
    if pooled == 0.0 {
        return if diff == 0.0 { Ok(0.0) } else { Err(Error::DegenerateScale) };
    }
    Ok(diff / pooled)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub stat: f64,
    pub pvalue: f64,
}

/// Two-sample Kolmogorov–Smirnov statistic with asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut stat = 0.0f64;
    // Advance past every copy of the smallest remaining value, then compare
    // the right-continuous ECDFs.
    while i < na && j < nb {
        let v = a[i].min(b[j]);
        while i < na && a[i] <= v {
            i += 1;
        }
        while j < nb && b[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult { stat, pvalue: kolmogorov_survival(stat * ne.sqrt()) })
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // Dual theta-function form; the alternating series converges slowly here.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let s: f64 = (1..=KS_SERIES_TERMS)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=KS_SERIES_TERMS)
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * kf * kf * x * x).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub dist: f64,
    pub pvalue: Option<f64>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Energy statistic over pooled-row indices given a pooled distance matrix.
fn energy_from_distances(dist: &[f64], n: usize, a: &[usize], b: &[usize]) -> f64 {
    let block = |p: &[usize], q: &[usize]| -> f64 {
        let mut s = 0.0;
        for &i in p {
            let row = &dist[i * n..(i + 1) * n];
            for &j in q {
                s += row[j];
            }
        }
        s / (p.len() * q.len()) as f64
    };
    (2.0 * block(a, b) - block(a, a) - block(b, b)).max(0.0)
}

/// V-statistic energy distance between the row sets `a` and `b`, with a
/// permutation p-value when `permutations > 0`.
pub fn energy_distance(a: &[Vec<f64>], b: &[Vec<f64>], permutations: usize, seed: u64) -> Result<EnergyResult> {
    energy_distance_with(a, b, permutations, seed, Execution::default())
}

pub fn energy_distance_with(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
    exec: Execution,
) -> Result<EnergyResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let p = a[0].len();
    for r in a.iter().chain(b) {
        if r.len() != p {
            return Err(Error::DimensionMismatch(p, r.len()));
        }
    }
    let pooled: Vec<&[f64]> = a.iter().chain(b).map(|r| r.as_slice()).collect();
    let n = pooled.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclid(pooled[i], pooled[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let ia: Vec<usize> = (0..a.len()).collect();
    let ib: Vec<usize> = (a.len()..n).collect();
    let observed = energy_from_distances(&dist, n, &ia, &ib);
    if permutations == 0 {
        return Ok(EnergyResult { dist: observed, pvalue: None });
    }
    let exceed = map_indexed(exec, permutations, |k| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream_rng(seed, k as u64));
        let stat = energy_from_distances(&dist, n, &idx[..a.len()], &idx[a.len()..]);
        // relative tolerance so exact ties count as exceedances
        (stat >= observed * (1.0 - 1e-12)) as usize
    })
    .into_iter()
    .sum::<usize>();
    Ok(EnergyResult { dist: observed, pvalue: Some((1 + exceed) as f64 / (1 + permutations) as f64) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionShift {
    pub mean_residual: f64,
    pub t_stat: f64,
    pub pvalue: f64,
    /// Residuals have zero variance; the t statistic is a convention.
    pub degenerate: bool,
}

/// One-sample t test of labeled residuals `Y − Ŷ` against zero.
pub fn prediction_shift_check(d: &Dataset, preds: &PredictionSet) -> Result<PredictionShift> {
    preds.check_covers(d)?;
    let (lab, _) = d.split_views();
    if lab.len() < 2 {
        return Err(Error::InsufficientLabeled { needed: 2, have: lab.len() });
    }
    let resid: Vec<f64> = lab.outcomes().iter().zip(lab.predictions(preds)).map(|(y, f)| y - f).collect();
    let m = mean(&resid);
    let sd = sample_var(&resid).sqrt();
    let n = resid.len() as f64;
    if sd == 0.0 {
        let (t, p) = if m == 0.0 { (0.0, 1.0) } else { (m.signum() * f64::INFINITY, 0.0) };
        return Ok(PredictionShift { mean_residual: m, t_stat: t, pvalue: p, degenerate: true });
    }
    let t = m / (sd / n.sqrt());
    Ok(PredictionShift { mean_residual: m, t_stat: t, pvalue: student_t_two_sided(t, n - 1.0), degenerate: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_abs_smd: f64,
    pub min_pvalue: f64,
    pub energy_permutations: usize,
    /// Rows per group entering the energy statistic; larger groups are
    /// subsampled deterministically.
    pub energy_max_rows: usize,
    pub seed: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { max_abs_smd: 0.1, min_pvalue: 0.01, energy_permutations: 199, energy_max_rows: 500, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flag {
    #[serde(rename = "A1_suspect")]
    A1Suspect,
    #[serde(rename = "A2_suspect")]
    A2Suspect,
    #[serde(rename = "A3_violated")]
    A3Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub name: String,
    /// `None` when both groups are constant at different values.
    pub smd: Option<f64>,
    pub ks_stat: f64,
    pub ks_pvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Missingness {
    pub n_l: usize,
    pub n_u: usize,
    pub labeled_fraction: f64,
    pub dropped_incomplete_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub schema_version: u32,
    pub per_covariate: Vec<CovariateBalance>,
    pub energy_distance: f64,
    pub energy_pvalue: Option<f64>,
    pub prediction_shift: Option<PredictionShift>,
    pub missingness: Missingness,
    pub has_pretrained: bool,
    pub flags: BTreeSet<Flag>,
    pub thresholds: Thresholds,
    pub caveat: String,
}

fn subsample(rows: Vec<Vec<f64>>, max: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    if rows.len() <= max {
        return rows;
    }
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.shuffle(&mut stream_rng(seed, stream));
    idx.truncate(max);
    idx.sort_unstable();
    idx.into_iter().map(|i| rows[i].clone()).collect()
}

/// Runs every check. `preds` is the pretrained model's output when one exists.
pub fn build_report(
    d: &Dataset,
    preds: Option<&PredictionSet>,
    has_pretrained: bool,
    t: &Thresholds,
) -> Result<DiagnosticReport> {
    let (lab, unl) = d.split_views();
    let mut per_covariate = Vec::with_capacity(d.p());
    for (j, name) in d.covariate_names().iter().enumerate() {
        let xl: Vec<f64> = (0..lab.len()).map(|k| lab.x(k)[j]).collect();
        let xu: Vec<f64> = (0..unl.len()).map(|k| unl.x(k)[j]).collect();
        let smd = match standardized_mean_diff(&xl, &xu) {
            Ok(v) => Some(v),
            Err(Error::DegenerateScale) => None,
            Err(Error::TooFewSamples { .. }) => Some(0.0),
            Err(e) => return Err(e),
        };
        let ks =
            if xl.is_empty() || xu.is_empty() { KsResult { stat: 0.0, pvalue: 1.0 } } else { ks_two_sample(&xl, &xu)? };
        per_covariate.push(CovariateBalance { name: name.clone(), smd, ks_stat: ks.stat, ks_pvalue: ks.pvalue });
    }

    let (energy, energy_p) = if d.p() > 0 && !lab.is_empty() && !unl.is_empty() {
        let a = subsample((0..lab.len()).map(|k| lab.x(k).to_vec()).collect(), t.energy_max_rows, t.seed, 1);
        let b = subsample((0..unl.len()).map(|k| unl.x(k).to_vec()).collect(), t.energy_max_rows, t.seed, 2);
        let e = energy_distance(&a, &b, t.energy_permutations, t.seed)?;
        (e.dist, e.pvalue)
    } else {
        (0.0, None)
    };

    let shift = preds.map(|p| prediction_shift_check(d, p)).transpose()?;

    let mut flags = BTreeSet::new();
    let a1 = per_covariate.iter().any(|c| c.smd.is_none_or(|s| s.abs() > t.max_abs_smd) || c.ks_pvalue < t.min_pvalue)
        || energy_p.is_some_and(|p| p < t.min_pvalue);
    if a1 {
        flags.insert(Flag::A1Suspect);
    }
    if !has_pretrained || shift.is_some_and(|s| s.pvalue < t.min_pvalue) {
        flags.insert(Flag::A2Suspect);
    }
    if d.dropped_incomplete() > 0 {
        flags.insert(Flag::A3Violated);
    }

    Ok(DiagnosticReport {
        schema_version: SCHEMA_VERSION,
        per_covariate,
        energy_distance: energy,
        energy_pvalue: energy_p,
        prediction_shift: shift,
        missingness: Missingness {
            n_l: lab.len(),
            n_u: unl.len(),
            labeled_fraction: lab.len() as f64 / d.n() as f64,
            dropped_incomplete_rows: d.dropped_incomplete(),
        },
        has_pretrained,
        flags,
        thresholds: *t,
        caveat: COVARIATE_ONLY_CAVEAT.to_string(),
    })
}

impl DiagnosticReport {
    /// Plain-text rendering for terminals.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<16} {:>10} {:>10} {:>12}", "covariate", "SMD", "KS", "KS p-value");
        for c in &self.per_covariate {
            let smd = c.smd.map_or("degenerate".to_string(), |v| format!("{v:.4}"));
            let _ = writeln!(s, "{:<16} {:>10} {:>10.4} {:>12.4}", c.name, smd, c.ks_stat, c.ks_pvalue);
        }
        let ep = self.energy_pvalue.map_or("-".to_string(), |p| format!("{p:.4}"));
        let _ = writeln!(s, "energy distance {:.6} (p = {ep})", self.energy_distance);
        if let Some(sh) = &self.prediction_shift {
            let _ = writeln!(
                s,
                "prediction shift: mean residual {:.6}, t = {:.3}, p = {:.4}{}",
                sh.mean_residual,
                sh.t_stat,
                sh.pvalue,
                if sh.degenerate { " (degenerate)" } else { "" }
            );
        }
        let m = &self.missingness;
        let _ = writeln!(
            s,
            "labeled {} / unlabeled {} (fraction {:.4}), dropped incomplete rows {}",
            m.n_l, m.n_u, m.labeled_fraction, m.dropped_incomplete_rows
        );
        let flags: Vec<String> =
            self.flags.iter().map(|f| serde_json::to_string(f).unwrap().trim_matches('"').to_string()).collect();
        let _ = writeln!(s, "flags: {}", if flags.is_empty() { "none".into() } else { flags.join(", ") });
        let _ = writeln!(s, "note: {}", self.caveat);
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "PPI_or_PPIpp")]
    PpiOrPpiPlusPlus,
    #[serde(rename = "MAR_robust_variant")]
    MarRobust,
    #[serde(rename = "CrossFit_variant")]
    CrossFit,
    #[serde(rename = "Imputation_variant")]
    Imputation,
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub variant: Variant,
    pub reasons: Vec<String>,
}

/// Maps flags to a variant. Total over all flag combinations.
pub fn recommend_from_flags(flags: &BTreeSet<Flag>, has_pretrained: bool) -> Recommendation {
    let mut reasons = Vec::new();
    for f in flags {
        reasons.push(match f {
            Flag::A1Suspect => "labeled and unlabeled covariate distributions differ; consider variants that \
                model the labeling mechanism (not provided by this toolkit)"
                .to_string(),
            Flag::A2Suspect if !has_pretrained => {
                "no independently trained model; use cross-fitting (Cross-PPI or Cross-PPBoot)".to_string()
            }
            Flag::A2Suspect => "labeled residuals show a systematic shift; model may overlap the inference data or \
                be miscalibrated; prefer cross-fitting"
                .to_string(),
            Flag::A3Violated => "rows with missing covariates were dropped; consider imputation-based variants \
                (not provided by this toolkit)"
                .to_string(),
        });
    }
    let variant = match flags.len() {
        0 => {
            reasons.push("no assumption flags raised; PPI or PPI++ (PPI++ guards against weak predictions)".into());
            Variant::PpiOrPpiPlusPlus
        }
        1 => match flags.iter().next().unwrap() {
            Flag::A1Suspect => Variant::MarRobust,
            Flag::A2Suspect => Variant::CrossFit,
            Flag::A3Violated => Variant::Imputation,
        },
        _ => Variant::Combined,
    };
    reasons.push("diagnostics are advisory: comparability and model independence cannot be proven from data".into());
    Recommendation { variant, reasons }
}

pub fn recommend(report: &DiagnosticReport, has_pretrained: bool) -> Recommendation {
    recommend_from_flags(&report.flags, has_pretrained)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smd_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(standardized_mean_diff(&a, &a).unwrap(), 0.0);
        // means 1 and 0, both variances 1
        let l = [0.0, 1.0, 2.0];
        let u = [-1.0, 0.0, 1.0];
        assert!((standardized_mean_diff(&l, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(standardized_mean_diff(&[1.0, 1.0], &[2.0, 2.0]).unwrap_err(), Error::DegenerateScale);
        assert_eq!(standardized_mean_diff(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(standardized_mean_diff(&[1.0], &[1.0, 2.0]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn ks_examples() {
        let a = [1.0, 2.0, 3.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!((r.stat, r.pvalue), (0.0, 1.0));
        let r = ks_two_sample(&a, &[1.5, 2.5, 3.5]).unwrap();
        assert!((r.stat - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ks_two_sample(&[0.0, 0.0], &[1.0, 1.0]).unwrap().stat, 1.0);
        assert_eq!(ks_two_sample(&[], &[1.0]).unwrap_err(), Error::EmptySample);
    }

    #[test]
    fn kolmogorov_distribution_values() {
        // reference values of the Kolmogorov survival function
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 1e-4);
        assert!((kolmogorov_survival(0.5) - 0.9639).abs() < 1e-4);
        // both branches agree at the switch point
        let below = kolmogorov_survival(1.0 - 1e-12);
        let above = kolmogorov_survival(1.0);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn energy_examples() {
        let a = vec![vec![0.0, 1.0], vec![2.0, 3.0]];
        assert_eq!(energy_distance(&a, &a, 0, 0).unwrap().dist, 0.0);
        let e = energy_distance(&[vec![0.0]], &[vec![1.0]], 0, 0).unwrap();
        assert_eq!(e.dist, 2.0);
        assert_eq!(e.pvalue, None);
        assert_eq!(energy_distance(&[vec![0.0]], &[vec![1.0, 2.0]], 0, 0).unwrap_err(), Error::DimensionMismatch(1, 2));
    }

    #[test]
    fn shift_examples() {
        let d = Dataset::new(
            vec!["x".into()],
            (0..5).map(|i| vec![i as f64]).collect(),
            vec![Some(1.0), Some(2.0), Some(5.0), Some(3.0), None],
            (0..5).collect(),
        )
        .unwrap();
        let perfect = PredictionSet::pretrained(vec![1.0, 2.0, 5.0, 3.0, 0.0]).unwrap();
        let s = prediction_shift_check(&d, &perfect).unwrap();
        assert_eq!((s.mean_residual, s.t_stat, s.pvalue), (0.0, 0.0, 1.0));
        let off = PredictionSet::pretrained(vec![0.0, 1.0, 4.0, 2.0, 0.0]).unwrap();
        let s = prediction_shift_check(&d, &off).unwrap();
        assert_eq!((s.mean_residual, s.pvalue, s.degenerate), (1.0, 0.0, true));
    }

    #[test]
    fn recommend_all_flag_combinations() {
        let all = [Flag::A1Suspect, Flag::A2Suspect, Flag::A3Violated];
        for mask in 0..8u8 {
            let flags: BTreeSet<Flag> =
                all.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, f)| *f).collect();
            for pre in [true, false] {
                let r = recommend_from_flags(&flags, pre);
                assert_eq!(r, recommend_from_flags(&flags, pre));
                let expected = match mask {
                    0 => Variant::PpiOrPpiPlusPlus,
                    1 => Variant::MarRobust,
                    2 => Variant::CrossFit,
                    4 => Variant::Imputation,
                    _ => Variant::Combined,
                };
                assert_eq!(r.variant, expected, "mask {mask}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
            let ecdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
            a.iter().chain(b).map(|&t| (ecdf(a, t) - ecdf(b, t)).abs()).fold(0.0, f64::max)
        }

        proptest! {
            #[test]
            fn ks_matches_brute_force(
                a in prop::collection::vec(-5i32..5, 1..25),
                b in prop::collection::vec(-5i32..5, 1..25),
            ) {
                let a: Vec<f64> = a.into_iter().map(f64::from).collect();
                let b: Vec<f64> = b.into_iter().map(f64::from).collect();
                prop_assert_eq!(ks_two_sample(&a, &b).unwrap().stat, brute_ks(&a, &b));
            }

            #[test]
            fn smd_antisymmetric_and_shift_invariant(
                a in prop::collection::vec(-10f64..10.0, 2..30),
                b in prop::collection::vec(-10f64..10.0, 2..30),
                shift in -100f64..100.0,
            ) {
                if let (Ok(ab), Ok(ba)) = (standardized_mean_diff(&a, &b), standardized_mean_diff(&b, &a)) {
                    prop_assert!((ab + ba).abs() < 1e-12);
                    let a2: Vec<f64> = a.iter().map(|v| v + shift).collect();
                    let b2: Vec<f64> = b.iter().map(|v| v + shift).collect();
                    let shifted = standardized_mean_diff(&a2, &b2).unwrap();
                    prop_assert!((shifted - ab).abs() < 1e-8 * (1.0 + ab.abs()));
                }
            }

            #[test]
            fn energy_symmetric(
                a in prop::collection::vec(prop::collection::vec(-3i32..3, 2), 1..8),
                b in prop::collection::vec(prop::collection::vec(-3i32..3, 2), 1..8),
            ) {
                let f = |v: Vec<Vec<i32>>| v.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect::<Vec<Vec<f64>>>();
                let (a, b) = (f(a), f(b));
                let ab = energy_distance(&a, &b, 0, 0).unwrap().dist;
                let ba = energy_distance(&b, &a, 0, 0).unwrap().dist;
                prop_assert!((ab - ba).abs() < 1e-12);
                // empirical distributions as row -> proportion, compared exactly via cross-multiplied counts
                let counts = |s: &[Vec<f64>]| {
                    let mut m = std::collections::BTreeMap::new();
                    for r in s {
                        *m.entry(r.iter().map(|v| *v as i64).collect::<Vec<_>>()).or_insert(0usize) += 1;
                    }
                    m
                };
                let (ca, cb) = (counts(&a), counts(&b));
                let same = ca.keys().eq(cb.keys())
                    && ca.iter().all(|(k, &n)| n * b.len() == cb[k] * a.len());
                prop_assert_eq!(ab.abs() < 1e-12, same);
            }
        }
    }
}
