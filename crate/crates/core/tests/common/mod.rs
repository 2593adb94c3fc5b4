//! Direct-formula reference implementations and random fixtures shared by
//! the integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code, clippy::needless_range_loop)]

use ppikit::{Dataset, PredictionSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn avg(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn var(v: &[f64]) -> f64 {
    cov(v, v)
}

pub fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (avg(a), avg(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(m: &Mat) -> Mat {
    let n = m.len();
    let mut a: Mat = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        assert!(d.abs() > 1e-300, "singular matrix in oracle");
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect()).collect()
}

fn matvec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1/n) Σ x_i x_i'`
fn gram(x: &Mat) -> Mat {
    let p = x[0].len();
    let n = x.len() as f64;
    (0..p).map(|a| (0..p).map(|b| x.iter().map(|r| r[a] * r[b]).sum::<f64>() / n).collect()).collect()
}

/// `(1/n) Σ x_i v_i`
fn cross(x: &Mat, v: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let n = x.len() as f64;
    (0..p).map(|a| x.iter().zip(v).map(|(r, y)| r[a] * y).sum::<f64>() / n).collect()
}

/// Sample covariance (n - 1) of the rows of `s`.
fn row_cov(s: &Mat) -> Mat {
    let p = s[0].len();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| s.iter().map(|r| r[j]).collect()).collect();
    (0..p).map(|a| (0..p).map(|b| cov(&cols[a], &cols[b])).collect()).collect()
}

/// Mean estimate and variance with power weight λ (λ = 1 is PPI, 0 is complete case).
pub fn mean_oracle(yl: &[f64], fl: &[f64], fu: &[f64], lambda: f64) -> (f64, f64) {
    let theta = avg(yl) + lambda * (avg(fu) - avg(fl));
    let r: Vec<f64> = yl.iter().zip(fl).map(|(y, f)| y - lambda * f).collect();
    let v = var(&r) / yl.len() as f64 + lambda * lambda * var(fu) / fu.len() as f64;
    (theta, v)
}

pub fn mean_lambda_oracle(yl: &[f64], fl: &[f64], fu: &[f64]) -> f64 {
    let pooled: Vec<f64> = fl.iter().chain(fu).copied().collect();
    let vp = var(&pooled);
    if vp <= 0.0 {
        return 0.0;
    }
    (cov(yl, fl) / (vp * (1.0 + yl.len() as f64 / fu.len() as f64))).clamp(0.0, 1.0)
}

/// Power-tuned least squares and its sandwich covariance.
pub fn linear_oracle(xl: &Mat, yl: &[f64], fl: &[f64], xu: &Mat, fu: &[f64], lambda: f64) -> (Vec<f64>, Mat) {
    let (gl, gu) = (gram(xl), gram(xu));
    let p = gl.len();
    let h: Mat = (0..p).map(|a| (0..p).map(|b| lambda * gu[a][b] + (1.0 - lambda) * gl[a][b]).collect()).collect();
    let (cu, cf, cy) = (cross(xu, fu), cross(xl, fl), cross(xl, yl));
    let rhs: Vec<f64> = (0..p).map(|a| lambda * cu[a] - lambda * cf[a] + cy[a]).collect();
    let hinv = invert(&h);
    let theta = matvec(&hinv, &rhs);
    let su: Mat = xu.iter().zip(fu).map(|(x, f)| x.iter().map(|v| v * (dot(x, &theta) - f)).collect()).collect();
    let sl: Mat = xl
        .iter()
        .zip(yl)
        .zip(fl)
        .map(|((x, y), f)| {
            let fit = dot(x, &theta);
            x.iter().map(|v| v * (fit - y) - lambda * v * (fit - f)).collect()
        })
        .collect();
    let (cu, cl) = (row_cov(&su), row_cov(&sl));
    let (nu, nl) = (xu.len() as f64, xl.len() as f64);
    let meat: Mat = (0..p).map(|a| (0..p).map(|b| lambda * lambda * cu[a][b] / nu + cl[a][b] / nl).collect()).collect();
    (theta, matmul(&matmul(&hinv, &meat), &hinv))
}

/// Grid search over λ ∈ {0, 0.01, ..., 1} minimizing the covariance trace.
pub fn linear_lambda_oracle(xl: &Mat, yl: &[f64], fl: &[f64], xu: &Mat, fu: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=100 {
        let l = k as f64 / 100.0;
        let (_, c) = linear_oracle(xl, yl, fl, xu, fu, l);
        let tr: f64 = (0..c.len()).map(|i| c[i][i]).sum();
        if tr < best.0 {
            best = (tr, l);
        }
    }
    best.1
}

/// A random dataset with labeled and unlabeled rows interleaved, plus the
/// raw arrays in labeled/unlabeled order for the oracles.
pub struct Case {
    pub data: Dataset,
    pub preds: PredictionSet,
    pub xl: Mat,
    pub yl: Vec<f64>,
    pub fl: Vec<f64>,
    pub xu: Mat,
    pub fu: Vec<f64>,
}

impl Case {
    pub fn random<R: Rng>(rng: &mut R, n_l: usize, n_u: usize, p: usize) -> Case {
        let n = n_l + n_u;
        let mut labeled: Vec<bool> = (0..n).map(|i| i < n_l).collect();
        labeled.shuffle(rng);
        let beta: Vec<f64> = (0..=p).map(|_| normal(rng)).collect();
        let mut covs = Vec::new();
        let mut outcomes = Vec::new();
        let mut preds = Vec::new();
        let mut case = Case {
            data: Dataset::new(vec!["x".into()], vec![vec![0.0]], vec![Some(0.0)], vec![0]).unwrap(),
            preds: PredictionSet::pretrained(vec![0.0]).unwrap(),
            xl: vec![],
            yl: vec![],
            fl: vec![],
            xu: vec![],
            fu: vec![],
        };
        for &s in &labeled {
            let x: Vec<f64> = (0..p).map(|_| normal(rng)).collect();
            let mu = beta[0] + dot(&beta[1..], &x);
            let y = mu + normal(rng);
            let f = 0.7 * mu + 0.5 * normal(rng);
            if s {
                case.xl.push(x.clone());
                case.yl.push(y);
                case.fl.push(f);
            } else {
                case.xu.push(x.clone());
                case.fu.push(f);
            }
            covs.push(x);
            outcomes.push(s.then_some(y));
            preds.push(f);
        }
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        case.data = Dataset::new(names, covs, outcomes, (0..n as i64).collect()).unwrap();
        case.preds = PredictionSet::pretrained(preds).unwrap();
        case
    }

    /// Design rows with an optional leading intercept column.
    pub fn design(&self, intercept: bool) -> (Mat, Mat) {
        let add = |m: &Mat| -> Mat {
            m.iter()
                .map(|r| if intercept { std::iter::once(1.0).chain(r.iter().copied()).collect() } else { r.clone() })
                .collect()
        };
        (add(&self.xl), add(&self.xu))
    }
}
