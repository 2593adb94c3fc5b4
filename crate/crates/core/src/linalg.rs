//! Rank-revealing solves for the small symmetric systems that appear in the
//! estimating equations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest condition number accepted before a system is declared singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Pseudo-inverse of a symmetric positive semidefinite matrix, refusing
/// anything whose condition number exceeds [`MAX_CONDITION`].
pub fn checked_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(smax > 0.0) || !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::RankDeficientDesign { context: context.to_string(), condition });
    }
    svd.pseudo_inverse(0.0).map_err(|_| Error::RankDeficientDesign { context: context.to_string(), condition })
}

/// Gram matrix `X'X / n`.
pub fn scaled_gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows().max(1) as f64;
    x.tr_mul(x) / n
}

/// `X'v / n`.
pub fn scaled_cross(x: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    x.tr_mul(v) / n
}

/// Sample covariance (denominator `n - 1`) of the rows of `scores`.
pub fn row_covariance(scores: &DMatrix<f64>) -> DMatrix<f64> {
    let n = scores.nrows();
    let d = scores.ncols();
    if n < 2 {
        return DMatrix::zeros(d, d);
    }
    let means = scores.row_mean();
    let mut centered = scores.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    centered.tr_mul(&centered) / (n - 1) as f64
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Scales row `i` of `x` by `w[i]`.
pub fn scale_rows(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= w[i];
    }
    out
}
