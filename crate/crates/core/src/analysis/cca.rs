use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaResult {
    /// Canonical correlations, descending.
    pub correlations: Vec<f64>,
    /// Columns are projection directions on the standardized `X` columns.
    pub x_directions: Vec<Vec<f64>>,
    pub y_directions: Vec<Vec<f64>>,
    /// Numerical rank of the whitened cross-covariance.
    pub rank: usize,
}

fn standardize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
    out
}

fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b / a.nrows() as f64
}

fn inverse_sqrt(c: DMatrix<f64>) -> DMatrix<f64> {
    let p = c.nrows();
    let scale = RIDGE * (c.trace() / p as f64).max(1.0);
    let reg = c + DMatrix::identity(p, p) * scale;
    let eig = reg.symmetric_eigen();
    let d = DVector::from_iterator(p, eig.eigenvalues.iter().map(|v| 1.0 / v.max(scale).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Canonical correlation analysis of paired row samples.
///
/// Columns are standardized and each covariance block gets a small ridge
/// before whitening, so constant columns do not break the decomposition.
pub fn cca(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<CcaResult> {
    if x.is_empty() {
        return Err(Error::Empty("cca input"));
    }
    if x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    let (p, q) = (x[0].len(), y[0].len());
    if p == 0 || q == 0 {
        return Err(Error::Empty("cca columns"));
    }
    for row in x {
        if row.len() != p {
            return Err(Error::Dimension { expected: p, got: row.len() });
        }
    }
    for row in y {
        if row.len() != q {
            return Err(Error::Dimension { expected: q, got: row.len() });
        }
    }
    let n = x.len();
    if n <= p + q {
        return Err(Error::Invariant(format!("cca needs more than {} rows, got {n}", p + q)));
    }
    let xm = standardize(&DMatrix::from_fn(n, p, |i, j| x[i][j]));
    let ym = standardize(&DMatrix::from_fn(n, q, |i, j| y[i][j]));
    let wx = inverse_sqrt(covariance(&xm, &xm));
    let wy = inverse_sqrt(covariance(&ym, &ym));
    let k = &wx * covariance(&xm, &ym) * &wy;
    let svd = k.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let top = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > 1e-9 * top.max(1e-300)).count();
    if rank < p.min(q) {
        log::warn!("cca: whitened cross-covariance has rank {rank} < {}", p.min(q));
    }
    let mut result = CcaResult {
        correlations: Vec::new(),
        x_directions: Vec::new(),
        y_directions: Vec::new(),
        rank,
    };
    for &i in &order {
        result.correlations.push(svd.singular_values[i].clamp(0.0, 1.0));
        result.x_directions.push((&wx * u.column(i)).iter().copied().collect());
        result.y_directions.push((&wy * vt.row(i).transpose()).iter().copied().collect());
    }
    Ok(result)
}
