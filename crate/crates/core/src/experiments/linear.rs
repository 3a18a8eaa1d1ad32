//! Ridge-regularized least squares, solved through the normal equations.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Pivots below this fraction of the largest diagonal entry count as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Minimizes `|Xw + c - y|² + ridge |w|²`. The intercept is not penalized.
    pub fn fit(rows: &[f64], dim: usize, targets: &[f64], ridge: f64) -> Result<Self> {
        let n = targets.len();
        if dim == 0 || rows.len() != n * dim {
            return Err(Error::Dimension {
                expected: n * dim,
                actual: rows.len(),
            });
        }
        if n == 0 {
            return arg_err("no training rows");
        }
        if ridge < 0.0 {
            return arg_err("ridge term must be non-negative");
        }
        // augmented system over [w, c]
        let p = dim + 1;
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        let mut aug = vec![1.0; p];
        for (row, &t) in rows.chunks_exact(dim).zip(targets) {
            aug[..dim].copy_from_slice(row);
            for i in 0..p {
                let ai = aug[i];
                if ai == 0.0 {
                    continue;
                }
                rhs[i] += ai * t;
                for j in i..p {
                    gram[i * p + j] += ai * aug[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                gram[i * p + j] = gram[j * p + i];
            }
        }
        for i in 0..dim {
            gram[i * p + i] += ridge;
        }
        let solution = cholesky_solve(&mut gram, &mut rhs, p)?;
        Ok(Self {
            intercept: solution[dim],
            coef: solution[..dim].to_vec(),
        })
    }

    pub fn predict(&self, rows: &[f64]) -> Vec<f64> {
        rows.chunks_exact(self.coef.len())
            .map(|r| self.intercept + r.iter().zip(&self.coef).map(|(x, w)| x * w).sum::<f64>())
            .collect()
    }
}

/// Solves `a x = b` in place for symmetric positive definite `a`.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > PIVOT_TOLERANCE * scale) {
            return Err(Error::Numerical(format!(
                "normal equations are singular (pivot {d:e} at column {j}); add a ridge term"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b.to_vec())
}

/// Fits on the training rows and predicts the test rows.
pub fn linear_baseline(train_rows: &[f64], dim: usize, train_targets: &[f64], test_rows: &[f64], ridge: f64) -> Result<Vec<f64>> {
    Ok(LinearModel::fit(train_rows, dim, train_targets, ridge)?.predict(test_rows))
}
