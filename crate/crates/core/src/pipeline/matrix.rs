use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// Row-major feature rows sharing one block schema.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: Vec<(String, usize)>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn empty(schema: Vec<(String, usize)>) -> Self {
        let dim = schema.iter().map(|(_, n)| n).sum();
        Self {
            schema,
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows(schema: Vec<(String, usize)>, data: Vec<f64>) -> Result<Self> {
        let mut m = Self::empty(schema);
        if m.dim == 0 {
            return arg_err("schema has zero width");
        }
        if !data.len().is_multiple_of(m.dim) {
            return Err(Error::Dimension {
                expected: m.dim,
                actual: data.len() % m.dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        m.data = data;
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn schema(&self) -> &[(String, usize)] {
        &self.schema
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            schema: self.schema.clone(),
            dim: self.dim,
            data,
        }
    }
}

/// Per-column shift and scale. Columns without variance get shift 0 and
/// scale 1, so they pass through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits population mean and standard deviation; needs two rows.
    pub fn fit(matrix: &FeatureMatrix) -> Result<Self> {
        let n = matrix.n_rows();
        if n < 2 {
            return arg_err(format!("standardization needs at least 2 rows, got {n}"));
        }
        let d = matrix.dim();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(matrix.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(matrix.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
        for (m, s) in mean.iter_mut().zip(std.iter_mut()) {
            if *s <= 1e-12 * m.abs().max(1.0) {
                *m = 0.0;
                *s = 1.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.dim() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: matrix.dim(),
            });
        }
        let data = matrix
            .data()
            .chunks_exact(matrix.dim())
            .flat_map(|r| self.transform_row(r))
            .collect();
        FeatureMatrix::from_rows(matrix.schema().to_vec(), data)
    }

    pub fn inverse(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let data = matrix
            .data()
            .chunks_exact(matrix.dim())
            .flat_map(|r| {
                r.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(v, (m, s))| v * s + m)
                    .collect::<Vec<_>>()
            })
            .collect();
        FeatureMatrix::from_rows(matrix.schema().to_vec(), data)
    }
}

/// Fits a [`Standardizer`] and applies it to the same rows.
pub fn standardize(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, Standardizer)> {
    let s = Standardizer::fit(matrix)?;
    Ok((s.transform(matrix)?, s))
}
