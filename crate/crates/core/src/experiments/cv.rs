use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use super::linear::LinearModel;
use super::stats::mean_squared_error;
use crate::error::{Error, Result};
use crate::ffnn::{train, Mlp, Samples, TrainConfig};
use crate::pipeline::{Axis, Extractor, FeatureMatrix, Manifest, Selection, Standardizer};

/// Model fitted inside each fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Learner {
    Ffnn { hidden: Vec<usize>, train: TrainConfig },
    Linear { ridge: f64 },
}

impl Learner {
    fn name(&self) -> &'static str {
        match self {
            Learner::Ffnn { .. } => "ffnn",
            Learner::Linear { .. } => "linear",
        }
    }

    /// Fits on `train` and predicts `train` and `test` rows.
    fn fit_predict(&self, train_set: &Samples, test: &Samples, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Learner::Ffnn { hidden, train: cfg } => {
                let mut dims = vec![train_set.dim];
                dims.extend(hidden);
                dims.push(1);
                let cfg = TrainConfig { seed, ..cfg.clone() };
                let net = Mlp::init_centered(&dims, seed, &train_set.targets)?;
                let (net, _) = train(net, train_set, &cfg)?;
                Ok((net.predict(&train_set.rows)?, net.predict(&test.rows)?))
            }
            Learner::Linear { ridge } => {
                let model = LinearModel::fit(&train_set.rows, train_set.dim, &train_set.targets, *ridge)?;
                Ok((model.predict(&train_set.rows), model.predict(&test.rows)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Standardize columns with statistics of each fold's training rows.
    pub standardize: bool,
    pub learner: Learner,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            standardize: true,
            learner: Learner::Ffnn {
                hidden: crate::ffnn::DEFAULT_HIDDEN.to_vec(),
                train: TrainConfig::default(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Per-sample mean squared errors.
    pub train_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub axis: Option<Axis>,
    pub selection: Option<String>,
    pub learner: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub avg_train_mse: f64,
    pub avg_test_mse: f64,
}

fn to_samples(matrix: &FeatureMatrix, targets: &[f64], idx: &[usize]) -> Result<Samples> {
    let m = matrix.select_rows(idx);
    Samples::new(m.dim(), m.into_data(), idx.iter().map(|&i| targets[i]).collect())
}

/// Cross-validates on a prepared matrix; `plan` is built over its rows.
pub fn run_cv_samples(matrix: &FeatureMatrix, targets: &[f64], plan: &FoldPlan, options: &CvOptions) -> Result<CvReport> {
    if targets.len() != matrix.n_rows() || plan.ids.len() != matrix.n_rows() {
        return Err(Error::Dimension {
            expected: matrix.n_rows(),
            actual: targets.len(),
        });
    }
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|f| -> Result<FoldResult> {
            let train_idx = plan.train_indices(f);
            let test_idx = plan.test_indices(f);
            let scaled = if options.standardize {
                Standardizer::fit(&matrix.select_rows(&train_idx))?.transform(matrix)?
            } else {
                matrix.clone()
            };
            let train_set = to_samples(&scaled, targets, &train_idx)?;
            let test_set = to_samples(&scaled, targets, &test_idx)?;
            let seed = options.seed.wrapping_mul(1_000_003).wrapping_add(f as u64);
            let (train_pred, test_pred) = options.learner.fit_predict(&train_set, &test_set, seed)?;
            Ok(FoldResult {
                fold: f,
                n_train: train_idx.len(),
                n_test: test_idx.len(),
                train_mse: mean_squared_error(&train_pred, &train_set.targets),
                test_mse: mean_squared_error(&test_pred, &test_set.targets),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = folds.len() as f64;
    Ok(CvReport {
        axis: None,
        selection: None,
        learner: options.learner.name().to_string(),
        k: plan.k,
        seed: options.seed,
        avg_train_mse: folds.iter().map(|f| f.train_mse).sum::<f64>() / k,
        avg_test_mse: folds.iter().map(|f| f.test_mse).sum::<f64>() / k,
        folds,
    })
}

/// Assembles features for every record and cross-validates on `axis`.
pub fn run_cv(manifest: &Manifest, extractor: &Extractor, selection: &Selection, axis: Axis, options: &CvOptions, jobs: usize) -> Result<CvReport> {
    let targets = manifest.targets(axis)?;
    let (matrix, failures) = extractor.build_matrix(manifest, selection, jobs)?;
    if let Some(first) = failures.into_iter().next() {
        return Err(Error::Data(format!("record {:?}: {}", first.id, first.error)));
    }
    let plan = make_folds(&manifest.ids(), options.k, options.seed)?;
    let mut report = run_cv_samples(&matrix, &targets, &plan, options)?;
    report.axis = Some(axis);
    report.selection = Some(selection.to_string());
    Ok(report)
}
