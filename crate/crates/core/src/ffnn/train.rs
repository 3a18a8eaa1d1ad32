use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp, Velocity};
use crate::error::{arg_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Clamped to the number of training rows.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement larger than
    /// `min_improvement` before training stops.
    pub patience: usize,
    pub min_improvement: f64,
    /// Share of the training rows held out for early stopping. Zero disables
    /// early stopping and returns the last epoch's parameters.
    pub validation_fraction: f64,
    /// Divide the batch gradient by the batch size.
    pub average_loss: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.0001,
            momentum: 0.9,
            batch_size: 1000,
            max_epochs: 1000,
            patience: 20,
            min_improvement: 1e-6,
            validation_fraction: 0.1,
            average_loss: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return arg_err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return arg_err(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return arg_err("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return arg_err("validation fraction must be in [0, 1)");
        }
        Ok(())
    }
}

/// Row-major inputs with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub dim: usize,
    pub rows: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Samples {
    pub fn new(dim: usize, rows: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 || rows.len() != dim * targets.len() {
            return Err(Error::Dimension {
                expected: dim * targets.len(),
                actual: rows.len(),
            });
        }
        Ok(Self { dim, rows, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut rows = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            rows.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            rows,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Per-sample mean squared error after the epoch.
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

/// Classical momentum update: `v = momentum * v - lr * grad`, `θ += v`.
pub fn sgd_step(net: &mut Mlp, velocity: &mut Velocity, grads: &Gradients, lr: f64, momentum: f64) {
    for ((p, v), g) in net.params_mut().zip(velocity.iter_mut()).zip(grads.iter()) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
}

fn mse(net: &Mlp, data: &Samples) -> Result<f64> {
    Ok(net.loss(&data.rows, &data.targets)? / data.len() as f64)
}

/// Mini-batch SGD with momentum and early stopping on a held-out share of
/// `data`. Returns the parameters of the best validation epoch.
pub fn train(mut net: Mlp, data: &Samples, config: &TrainConfig) -> Result<(Mlp, History)> {
    config.validate()?;
    if data.is_empty() {
        return arg_err("no training rows");
    }
    if data.dim != net.input_dim() {
        return Err(Error::Dimension {
            expected: net.input_dim(),
            actual: data.dim,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if data.len() >= 2 {
        ((data.len() as f64 * config.validation_fraction).ceil() as usize).min(data.len() - 1)
    } else {
        0
    };
    let validation = (n_val > 0).then(|| data.subset(&order[..n_val]));
    let mut train_idx = order[n_val..].to_vec();
    train_idx.sort_unstable();
    let train_set = data.subset(&train_idx);

    let batch = config.batch_size.min(train_set.len());
    let mut velocity = Velocity::zeros_like(&net);
    let mut history = History::default();
    let mut best: Option<(f64, Mlp)> = None;
    let mut stale = 0;
    let mut perm: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.max_epochs {
        perm.shuffle(&mut rng);
        for (step, chunk) in perm.chunks(batch).enumerate() {
            let mb = train_set.subset(chunk);
            let (mut grads, loss) = net.backward(&mb.rows, &mb.targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step });
            }
            if config.average_loss {
                grads.scale(1.0 / chunk.len() as f64);
            }
            sgd_step(&mut net, &mut velocity, &grads, config.learning_rate, config.momentum);
        }
        let train_mse = mse(&net, &train_set)?;
        if !train_mse.is_finite() || net.params().any(|p| !p.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                step: train_set.len().div_ceil(batch),
            });
        }
        let validation_mse = validation.as_ref().map(|v| mse(&net, v)).transpose()?;
        history.epochs.push(EpochStats {
            epoch,
            train_mse,
            validation_mse,
        });
        match validation_mse {
            Some(val) => {
                let improved = best
                    .as_ref()
                    .is_none_or(|(b, _)| val < b - config.min_improvement);
                if improved {
                    best = Some((val, net.clone()));
                    history.best_epoch = epoch;
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= config.patience {
                        break;
                    }
                }
            }
            None => history.best_epoch = epoch,
        }
    }
    Ok((best.map_or(net, |(_, n)| n), history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data(n: usize, dim: usize, seed: u64) -> Samples {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let targets = rows
            .chunks(dim)
            .map(|r| 5.0 + r.iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>())
            .collect();
        Samples::new(dim, rows, targets).unwrap()
    }

    #[test]
    fn plain_sgd_step_is_exact() {
        let data = linear_data(16, 3, 1);
        let net = Mlp::init(&[3, 4, 1], 2).unwrap();
        let (grads, _) = net.backward(&data.rows, &data.targets).unwrap();
        let mut stepped = net.clone();
        let mut v = Velocity::zeros_like(&net);
        sgd_step(&mut stepped, &mut v, &grads, 0.01, 0.0);
        for ((p, q), g) in net.params().zip(stepped.params()).zip(grads.iter()) {
            assert_eq!((p - 0.01 * g).to_bits(), q.to_bits());
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { momentum: 1.0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        let d = TrainConfig::default();
        assert_eq!((d.learning_rate, d.momentum, d.batch_size), (0.0001, 0.9, 1000));
    }

    #[test]
    fn fits_linear_target() {
        let data = linear_data(200, 4, 3);
        let net = Mlp::init(&[4, 16, 1], 5).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.002,
            batch_size: 20,
            max_epochs: 300,
            patience: 300,
            seed: 1,
            ..Default::default()
        };
        let (trained, history) = train(net, &data, &cfg).unwrap();
        let final_mse = trained.loss(&data.rows, &data.targets).unwrap() / 200.0;
        assert!(final_mse < 1e-2, "{final_mse}");
        assert!(history.epochs.len() <= 300);
    }

    #[test]
    fn deterministic_history() {
        let data = linear_data(50, 3, 4);
        let cfg = TrainConfig {
            learning_rate: 0.001,
            batch_size: 8,
            max_epochs: 20,
            seed: 7,
            ..Default::default()
        };
        let a = train(Mlp::init(&[3, 5, 1], 1).unwrap(), &data, &cfg).unwrap();
        let b = train(Mlp::init(&[3, 5, 1], 1).unwrap(), &data, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_learning_rate_barely_moves() {
        let data = linear_data(30, 3, 5);
        let net = Mlp::init(&[3, 5, 1], 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-12,
            momentum: 0.0,
            batch_size: 30,
            max_epochs: 3,
            validation_fraction: 0.0,
            ..Default::default()
        };
        let (trained, _) = train(net.clone(), &data, &cfg).unwrap();
        let (g, _) = net.backward(&data.rows, &data.targets).unwrap();
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in net.params().zip(trained.params()) {
            assert!((a - b).abs() <= 1e-12 * gmax * 3.0 * 1.5 + 1e-15);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let data = linear_data(40, 3, 6);
        let cfg = TrainConfig {
            learning_rate: 10.0,
            momentum: 0.5,
            batch_size: 40,
            max_epochs: 200,
            validation_fraction: 0.0,
            ..Default::default()
        };
        let err = train(Mlp::init(&[3, 8, 1], 1).unwrap(), &data, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }
}
