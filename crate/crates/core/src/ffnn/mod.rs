//! Fully connected regression network with ReLU hidden layers and one linear
//! output unit, trained on the summed squared error.

mod gradcheck;
mod io;
mod linalg;
mod train;

pub use gradcheck::{check_gradients, GradCheckReport};
pub use io::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{sgd_step, train, EpochStats, History, Samples, TrainConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{arg_err, Error, Result};

/// Hidden widths used when none are given.
pub const DEFAULT_HIDDEN: [usize; 3] = [3000, 1000, 1000];

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    /// `weights[l]` is `dims[l] x dims[l + 1]`, row-major: entry `(i, j)`
    /// connects input `i` to unit `j`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped buffer: gradients and momentum state.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Momentum state of the optimizer.
pub type Velocity = Gradients;

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// All entries, layer by layer, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    fn scale(&mut self, k: f64) {
        self.iter_mut().for_each(|g| *g *= k);
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return arg_err("a network needs at least input and output widths");
    }
    if dims.contains(&0) {
        return arg_err(format!("layer widths must be positive: {dims:?}"));
    }
    if *dims.last().unwrap() != 1 {
        return arg_err("output width must be 1");
    }
    Ok(())
}

impl Mlp {
    /// He-initialized network: weights ~ N(0, 2 / fan_in), biases zero.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let std = (2.0 / pair[0] as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            weights.push((0..pair[0] * pair[1]).map(|_| normal.sample(&mut rng)).collect());
        }
        let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
        })
    }

    /// [`Mlp::init`] with the output bias set to the mean of `targets`, so
    /// training starts from the constant predictor.
    pub fn init_centered(dims: &[usize], seed: u64, targets: &[f64]) -> Result<Self> {
        let mut net = Self::init(dims, seed)?;
        if !targets.is_empty() {
            let mean = targets.iter().sum::<f64>() / targets.len() as f64;
            let last = net.num_layers() - 1;
            net.biases_mut(last).iter_mut().for_each(|b| *b = mean);
        }
        Ok(net)
    }

    /// Builds a network from explicit parameters.
    pub fn from_parts(dims: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        check_dims(&dims)?;
        if weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return arg_err("one weight matrix and bias vector per layer");
        }
        for (l, pair) in dims.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::Dimension {
                    expected: pair[0] * pair[1],
                    actual: weights[l].len(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::Dimension {
                    expected: pair[1],
                    actual: biases[l].len(),
                });
            }
        }
        if weights.iter().chain(&biases).flatten().any(|p| !p.is_finite()) {
            return Err(Error::Domain("non-finite parameter".into()));
        }
        Ok(Self { dims, weights, biases })
    }

    /// Layer widths `[input, hidden.., 1]`, with default hidden widths.
    pub fn default_dims(input: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(DEFAULT_HIDDEN);
        dims.push(1);
        dims
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Parameters in the same order as [`Gradients::iter`].
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    fn check_rows(&self, rows: &[f64]) -> Result<usize> {
        let d = self.dims[0];
        if !rows.len().is_multiple_of(d) {
            return Err(Error::Dimension {
                expected: d,
                actual: rows.len() % d,
            });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite input".into()));
        }
        Ok(rows.len() / d)
    }

    /// Output and the activations of every layer (input first, output last).
    pub fn forward(&self, x: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        if x.len() != self.dims[0] {
            return Err(Error::Dimension {
                expected: self.dims[0],
                actual: x.len(),
            });
        }
        self.check_rows(x)?;
        let acts = self.forward_batch(x, 1);
        Ok((acts.last().unwrap()[0], acts))
    }

    /// Activations of every layer for `n` row-major inputs.
    fn forward_batch(&self, rows: &[f64], n: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.dims.len());
        acts.push(rows.to_vec());
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let mut z = linalg::affine(&acts[l], n, fan_in, &self.weights[l], &self.biases[l], fan_out);
            if l + 1 < self.num_layers() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Forward outputs for row-major inputs, unclamped.
    pub fn predict(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let n = self.check_rows(rows)?;
        Ok(self.forward_batch(rows, n).pop().unwrap())
    }

    /// Summed squared error over the batch.
    pub fn loss(&self, rows: &[f64], targets: &[f64]) -> Result<f64> {
        let out = self.predict_targets(rows, targets)?;
        Ok(out.iter().zip(targets).map(|(o, t)| (o - t) * (o - t)).sum())
    }

    fn predict_targets(&self, rows: &[f64], targets: &[f64]) -> Result<Vec<f64>> {
        if targets.is_empty() {
            return arg_err("empty batch");
        }
        let out = self.predict(rows)?;
        if out.len() != targets.len() {
            return Err(Error::Dimension {
                expected: out.len(),
                actual: targets.len(),
            });
        }
        Ok(out)
    }

    /// Exact gradients of the summed squared error, with the batch loss.
    /// The ReLU derivative at zero is taken as zero.
    pub fn backward(&self, rows: &[f64], targets: &[f64]) -> Result<(Gradients, f64)> {
        if targets.is_empty() {
            return arg_err("empty batch");
        }
        let n = self.check_rows(rows)?;
        if n != targets.len() {
            return Err(Error::Dimension {
                expected: n,
                actual: targets.len(),
            });
        }
        let acts = self.forward_batch(rows, n);
        let out = acts.last().unwrap();
        let mut loss = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(targets)
            .map(|(o, t)| {
                loss += (o - t) * (o - t);
                2.0 * (o - t)
            })
            .collect();

        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            linalg::outer_accumulate(&acts[l], &delta, n, fan_in, fan_out, &mut grads.weights[l]);
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in grads.biases[l].iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let mut back = linalg::times_transpose(&delta, n, fan_out, &self.weights[l], fan_in);
                for (b, a) in back.iter_mut().zip(&acts[l]) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok((grads, loss))
    }

    /// Which hidden units are active for each sample, for gradient checking.
    pub(crate) fn relu_pattern(&self, rows: &[f64], n: usize) -> Vec<bool> {
        let acts = self.forward_batch(rows, n);
        acts[1..acts.len() - 1]
            .iter()
            .flat_map(|a| a.iter().map(|&v| v > 0.0))
            .collect()
    }
}
