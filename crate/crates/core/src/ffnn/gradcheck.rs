//! Central finite-difference check of [`Mlp::backward`].

use super::Mlp;
use crate::error::Result;

/// Gradients smaller than this are compared in absolute terms.
const MAGNITUDE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub n_params: usize,
    /// Parameters whose step was shrunk because `±h` crossed a ReLU boundary.
    pub n_kinks: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-3)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Compares analytic gradients with `(L(θ+h) - L(θ-h)) / 2h` for every
/// parameter. When a step would flip a ReLU unit the loss is not smooth over
/// `[θ-h, θ+h]`, so `h` is divided by ten until the activation pattern holds.
pub fn check_gradients(net: &Mlp, rows: &[f64], targets: &[f64], h: f64) -> Result<GradCheckReport> {
    let (grads, _) = net.backward(rows, targets)?;
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let n = targets.len();
    let pattern = net.relu_pattern(rows, n);

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    let mut kinks = 0;
    for (k, &a) in analytic.iter().enumerate() {
        let original = *probe.params().nth(k).unwrap();
        let mut step = h;
        let numeric = loop {
            *probe.params_mut().nth(k).unwrap() = original + step;
            let plus_ok = probe.relu_pattern(rows, n) == pattern;
            let plus = probe.loss(rows, targets)?;
            *probe.params_mut().nth(k).unwrap() = original - step;
            let minus_ok = probe.relu_pattern(rows, n) == pattern;
            let minus = probe.loss(rows, targets)?;
            if (plus_ok && minus_ok) || step < h * 1e-6 {
                break (plus - minus) / (2.0 * step);
            }
            step /= 10.0;
        };
        if step != h {
            kinks += 1;
        }
        *probe.params_mut().nth(k).unwrap() = original;
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(GradCheckReport {
        max_relative_error: worst,
        n_params: analytic.len(),
        n_kinks: kinks,
    })
}
