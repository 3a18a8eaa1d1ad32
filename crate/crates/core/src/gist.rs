//! GIST scene descriptor: energies of a 4-scale, 8-orientation band-pass bank
//! averaged over a 4x4 spatial grid (32 x 16 = 512 values).
//!
//! Filtering is done in the frequency domain and therefore has circular
//! convolution semantics. No contrast-normalization prefilter is applied.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{arg_err, Result};
use crate::imaging::{resize_bilinear, ImageGray};

pub const SCALES: usize = 4;
pub const ORIENTATIONS: usize = 8;
pub const GRID: usize = 4;
pub const GIST_DIM: usize = SCALES * ORIENTATIONS * GRID * GRID;
pub const DEFAULT_RESOLUTION: usize = 128;

/// Center frequency of the finest scale, in cycles per pixel. Each coarser
/// scale halves it.
const FINEST_FREQUENCY: f64 = 0.25;
/// `sigma / f0` of the log-Gaussian radial profile.
const RADIAL_BANDWIDTH: f64 = 0.55;
/// Angular standard deviation in radians.
const ANGULAR_SIGMA: f64 = PI / 12.0;

/// Frequency-domain filter bank at a fixed square resolution.
#[derive(Clone)]
pub struct GaborBank {
    n: usize,
    filters: Vec<Vec<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GaborBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaborBank")
            .field("n", &self.n)
            .field("filters", &self.filters.len())
            .finish()
    }
}

/// Signed frequency (cycles/pixel) of DFT index `k` on an `n`-point grid.
pub fn frequency(k: usize, n: usize) -> f64 {
    let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64
}

/// Orientation of filter `o`, in radians.
pub fn orientation_angle(o: usize) -> f64 {
    o as f64 * PI / ORIENTATIONS as f64
}

/// Builds the bank at resolution `n` (a power of two, at least 16).
pub fn build_gabor_bank(n: usize) -> Result<GaborBank> {
    if n < 16 || !n.is_power_of_two() {
        return arg_err(format!("bank resolution must be a power of two >= 16, got {n}"));
    }
    let log_bw = RADIAL_BANDWIDTH.ln();
    let mut filters = Vec::with_capacity(SCALES * ORIENTATIONS);
    for scale in 0..SCALES {
        let f0 = FINEST_FREQUENCY / f64::powi(2.0, scale as i32);
        for o in 0..ORIENTATIONS {
            let theta = orientation_angle(o);
            let mut filter = vec![0.0; n * n];
            for v in 0..n {
                let fy = frequency(v, n);
                for u in 0..n {
                    let fx = frequency(u, n);
                    let radius = fx.hypot(fy);
                    if radius == 0.0 {
                        continue;
                    }
                    let radial = (-(radius / f0).ln().powi(2) / (2.0 * log_bw * log_bw)).exp();
                    let dtheta = (fy.atan2(fx) - theta + PI).rem_euclid(2.0 * PI) - PI;
                    let angular = (-dtheta * dtheta / (2.0 * ANGULAR_SIGMA * ANGULAR_SIGMA)).exp();
                    filter[v * n + u] = radial * angular;
                }
            }
            filters.push(filter);
        }
    }
    let mut planner = FftPlanner::new();
    Ok(GaborBank {
        n,
        filters,
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    })
}

impl GaborBank {
    pub fn resolution(&self) -> usize {
        self.n
    }

    /// Transfer functions, scale-major then orientation, each `n * n` row-major
    /// over (vertical, horizontal) DFT indices.
    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    fn fft2(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.n;
        fft.process(data);
        transpose(data, n);
        fft.process(data);
        transpose(data, n);
    }

    /// Magnitude of every filtered image. `img` must already be `n x n`.
    pub fn responses(&self, img: &ImageGray) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        if img.width() != n || img.height() != n {
            return arg_err(format!(
                "bank expects {n}x{n} input, got {}x{}",
                img.width(),
                img.height()
            ));
        }
        let mut spectrum: Vec<Complex64> =
            img.pixels().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut spectrum, self.forward.as_ref());
        let norm = 1.0 / (n * n) as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        Ok(self
            .filters
            .iter()
            .map(|filter| {
                for ((b, s), g) in buf.iter_mut().zip(&spectrum).zip(filter) {
                    *b = s * g;
                }
                self.fft2(&mut buf, self.inverse.as_ref());
                buf.iter().map(|c| c.norm() * norm).collect()
            })
            .collect())
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Means of an `n x n` map over a `GRID x GRID` partition, row-major.
pub fn grid_means(map: &[f64], n: usize) -> [f64; GRID * GRID] {
    let cell = n / GRID;
    let mut out = [0.0; GRID * GRID];
    for (idx, slot) in out.iter_mut().enumerate() {
        let (gy, gx) = (idx / GRID, idx % GRID);
        let mut sum = 0.0;
        for y in gy * cell..(gy + 1) * cell {
            sum += map[y * n + gx * cell..y * n + (gx + 1) * cell].iter().sum::<f64>();
        }
        *slot = sum / (cell * cell) as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GistDescriptor {
    pub values: Vec<f64>,
}

/// Resizes `img` to the bank resolution and returns the 512-value descriptor,
/// filter-major then grid cell.
pub fn gist(img: &ImageGray, bank: &GaborBank) -> Result<GistDescriptor> {
    let n = bank.resolution();
    let resized = resize_bilinear(img, n, n)?;
    let values = bank
        .responses(&resized)?
        .iter()
        .flat_map(|map| grid_means(map, n))
        .collect();
    Ok(GistDescriptor { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_shape_and_dc() {
        let bank = build_gabor_bank(64).unwrap();
        assert_eq!(bank.filters().len(), 32);
        for f in bank.filters() {
            assert_eq!(f.len(), 64 * 64);
            assert_eq!(f[0], 0.0);
            assert!(f.iter().all(|&g| g >= 0.0 && g.is_finite()));
        }
    }

    #[test]
    fn bank_rejects_bad_resolution() {
        assert!(build_gabor_bank(48).is_err());
        assert!(build_gabor_bank(8).is_err());
    }

    #[test]
    fn orthogonal_orientation_peaks() {
        let n = 64;
        let bank = build_gabor_bank(n).unwrap();
        for scale in 0..SCALES {
            for o in 0..4 {
                let peak_angle = |f: &[f64]| {
                    let (i, _) = f
                        .iter()
                        .enumerate()
                        .fold((0, f64::MIN), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
                    frequency(i / n, n).atan2(frequency(i % n, n))
                };
                let a = peak_angle(&bank.filters()[scale * 8 + o]);
                let b = peak_angle(&bank.filters()[scale * 8 + o + 4]);
                let diff = (b - a).rem_euclid(2.0 * PI);
                // discrete grid: the peak bin sits within a few degrees of the axis
                assert!((diff - PI / 2.0).abs() < 0.2, "scale {scale} o {o}: {diff}");
            }
        }
    }

    #[test]
    fn gist_length_and_constant_image() {
        let bank = build_gabor_bank(32).unwrap();
        let img = ImageGray::new(20, 30, vec![0.7; 600]).unwrap();
        let d = gist(&img, &bank).unwrap();
        assert_eq!(d.values.len(), GIST_DIM);
        let norm = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "{norm}");
    }
}
