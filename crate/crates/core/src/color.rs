//! Global color statistics: channel means, HSV histogram peaks, basic-color
//! composition, and brightness/saturation derived pleasure-arousal-dominance.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::imaging::{rgb_to_hsv, HsvPixel, ImageRgb};

/// Number of values in a [`ColorFeatures`] block.
pub const COLOR_DIM: usize = 3 + 3 + 6 + 11 + 3;

/// Names of the basic colors, in output order.
pub const BASIC_COLOR_NAMES: [&str; 11] = [
    "black", "blue", "brown", "grey", "green", "orange", "pink", "purple", "red", "white",
    "yellow",
];

/// RGB prototypes matched by nearest Euclidean distance. Part of the feature
/// interface: changing a value changes every extracted block.
pub const BASIC_COLOR_PROTOTYPES: [[f64; 3]; 11] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.55, 0.27, 0.07],
    [0.5, 0.5, 0.5],
    [0.0, 0.75, 0.0],
    [1.0, 0.55, 0.0],
    [1.0, 0.6, 0.8],
    [0.5, 0.0, 0.5],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 1.0],
    [1.0, 1.0, 0.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorConfig {
    /// Histogram bin counts for the H, S and V channels.
    pub hsv_bins: (usize, usize, usize),
}

impl Default for ColorConfig {
    fn default() -> Self {
        Self { hsv_bins: (16, 8, 8) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorFeatures {
    pub mean_rgb: [f64; 3],
    /// Hue scaled to `[0, 1)` by `/ 360`.
    pub mean_hsv: [f64; 3],
    /// `(argmax / bins, mass)` for H, S, V in turn.
    pub hsv_peak: [f64; 6],
    pub basic_colors: [f64; 11],
    /// Pleasure, arousal, dominance.
    pub pad: [f64; 3],
}

impl ColorFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(COLOR_DIM);
        out.extend_from_slice(&self.mean_rgb);
        out.extend_from_slice(&self.mean_hsv);
        out.extend_from_slice(&self.hsv_peak);
        out.extend_from_slice(&self.basic_colors);
        out.extend_from_slice(&self.pad);
        out
    }
}

fn hsv_pixels(img: &ImageRgb) -> impl Iterator<Item = HsvPixel> + '_ {
    img.pixels().iter().map(|&p| rgb_to_hsv(p))
}

/// Mean RGB and mean HSV. Hue is averaged on the circle; a vanishing resultant
/// yields hue 0.
pub fn mean_colors(img: &ImageRgb) -> Result<([f64; 3], [f64; 3])> {
    if img.is_empty() {
        return arg_err("mean of an empty image");
    }
    let n = img.pixels().len() as f64;
    let mut rgb = [0.0; 3];
    for p in img.pixels() {
        for c in 0..3 {
            rgb[c] += p[c];
        }
    }
    let (mut cos, mut sin, mut s, mut v) = (0.0, 0.0, 0.0, 0.0);
    for p in hsv_pixels(img) {
        let rad = p.h.to_radians();
        cos += rad.cos();
        sin += rad.sin();
        s += p.s;
        v += p.v;
    }
    let hue = if (cos * cos + sin * sin).sqrt() / n < 1e-9 {
        0.0
    } else {
        sin.atan2(cos).to_degrees().rem_euclid(360.0) / 360.0
    };
    // rem_euclid can round up to exactly 360
    let hue = if hue >= 1.0 { 0.0 } else { hue };
    Ok((rgb.map(|c| c / n), [hue, s / n, v / n]))
}

fn bin_of(value: f64, bins: usize) -> usize {
    ((value * bins as f64) as usize).min(bins - 1)
}

fn peak(hist: &[usize], total: usize) -> (f64, f64) {
    let mut best = 0;
    for (i, &count) in hist.iter().enumerate() {
        if count > hist[best] {
            best = i;
        }
    }
    (
        best as f64 / hist.len() as f64,
        hist[best] as f64 / total as f64,
    )
}

/// Per-channel HSV histogram peaks. Ties go to the lowest bin.
pub fn hsv_peak(img: &ImageRgb, bins: (usize, usize, usize)) -> Result<[f64; 6]> {
    let (nh, ns, nv) = bins;
    if nh == 0 || ns == 0 || nv == 0 {
        return arg_err(format!("histogram bin counts must be >= 1, got {bins:?}"));
    }
    if img.is_empty() {
        return arg_err("histogram of an empty image");
    }
    let mut h = vec![0usize; nh];
    let mut s = vec![0usize; ns];
    let mut v = vec![0usize; nv];
    for p in hsv_pixels(img) {
        h[bin_of(p.h / 360.0, nh)] += 1;
        s[bin_of(p.s, ns)] += 1;
        v[bin_of(p.v, nv)] += 1;
    }
    let total = img.pixels().len();
    let (hi, hm) = peak(&h, total);
    let (si, sm) = peak(&s, total);
    let (vi, vm) = peak(&v, total);
    Ok([hi, hm, si, sm, vi, vm])
}

/// Index into [`BASIC_COLOR_NAMES`] of the prototype nearest to `rgb`.
pub fn nearest_basic_color(rgb: [f64; 3]) -> usize {
    let dist = |p: &[f64; 3]| -> f64 { (0..3).map(|c| (p[c] - rgb[c]).powi(2)).sum() };
    let mut best = 0;
    let mut best_d = dist(&BASIC_COLOR_PROTOTYPES[0]);
    for (i, proto) in BASIC_COLOR_PROTOTYPES.iter().enumerate().skip(1) {
        let d = dist(proto);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Fraction of pixels assigned to each basic color. All zeros for an empty image.
pub fn basic_color_composition(img: &ImageRgb) -> [f64; 11] {
    let mut counts = [0usize; 11];
    for &p in img.pixels() {
        counts[nearest_basic_color(p)] += 1;
    }
    let n = img.pixels().len().max(1) as f64;
    counts.map(|c| c as f64 / n)
}

/// Pleasure, arousal and dominance from mean brightness `y` and saturation `s`.
pub fn pad_from_ys(y: f64, s: f64) -> [f64; 3] {
    [
        0.69 * y + 0.22 * s,
        0.31 * y + 0.60 * s,
        0.76 * y + 0.32 * s,
    ]
}

/// [`pad_from_ys`] with `y` the mean HSV value and `s` the mean HSV saturation.
pub fn pad_scores(img: &ImageRgb) -> [f64; 3] {
    if img.is_empty() {
        return [0.0; 3];
    }
    let n = img.pixels().len() as f64;
    let (s, v) = hsv_pixels(img).fold((0.0, 0.0), |(s, v), p| (s + p.s, v + p.v));
    pad_from_ys(v / n, s / n)
}

pub fn color_block(img: &ImageRgb, config: &ColorConfig) -> Result<ColorFeatures> {
    let (mean_rgb, mean_hsv) = mean_colors(img)?;
    Ok(ColorFeatures {
        mean_rgb,
        mean_hsv,
        hsv_peak: hsv_peak(img, config.hsv_bins)?,
        basic_colors: basic_color_composition(img),
        pad: pad_scores(img),
    })
}
