//! Raster types and the conversions every feature extractor builds on.
//!
//! Channels are stored as `f64` in `[0, 1]`; 8-bit inputs are mapped with `c / 255`.

use image::ImageFormat;

use crate::error::{arg_err, Error, Result};

/// Row-major RGB image with normalized channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<[f64; 3]>,
}

impl ImageRgb {
    pub fn new(width: usize, height: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(bad) = data
            .iter()
            .flatten()
            .find(|c| !(0.0..=1.0).contains(*c))
        {
            return Err(Error::Domain(format!("channel value {bad} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with one color.
    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Row-major single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Applies `f` to every pixel.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Hexcone HSV. Hue in degrees `[0, 360)`, zero for achromatic pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Decodes a PNG or JPEG stream.
pub fn decode(bytes: &[u8]) -> Result<ImageRgb> {
    let format = image::guess_format(bytes).map_err(|e| Error::Decode(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(Error::Decode(format!("unsupported format {format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Decode(e.to_string()))?
        .to_rgb8();
    let (w, h) = decoded.dimensions();
    let data = decoded
        .pixels()
        .map(|p| p.0.map(|c| f64::from(c) / 255.0))
        .collect();
    ImageRgb::new(w as usize, h as usize, data)
}

/// Reads and decodes an image file.
pub fn open(path: impl AsRef<std::path::Path>) -> Result<ImageRgb> {
    decode(&std::fs::read(path)?)
}

/// BT.601 luma.
pub fn to_gray(img: &ImageRgb) -> ImageGray {
    let data = img
        .data
        .iter()
        .map(|&[r, g, b]| luma(r, g, b))
        .collect();
    ImageGray {
        width: img.width,
        height: img.height,
        data,
    }
}

#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    // clamp absorbs the last-ulp overshoot of the weighted sum
    (0.299 * r + 0.587 * g + 0.114 * b).clamp(r.min(g).min(b), r.max(g).max(b))
}

pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> HsvPixel {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let s = if max == 0.0 { 0.0 } else { chroma / max };
    let h = if chroma == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / chroma + 2.0)
    } else {
        60.0 * ((r - g) / chroma + 4.0)
    };
    let h = if h >= 360.0 { h - 360.0 } else { h };
    HsvPixel { h, s, v: max }
}

pub fn hsv_to_rgb(p: HsvPixel) -> [f64; 3] {
    let c = p.v * p.s;
    let hp = p.h / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = p.v - c;
    [r + m, g + m, b + m]
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &ImageGray, width: usize, height: usize) -> Result<ImageGray> {
    if width == 0 || height == 0 {
        return arg_err(format!("target size {width}x{height} has a zero dimension"));
    }
    if img.width == 0 || img.height == 0 {
        return arg_err("cannot resize an empty image");
    }
    if img.width == width && img.height == height {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, width);
    let ys = sample_positions(img.height, height);
    let mut data = Vec::with_capacity(width * height);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    ImageGray::new(width, height, data)
}

fn sample_positions(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}
