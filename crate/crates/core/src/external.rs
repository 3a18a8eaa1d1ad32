//! Externally computed high-level features: classifier probability vectors and
//! scene-parsing label maps.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{ColorType, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

pub const OBJECT_DIM: usize = 1000;
pub const SEMANTIC_DIM: usize = 150;
const OBJECT_SUM_TOLERANCE: f64 = 1e-3;

/// Model that produced an object-probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectSource {
    Alexnet,
    Vgg16,
    Resnet,
    Other,
}

impl fmt::Display for ObjectSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Alexnet => "alexnet",
            Self::Vgg16 => "vgg16",
            Self::Resnet => "resnet",
            Self::Other => "other",
        })
    }
}

impl FromStr for ObjectSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alexnet" => Ok(Self::Alexnet),
            "vgg16" => Ok(Self::Vgg16),
            "resnet" => Ok(Self::Resnet),
            "other" => Ok(Self::Other),
            _ => arg_err(format!("unknown object source {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFeature {
    pub probs: Vec<f64>,
    pub source: ObjectSource,
}

impl ObjectFeature {
    /// Validates a post-softmax probability vector.
    pub fn new(probs: Vec<f64>, source: ObjectSource) -> Result<Self> {
        if probs.len() != OBJECT_DIM {
            return Err(Error::Dimension {
                expected: OBJECT_DIM,
                actual: probs.len(),
            });
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::Domain(format!("object probability {i} is {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > OBJECT_SUM_TOLERANCE {
            return Err(Error::Normalization { sum });
        }
        Ok(Self { probs, source })
    }
}

pub fn parse_object_feature(text: &str, source: ObjectSource) -> Result<ObjectFeature> {
    let probs = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::Format(format!("bad object probability {tok:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ObjectFeature::new(probs, source)
}

pub fn load_object_feature(path: impl AsRef<Path>, source: ObjectSource) -> Result<ObjectFeature> {
    parse_object_feature(&std::fs::read_to_string(path)?, source)
}

/// Writes one value per line using the shortest round-tripping representation.
pub fn save_object_feature(feature: &ObjectFeature, path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::with_capacity(feature.probs.len() * 8);
    for p in &feature.probs {
        text.push_str(&format!("{p:?}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-pixel scene category indices in `0..150`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMap {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= SEMANTIC_DIM) {
            return Err(Error::Domain(format!(
                "semantic label {bad} outside 0..{SEMANTIC_DIM}"
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// Decodes an 8-bit single-channel PNG or PGM label map.
pub fn decode_semantic_map(bytes: &[u8]) -> Result<SemanticMap> {
    let format = image::guess_format(bytes).map_err(|e| Error::Format(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(Error::Format(format!(
            "semantic map must be PNG or PGM, got {format:?}"
        )));
    }
    let img = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Format(e.to_string()))?;
    if img.color() != ColorType::L8 {
        return Err(Error::Format(format!(
            "semantic map must be 8-bit single channel, got {:?}",
            img.color()
        )));
    }
    let gray = img.into_luma8();
    let (w, h) = gray.dimensions();
    SemanticMap::new(w as usize, h as usize, gray.into_raw())
}

pub fn load_semantic_map(path: impl AsRef<Path>) -> Result<SemanticMap> {
    decode_semantic_map(&std::fs::read(path)?)
}

/// Writes the map as a grayscale PNG.
pub fn save_semantic_map(map: &SemanticMap, path: impl AsRef<Path>) -> Result<()> {
    image::GrayImage::from_raw(map.width as u32, map.height as u32, map.labels.clone())
        .expect("dimensions checked at construction")
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticFeature {
    pub coverage: [f64; SEMANTIC_DIM],
}

/// Fraction of pixels carrying each category.
pub fn semantic_histogram(map: &SemanticMap) -> Result<SemanticFeature> {
    if map.labels.is_empty() {
        return arg_err("semantic map has no pixels");
    }
    let mut counts = [0usize; SEMANTIC_DIM];
    for &l in &map.labels {
        counts[l as usize] += 1;
    }
    let n = map.labels.len() as f64;
    Ok(SemanticFeature {
        coverage: counts.map(|c| c as f64 / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot_text(len: usize, at: usize) -> String {
        (0..len)
            .map(|i| if i == at { "1.0" } else { "0" })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn object_one_hot_loads() {
        let f = parse_object_feature(&one_hot_text(1000, 17), ObjectSource::Vgg16).unwrap();
        assert_eq!(f.probs[17], 1.0);
    }

    #[test]
    fn object_errors() {
        assert!(matches!(
            parse_object_feature(&one_hot_text(999, 3), ObjectSource::Other),
            Err(Error::Dimension { expected: 1000, actual: 999 })
        ));
        let half = vec!["0.0005"; 1000].join(" ");
        assert!(matches!(
            parse_object_feature(&half, ObjectSource::Other),
            Err(Error::Normalization { .. })
        ));
        let mut neg = vec!["0"; 1000];
        neg[0] = "1.1";
        neg[1] = "-0.1";
        assert!(matches!(
            parse_object_feature(&neg.join(" "), ObjectSource::Other),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            parse_object_feature("abc", ObjectSource::Other),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn object_one_hot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obj.txt");
        let f = parse_object_feature(&one_hot_text(1000, 999), ObjectSource::Resnet).unwrap();
        save_object_feature(&f, &path).unwrap();
        let back = load_object_feature(&path, ObjectSource::Resnet).unwrap();
        assert_eq!(
            f.probs.iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            back.probs.iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn histogram_basic_cases() {
        let h = semantic_histogram(&SemanticMap::new(2, 2, vec![0, 0, 1, 1]).unwrap()).unwrap();
        assert_eq!((h.coverage[0], h.coverage[1]), (0.5, 0.5));
        assert!(h.coverage[2..].iter().all(|&c| c == 0.0));
        let h = semantic_histogram(&SemanticMap::new(3, 1, vec![7; 3]).unwrap()).unwrap();
        assert_eq!(h.coverage[7], 1.0);
        assert!(semantic_histogram(&SemanticMap::new(0, 0, vec![]).unwrap()).is_err());
    }

    #[test]
    fn histogram_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let labels: Vec<u8> = (0..256).map(|_| rng.random_range(0..150)).collect();
            let h = semantic_histogram(&SemanticMap::new(16, 16, labels.clone()).unwrap()).unwrap();
            for k in 0..150u8 {
                let count = labels.iter().filter(|&&l| l == k).count();
                assert_eq!(h.coverage[k as usize], count as f64 / 256.0);
            }
            assert!((h.coverage.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let mut shuffled = labels;
            shuffled.sort_unstable();
            let h2 = semantic_histogram(&SemanticMap::new(16, 16, shuffled).unwrap()).unwrap();
            assert_eq!(h.coverage, h2.coverage);
        }
    }

    #[test]
    fn pgm_label_boundaries() {
        let ok = decode_semantic_map(b"P5\n1 1\n255\n\x95").unwrap();
        assert_eq!(ok.labels(), &[149]);
        assert!(matches!(
            decode_semantic_map(b"P5\n1 1\n255\n\x96"),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rgb_png_rejected() {
        let img = image::RgbImage::from_raw(1, 1, vec![1, 2, 3]).unwrap();
        let mut out = std::io::Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        assert!(matches!(
            decode_semantic_map(&out.into_inner()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn png_round_trip_preserves_histogram() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.png");
        let map = SemanticMap::new(4, 2, vec![0, 1, 2, 149, 149, 3, 3, 3]).unwrap();
        save_semantic_map(&map, &path).unwrap();
        let back = load_semantic_map(&path).unwrap();
        assert_eq!(back, map);
        assert_eq!(
            semantic_histogram(&back).unwrap(),
            semantic_histogram(&map).unwrap()
        );
    }
}
