//! Synthetic datasets on disk: random-noise images, object-probability files
//! and scene label maps, with labels driven by a hidden per-record class.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use afva_core::external::{save_object_feature, save_semantic_map, ObjectFeature, SemanticMap, OBJECT_DIM};
use afva_core::{DatasetRecord, Manifest, ObjectSource, VaLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLASSES: usize = 5;
const DISTRACTORS: usize = 20;

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub seed: u64,
    pub image_size: u32,
    /// Uniform label jitter half-width.
    pub label_noise: f64,
    pub with_objects: bool,
    pub with_semantic: bool,
    /// Write the object paths into the manifest but not the files.
    pub drop_object_files: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 10,
            seed: 0,
            image_size: 16,
            label_noise: 0.0,
            with_objects: true,
            with_semantic: true,
            drop_object_files: false,
        }
    }
}

pub struct Synthetic {
    pub dir: tempfile::TempDir,
    pub manifest: PathBuf,
    pub classes: Vec<usize>,
}

impl Synthetic {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn class_label(class: usize) -> (f64, f64) {
    (1.0 + 2.0 * class as f64, 9.0 - 2.0 * class as f64)
}

pub fn class_tag(class: usize) -> String {
    format!("obj{class}")
}

pub fn build(spec: &SyntheticSpec) -> Synthetic {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["images", "objects", "semantic"] {
        std::fs::create_dir(dir.path().join(sub)).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::new();
    let mut classes = Vec::new();
    for i in 0..spec.n {
        let class = rng.random_range(0..CLASSES);
        classes.push(class);
        let id = format!("r{i:04}");

        let s = spec.image_size;
        let img = image::RgbImage::from_fn(s, s, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]));
        let image_rel = PathBuf::from(format!("images/{id}.png"));
        img.save(dir.path().join(&image_rel)).unwrap();

        let mut object_feature_path = BTreeMap::new();
        if spec.with_objects {
            let rel = PathBuf::from(format!("objects/{id}.txt"));
            if !spec.drop_object_files {
                // class object plus mass on a fixed set of distractor classes
                let mut probs = vec![0.0; OBJECT_DIM];
                let main = 0.5 + 0.3 * rng.random::<f64>();
                probs[class * 97] = main;
                let weights: Vec<f64> = (0..DISTRACTORS).map(|_| rng.random::<f64>()).collect();
                let total: f64 = weights.iter().sum();
                for (k, w) in weights.iter().enumerate() {
                    probs[500 + k] = (1.0 - main) * w / total;
                }
                let feature = ObjectFeature::new(probs, ObjectSource::Vgg16).unwrap();
                save_object_feature(&feature, dir.path().join(&rel)).unwrap();
            }
            object_feature_path.insert(ObjectSource::Vgg16, rel);
        }

        let semantic_map_path = spec.with_semantic.then(|| {
            let rel = PathBuf::from(format!("semantic/{id}.pgm"));
            let labels = (0..64).map(|_| rng.random_range(0..150u8)).collect();
            save_semantic_map(&SemanticMap::new(8, 8, labels).unwrap(), dir.path().join(&rel)).unwrap();
            rel
        });

        let (v, a) = class_label(class);
        let mut jitter = || {
            if spec.label_noise > 0.0 {
                rng.random_range(-spec.label_noise..spec.label_noise)
            } else {
                0.0
            }
        };
        let label = VaLabel::new((v + jitter()).clamp(1.0, 9.0), (a + jitter()).clamp(1.0, 9.0)).unwrap();
        records.push(DatasetRecord {
            id,
            image_path: image_rel,
            object_feature_path,
            semantic_map_path,
            label: Some(label),
            keyword: format!("kw{class}"),
            tags: vec![class_tag(class), "scene".into()],
        });
    }
    let manifest = Manifest::new(dir.path(), records).unwrap();
    let path = dir.path().join("manifest.jsonl");
    manifest.write(&path).unwrap();
    Synthetic {
        dir,
        manifest: path,
        classes,
    }
}

/// Dictionary assigning every class tag its noise-free class label.
pub fn write_dictionary(path: &Path) {
    let mut text = String::from("word,valence,arousal\n");
    for c in 0..CLASSES {
        let (v, a) = class_label(c);
        text.push_str(&format!("{},{v},{a}\n", class_tag(c)));
    }
    std::fs::write(path, text).unwrap();
}

pub fn afva() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_afva"));
    // keep the caller's AFVA_* variables out of the tests
    for (k, _) in std::env::vars_os() {
        if k.to_string_lossy().starts_with("AFVA_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    afva().args(args).output().unwrap()
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}
