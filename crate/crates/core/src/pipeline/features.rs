use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetRecord, Manifest};
use super::matrix::FeatureMatrix;
use crate::color::{color_block, ColorConfig, COLOR_DIM};
use crate::error::{arg_err, Error, Result};
use crate::external::{load_object_feature, load_semantic_map, semantic_histogram, ObjectSource, OBJECT_DIM, SEMANTIC_DIM};
use crate::gist::{build_gabor_bank, gist, GaborBank, DEFAULT_RESOLUTION, GIST_DIM};
use crate::imaging::{self, to_gray};
use crate::lbp::{lbp, LBP_BINS};

/// Feature families, in canonical concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Color,
    Gist,
    Lbp,
    Object,
    Semantic,
}

impl Block {
    pub const ALL: [Block; 5] = [Block::Color, Block::Gist, Block::Lbp, Block::Object, Block::Semantic];

    pub fn name(self) -> &'static str {
        match self {
            Block::Color => "color",
            Block::Gist => "gist",
            Block::Lbp => "lbp",
            Block::Object => "object",
            Block::Semantic => "semantic",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Block::Color => COLOR_DIM,
            Block::Gist => GIST_DIM,
            Block::Lbp => LBP_BINS,
            Block::Object => OBJECT_DIM,
            Block::Semantic => SEMANTIC_DIM,
        }
    }

    fn needs_image(self) -> bool {
        matches!(self, Block::Color | Block::Gist | Block::Lbp)
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Block::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .map_or_else(|| arg_err(format!("unknown feature block {s:?}")), Ok)
    }
}

/// Non-empty set of blocks; iteration follows canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection(BTreeSet<Block>);

impl Selection {
    pub fn new(blocks: impl IntoIterator<Item = Block>) -> Result<Self> {
        let set: BTreeSet<Block> = blocks.into_iter().collect();
        if set.is_empty() {
            return arg_err("empty feature selection");
        }
        Ok(Self(set))
    }

    pub fn all() -> Self {
        Self(Block::ALL.into_iter().collect())
    }

    pub fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, b: Block) -> bool {
        self.0.contains(&b)
    }

    pub fn dim(&self) -> usize {
        self.blocks().map(Block::dim).sum()
    }

    pub fn schema(&self) -> Vec<(String, usize)> {
        self.blocks().map(|b| (b.name().to_string(), b.dim())).collect()
    }
}

impl FromStr for Selection {
    type Err = Error;

    /// Comma-separated block names, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(Self::all());
        }
        Self::new(
            s.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(Block::from_str)
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.blocks().map(Block::name).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub color: ColorConfig,
    pub gist_resolution: usize,
    pub object_source: ObjectSource,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            color: ColorConfig::default(),
            gist_resolution: DEFAULT_RESOLUTION,
            object_source: ObjectSource::Vgg16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub blocks: Vec<(Block, Vec<f64>)>,
}

impl FeatureVector {
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }
}

/// Why one record could not be assembled.
#[derive(Debug)]
pub struct RecordFailure {
    pub id: String,
    pub error: Error,
}

/// Holds the configuration and the prebuilt filter bank.
#[derive(Debug, Clone)]
pub struct Extractor {
    config: FeatureConfig,
    bank: GaborBank,
}

fn block_io(block: Block, path: &Path) -> impl FnOnce(Error) -> Error + '_ {
    let name = block.name();
    move |e| match e {
        Error::Io(source) => Error::BlockIo {
            block: name,
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

impl Extractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        let bank = build_gabor_bank(config.gist_resolution)?;
        Ok(Self { config, bank })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Extracts or loads the selected blocks for one record, in canonical order.
    pub fn assemble(&self, manifest: &Manifest, record: &DatasetRecord, selection: &Selection) -> Result<FeatureVector> {
        let image = if selection.blocks().any(Block::needs_image) {
            let path = manifest.resolve(&record.image_path);
            let bytes = std::fs::read(&path).map_err(|e| Error::BlockIo {
                block: "image",
                path: path.clone(),
                source: e,
            })?;
            Some(imaging::decode(&bytes)?)
        } else {
            None
        };
        let gray = image.as_ref().map(to_gray);

        let mut blocks = Vec::new();
        for block in selection.blocks() {
            let values = match block {
                Block::Color => color_block(image.as_ref().unwrap(), &self.config.color)?.to_vec(),
                Block::Gist => gist(gray.as_ref().unwrap(), &self.bank)?.values,
                Block::Lbp => lbp(gray.as_ref().unwrap())?.bins.to_vec(),
                Block::Object => {
                    let source = self.config.object_source;
                    let rel = record.object_feature_path.get(&source).ok_or_else(|| {
                        Error::Data(format!("record {:?} has no {source} object feature", record.id))
                    })?;
                    let path = manifest.resolve(rel);
                    load_object_feature(&path, source).map_err(block_io(block, &path))?.probs
                }
                Block::Semantic => {
                    let rel = record.semantic_map_path.as_ref().ok_or_else(|| {
                        Error::Data(format!("record {:?} has no semantic map", record.id))
                    })?;
                    let path = manifest.resolve(rel);
                    let map = load_semantic_map(&path).map_err(block_io(block, &path))?;
                    semantic_histogram(&map)?.coverage.to_vec()
                }
            };
            debug_assert_eq!(values.len(), block.dim());
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite value in {block} block")));
            }
            blocks.push((block, values));
        }
        Ok(FeatureVector { blocks })
    }

    /// Assembles every record, in manifest order, using up to `jobs` threads
    /// (0 uses every core).
    pub fn build_matrix(&self, manifest: &Manifest, selection: &Selection, jobs: usize) -> Result<(FeatureMatrix, Vec<RecordFailure>)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Argument(e.to_string()))?;
        let results: Vec<_> = pool.install(|| {
            manifest
                .records
                .par_iter()
                .map(|r| self.assemble(manifest, r, selection))
                .collect()
        });
        let mut matrix = FeatureMatrix::empty(selection.schema());
        let mut failures = Vec::new();
        for (record, result) in manifest.records.iter().zip(results) {
            match result {
                Ok(v) => matrix.push_row(&v.to_vec())?,
                Err(error) => failures.push(RecordFailure {
                    id: record.id.clone(),
                    error,
                }),
            }
        }
        Ok((matrix, failures))
    }
}
