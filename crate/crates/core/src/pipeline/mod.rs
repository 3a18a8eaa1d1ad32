//! From dataset manifest to training matrices.

mod cache;
mod features;
mod manifest;
mod matrix;

pub use cache::{cache_read, cache_write, read_cache_file, write_cache_file, CACHE_MAGIC, CACHE_VERSION};
pub use features::{Block, Extractor, FeatureConfig, FeatureVector, RecordFailure, Selection};
pub(crate) use manifest::csv_err;
pub use manifest::{read_labels_csv, write_labels_csv, Axis, DatasetRecord, Manifest, RowLabel, VaLabel};
pub use matrix::{standardize, FeatureMatrix, Standardizer};
