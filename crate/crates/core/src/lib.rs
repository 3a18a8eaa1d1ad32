//! Valence-arousal emotion prediction for images.
//!
//! Handcrafted descriptors (color statistics, GIST, uniform LBP) and
//! externally computed high-level features (object probabilities, scene
//! label maps) are concatenated per image and regressed by a small
//! from-scratch feed-forward network. Around that sit a k-fold evaluation
//! harness, correlation analyses and an HTTP service for collecting ratings.

pub mod annotation;
pub mod color;
pub mod error;
pub mod experiments;
pub mod external;
pub mod ffnn;
pub mod gist;
pub mod imaging;
pub mod lbp;
pub mod pipeline;

pub use error::{Error, Result};
pub use external::ObjectSource;
pub use ffnn::{Mlp, TrainConfig};
pub use imaging::{ImageGray, ImageRgb};
pub use pipeline::{Axis, Block, DatasetRecord, FeatureMatrix, Manifest, Selection, VaLabel};
