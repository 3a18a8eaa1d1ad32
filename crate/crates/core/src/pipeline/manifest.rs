use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::external::ObjectSource;

/// Emotion axis a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Valence,
    Arousal,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Valence => "valence",
            Axis::Arousal => "arousal",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(Axis::Valence),
            "arousal" => Ok(Axis::Arousal),
            _ => arg_err(format!("axis must be valence or arousal, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaLabel {
    pub valence: f64,
    pub arousal: f64,
}

impl VaLabel {
    pub fn new(valence: f64, arousal: f64) -> Result<Self> {
        for v in [valence, arousal] {
            if !(1.0..=9.0).contains(&v) {
                return Err(Error::Domain(format!("V-A value {v} outside [1, 9]")));
            }
        }
        Ok(Self { valence, arousal })
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Valence => self.valence,
            Axis::Arousal => self.arousal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub object_feature_path: BTreeMap<ObjectSource, PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_map_path: Option<PathBuf>,
    #[serde(default)]
    pub label: Option<VaLabel>,
    #[serde(default)]
    pub keyword: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Records plus the directory their relative paths are resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<DatasetRecord>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, records: Vec<DatasetRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Data(format!("duplicate record id {:?}", r.id)));
            }
            if let Some(l) = r.label {
                VaLabel::new(l.valence, l.arousal)?;
            }
        }
        Ok(Self {
            base_dir: base_dir.into(),
            records,
        })
    }

    /// Reads JSON-lines; blank lines are skipped.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let mut records = Vec::new();
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line)
                .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), no + 1)))?;
            records.push(record);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(base, records)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Targets on `axis`; every record must be labeled.
    pub fn targets(&self, axis: Axis) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.label
                    .map(|l| l.get(axis))
                    .ok_or_else(|| Error::Data(format!("record {:?} has no label", r.id)))
            })
            .collect()
    }
}

/// Row id and optional label, stored next to a feature cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowLabel {
    pub id: String,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
}

impl RowLabel {
    pub fn from_record(r: &DatasetRecord) -> Self {
        Self {
            id: r.id.clone(),
            valence: r.label.map(|l| l.valence),
            arousal: r.label.map(|l| l.arousal),
        }
    }

    pub fn target(&self, axis: Axis) -> Result<f64> {
        match axis {
            Axis::Valence => self.valence,
            Axis::Arousal => self.arousal,
        }
        .ok_or_else(|| Error::Data(format!("row {:?} has no {axis} label", self.id)))
    }
}

/// CSV with header `id,valence,arousal`; missing labels are empty fields.
pub fn write_labels_csv(rows: &[RowLabel], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(input: impl std::io::Read) -> Result<Vec<RowLabel>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}
