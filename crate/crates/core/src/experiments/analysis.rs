//! Word-emotion correlation, V-A grid vocabulary and label distribution.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::stats::pearson;
use crate::error::{arg_err, Error, Result};
use crate::pipeline::{DatasetRecord, VaLabel};

/// Lower edges of the four grid sections on each axis; the last section
/// closes at 9.
pub const GRID_BOUNDS: [f64; 4] = [1.0, 3.0, 5.0, 7.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordEmotionEntry {
    pub word: String,
    pub valence: f64,
    pub arousal: f64,
}

/// Case-folded lookup from word to its V-A norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordDictionary {
    entries: HashMap<String, VaLabel>,
}

impl WordDictionary {
    pub fn from_entries(entries: impl IntoIterator<Item = WordEmotionEntry>) -> Result<Self> {
        let mut map = HashMap::new();
        for e in entries {
            let label = VaLabel::new(e.valence, e.arousal)?;
            let key = e.word.to_lowercase();
            if map.insert(key, label).is_some() {
                return Err(Error::Data(format!("duplicate dictionary word {:?}", e.word)));
            }
        }
        Ok(Self { entries: map })
    }

    /// CSV with a `word,valence,arousal` header.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers().map_err(crate::pipeline::csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["word", "valence", "arousal"] {
            return Err(Error::Format(format!(
                "dictionary header must be word,valence,arousal, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let entries = reader
            .deserialize()
            .map(|r| r.map_err(crate::pipeline::csv_err))
            .collect::<Result<Vec<WordEmotionEntry>>>()?;
        Self::from_entries(entries)
    }

    pub fn get(&self, word: &str) -> Option<VaLabel> {
        self.entries.get(&word.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCorrelation {
    pub r_valence: f64,
    pub r_arousal: f64,
    pub n_matched: usize,
    pub n_unmatched: usize,
}

/// Correlates each labeled record's object tag (its first tag) with the
/// dictionary norms of that word.
pub fn object_emotion_correlation(records: &[DatasetRecord], dict: &WordDictionary) -> Result<ObjectCorrelation> {
    let mut word = (Vec::new(), Vec::new());
    let mut image = (Vec::new(), Vec::new());
    let mut unmatched = 0;
    for r in records {
        let matched = r
            .label
            .zip(r.tags.first().and_then(|t| dict.get(t)));
        match matched {
            Some((img, w)) => {
                word.0.push(w.valence);
                word.1.push(w.arousal);
                image.0.push(img.valence);
                image.1.push(img.arousal);
            }
            None => unmatched += 1,
        }
    }
    if word.0.is_empty() {
        return Err(Error::Data("no record tag matched the dictionary".into()));
    }
    Ok(ObjectCorrelation {
        r_valence: pearson(&word.0, &image.0)?,
        r_arousal: pearson(&word.1, &image.1)?,
        n_matched: word.0.len(),
        n_unmatched: unmatched,
    })
}

/// Grid section of a V-A value: `[1,3)`, `[3,5)`, `[5,7)`, `[7,9]`.
pub fn grid_section(value: f64) -> usize {
    GRID_BOUNDS.iter().rposition(|&lo| value >= lo).unwrap_or(0)
}

/// Tag frequencies per section, indexed `[valence][arousal]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VaGrid {
    /// Words ranked by count, ties alphabetical.
    pub cells: [[Vec<(String, usize)>; 4]; 4],
}

impl VaGrid {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["valence_section", "arousal_section", "rank", "word", "count"])
            .map_err(crate::pipeline::csv_err)?;
        for (v, row) in self.cells.iter().enumerate() {
            for (a, cell) in row.iter().enumerate() {
                for (rank, (word, count)) in cell.iter().enumerate() {
                    w.write_record([
                        v.to_string(),
                        a.to_string(),
                        (rank + 1).to_string(),
                        word.clone(),
                        count.to_string(),
                    ])
                    .map_err(crate::pipeline::csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts the tags of labeled records per V-A section.
pub fn va_grid_words(records: &[DatasetRecord]) -> VaGrid {
    let mut counts: [[BTreeMap<&str, usize>; 4]; 4] = Default::default();
    for r in records {
        let Some(label) = r.label else { continue };
        let cell = &mut counts[grid_section(label.valence)][grid_section(label.arousal)];
        for tag in &r.tags {
            *cell.entry(tag.as_str()).or_default() += 1;
        }
    }
    let mut grid = VaGrid::default();
    for (v, row) in counts.iter().enumerate() {
        for (a, cell) in row.iter().enumerate() {
            let mut ranked: Vec<(String, usize)> = cell.iter().map(|(w, c)| (w.to_string(), *c)).collect();
            // BTreeMap order is alphabetical; the stable sort keeps it for ties
            ranked.sort_by(|x, y| y.1.cmp(&x.1));
            grid.cells[v][a] = ranked;
        }
    }
    grid
}

/// Label counts on a `bins x bins` grid over `[1, 9]²`, indexed
/// `[valence_bin * bins + arousal_bin]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaDistribution {
    pub bins: usize,
    pub counts: Vec<usize>,
}

impl VaDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let width = 8.0 / self.bins as f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["valence_lo", "valence_hi", "arousal_lo", "arousal_hi", "count"])
            .map_err(crate::pipeline::csv_err)?;
        for v in 0..self.bins {
            for a in 0..self.bins {
                let edge = |i: usize| 1.0 + i as f64 * width;
                w.write_record([
                    edge(v).to_string(),
                    edge(v + 1).to_string(),
                    edge(a).to_string(),
                    edge(a + 1).to_string(),
                    self.counts[v * self.bins + a].to_string(),
                ])
                .map_err(crate::pipeline::csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn dist_bin(value: f64, bins: usize) -> usize {
    (((value - 1.0) / 8.0 * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// 2-D histogram of the labeled records.
pub fn export_va_distribution(records: &[DatasetRecord], bins: usize) -> Result<VaDistribution> {
    if bins == 0 {
        return arg_err("distribution needs at least one bin");
    }
    let mut counts = vec![0; bins * bins];
    for label in records.iter().filter_map(|r| r.label) {
        counts[dist_bin(label.valence, bins) * bins + dist_bin(label.arousal, bins)] += 1;
    }
    Ok(VaDistribution { bins, counts })
}
