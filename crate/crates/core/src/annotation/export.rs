use std::collections::HashMap;

use crate::pipeline::{Manifest, VaLabel};

use super::AggregateLabel;

/// Outcome of copying finalized aggregates onto a manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportReport {
    /// Record ids that received a label.
    pub labeled: Vec<String>,
    /// Finalized image ids that matched no record.
    pub unmatched: Vec<String>,
    /// Aggregates skipped because they are not finalized yet.
    pub pending: usize,
}

fn file_name(path: &std::path::Path) -> Option<&str> {
    path.file_name().and_then(|n| n.to_str())
}

/// Writes every finalized aggregate onto the record whose id or image file
/// name equals the aggregate's image id. Unfinalized images stay unlabeled.
pub fn export_labels(manifest: &Manifest, aggregates: &[AggregateLabel]) -> (Manifest, ExportReport) {
    let mut out = manifest.clone();
    let mut report = ExportReport::default();
    let mut by_key: HashMap<&str, usize> = HashMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        if let Some(name) = file_name(&r.image_path) {
            by_key.entry(name).or_insert(i);
        }
    }
    for (i, r) in manifest.records.iter().enumerate() {
        by_key.insert(r.id.as_str(), i);
    }
    for agg in aggregates {
        if !agg.finalized {
            report.pending += 1;
            continue;
        }
        let (Some(v), Some(a)) = (agg.valence_mean, agg.arousal_mean) else {
            report.pending += 1;
            continue;
        };
        let Some(&idx) = by_key.get(agg.image_id.as_str()) else {
            report.unmatched.push(agg.image_id.clone());
            continue;
        };
        match VaLabel::new(v, a) {
            Ok(label) => {
                out.records[idx].label = Some(label);
                report.labeled.push(out.records[idx].id.clone());
            }
            Err(_) => report.unmatched.push(agg.image_id.clone()),
        }
    }
    (out, report)
}
