//! Dataset manifests: one row per app with identity, label, family, and
//! timestamp, plus the cleaning pass that makes a raw manifest usable.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::callgraph::Label;
use crate::error::{Error, Result};

/// Label as it arrives from the labeling source. Apps whose scanner
/// consensus is too weak to call either way are marked indefinite and
/// dropped during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawLabel {
    Benign,
    Malware,
    Indefinite,
}

impl RawLabel {
    /// The definite label, if there is one.
    pub fn to_label(self) -> Option<Label> {
        match self {
            RawLabel::Benign => Some(Label::Benign),
            RawLabel::Malware => Some(Label::Malware),
            RawLabel::Indefinite => None,
        }
    }
}

impl std::fmt::Display for RawLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RawLabel::Benign => write!(f, "benign"),
            RawLabel::Malware => write!(f, "malware"),
            RawLabel::Indefinite => write!(f, "indefinite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub app_id: String,
    pub package_name: String,
    pub label: RawLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<NaiveDate>,
    /// Fraction of scanners that flagged the app, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_ratio: Option<f64>,
}

/// What the cleaning pass removed and why.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub kept: usize,
    pub dropped_indefinite: usize,
    pub dropped_contradictory: usize,
    pub dropped_duplicate_id: usize,
    pub dropped_duplicate_package: usize,
}

impl CleanReport {
    /// Entries removed across all stages.
    pub fn dropped(&self) -> usize {
        self.dropped_indefinite
            + self.dropped_contradictory
            + self.dropped_duplicate_id
            + self.dropped_duplicate_package
    }
}

/// Clean a raw manifest in three stages:
///
/// 1. drop indefinite entries;
/// 2. drop every entry of any app id that appears with both labels
///    (identical repeats collapse to their first occurrence);
/// 3. order by app id and keep the first entry of each package name.
///
/// The result is sorted by app id. Cleaning an already-clean manifest is a
/// no-op, which the tests pin down.
pub fn clean_manifest(entries: &[ManifestEntry]) -> (Vec<ManifestEntry>, CleanReport) {
    let mut report = CleanReport::default();

    let definite: Vec<&ManifestEntry> = entries
        .iter()
        .filter(|e| {
            let keep = e.label != RawLabel::Indefinite;
            if !keep {
                report.dropped_indefinite += 1;
            }
            keep
        })
        .collect();

    // Group by app id in first-seen order to count drops exactly once per
    // offending entry.
    let mut labels_by_id: BTreeMap<&str, (RawLabel, bool)> = BTreeMap::new();
    for e in &definite {
        labels_by_id
            .entry(e.app_id.as_str())
            .and_modify(|(label, contradictory)| {
                if *label != e.label {
                    *contradictory = true;
                }
            })
            .or_insert((e.label, false));
    }
    let mut by_id: BTreeMap<&str, &ManifestEntry> = BTreeMap::new();
    for e in &definite {
        let (_, contradictory) = labels_by_id[e.app_id.as_str()];
        if contradictory {
            report.dropped_contradictory += 1;
        } else if by_id.contains_key(e.app_id.as_str()) {
            report.dropped_duplicate_id += 1;
        } else {
            by_id.insert(e.app_id.as_str(), e);
        }
    }

    let mut seen_packages = std::collections::BTreeSet::new();
    let mut kept = Vec::new();
    for e in by_id.values() {
        if seen_packages.insert(e.package_name.as_str()) {
            kept.push((*e).clone());
        } else {
            report.dropped_duplicate_package += 1;
        }
    }
    report.kept = kept.len();
    (kept, report)
}

fn validate_entry(e: &ManifestEntry, location: String) -> Result<()> {
    if e.app_id.is_empty() {
        return Err(Error::Parse { location, detail: "empty app_id".into() });
    }
    if e.package_name.is_empty() {
        return Err(Error::Parse { location, detail: "empty package_name".into() });
    }
    if let Some(r) = e.detection_ratio {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Parse {
                location,
                detail: format!("detection_ratio {r} outside [0, 1]"),
            });
        }
    }
    Ok(())
}

/// Read a JSONL manifest. Parse failures name the line and the offending
/// field path.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), idx + 1);
        let de = &mut serde_json::Deserializer::from_str(line);
        let entry: ManifestEntry = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            location: format!("{location} field {}", e.path()),
            detail: e.inner().to_string(),
        })?;
        validate_entry(&entry, location)?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in entries {
        serde_json::to_writer(&mut w, e).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(app_id: &str, package: &str, label: RawLabel) -> ManifestEntry {
        ManifestEntry {
            app_id: app_id.into(),
            package_name: package.into(),
            label,
            family: None,
            timestamp: None,
            detection_ratio: None,
        }
    }

    #[test]
    fn cleaning_drops_indefinite_entries() {
        let raw = vec![
            entry("a1", "p1", RawLabel::Benign),
            entry("a2", "p2", RawLabel::Indefinite),
            entry("a3", "p3", RawLabel::Malware),
        ];
        let (kept, report) = clean_manifest(&raw);
        assert_eq!(kept.len(), 2);
        assert_eq!(report.dropped_indefinite, 1);
        assert!(kept.iter().all(|e| e.label != RawLabel::Indefinite));
    }

    #[test]
    fn cleaning_drops_contradictory_app_ids_entirely() {
        let raw = vec![
            entry("a1", "p1", RawLabel::Benign),
            entry("a1", "p2", RawLabel::Malware),
            entry("a2", "p3", RawLabel::Malware),
        ];
        let (kept, report) = clean_manifest(&raw);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].app_id, "a2");
        assert_eq!(report.dropped_contradictory, 2);
    }

    #[test]
    fn identical_repeats_collapse_without_contradiction() {
        let raw = vec![
            entry("a1", "p1", RawLabel::Benign),
            entry("a1", "p1", RawLabel::Benign),
        ];
        let (kept, report) = clean_manifest(&raw);
        assert_eq!(kept.len(), 1);
        assert_eq!(report.dropped_contradictory, 0);
        assert_eq!(report.dropped_duplicate_id, 1);
    }

    #[test]
    fn report_counts_balance_against_the_input() {
        let raw = vec![
            entry("a1", "p1", RawLabel::Benign),
            entry("a1", "p1", RawLabel::Benign),
            entry("a2", "p2", RawLabel::Indefinite),
            entry("a3", "p3", RawLabel::Benign),
            entry("a3", "p3x", RawLabel::Malware),
            entry("a4", "p1", RawLabel::Malware),
        ];
        let (kept, r) = clean_manifest(&raw);
        assert_eq!(kept.len(), r.kept);
        assert_eq!(
            r.kept + r.dropped_indefinite + r.dropped_contradictory + r.dropped_duplicate_id
                + r.dropped_duplicate_package,
            raw.len()
        );
    }

    #[test]
    fn package_dedup_keeps_the_first_by_app_id_order() {
        let raw = vec![
            entry("a9", "shared.pkg", RawLabel::Benign),
            entry("a1", "shared.pkg", RawLabel::Malware),
        ];
        let (kept, report) = clean_manifest(&raw);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].app_id, "a1", "a1 sorts before a9");
        assert_eq!(report.dropped_duplicate_package, 1);
    }

    #[test]
    fn cleaning_is_idempotent() {
        let raw = vec![
            entry("a4", "p4", RawLabel::Malware),
            entry("a1", "p1", RawLabel::Benign),
            entry("a1", "p1x", RawLabel::Malware),
            entry("a2", "p2", RawLabel::Indefinite),
            entry("a3", "p1", RawLabel::Benign),
            entry("a3", "p3", RawLabel::Benign),
        ];
        let (once, _) = clean_manifest(&raw);
        let (twice, report) = clean_manifest(&once);
        assert_eq!(once, twice);
        assert_eq!(report.dropped_indefinite, 0);
        assert_eq!(report.dropped_contradictory, 0);
        assert_eq!(report.dropped_duplicate_package, 0);
        assert_eq!(report.kept, once.len());
    }

    #[test]
    fn manifests_round_trip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        let entries = vec![
            ManifestEntry {
                app_id: "a1".into(),
                package_name: "com.example.one".into(),
                label: RawLabel::Malware,
                family: Some("locker".into()),
                timestamp: NaiveDate::from_ymd_opt(2020, 3, 14),
                detection_ratio: Some(0.82),
            },
            entry("a2", "com.example.two", RawLabel::Benign),
        ];
        write_manifest(&path, &entries).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded, entries);
    }

    #[test]
    fn loading_names_the_line_and_field_on_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        std::fs::write(
            &path,
            "{\"app_id\":\"a1\",\"package_name\":\"p\",\"label\":\"benign\"}\n{\"app_id\":\"a2\",\"package_name\":\"p2\",\"label\":\"weird\"}\n",
        )
        .unwrap();
        let err = load_manifest(&path).unwrap_err();
        let text = err.to_string();
        assert!(text.contains(":2"), "error should name line 2: {text}");
        assert!(text.contains("label"), "error should name the field: {text}");
    }

    #[test]
    fn loading_rejects_out_of_range_detection_ratios() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        std::fs::write(
            &path,
            "{\"app_id\":\"a1\",\"package_name\":\"p\",\"label\":\"benign\",\"detection_ratio\":1.5}\n",
        )
        .unwrap();
        assert!(load_manifest(&path).is_err());
    }
}
