//! Train/test/support splits over a cleaned manifest.
//!
//! The zero-shot evaluation needs malware families that the models never
//! saw, so the primary split assigns whole families to one side. Benign
//! apps carry no family and are split at random, with a withheld pool set
//! aside to serve as support sets at classification time; support apps
//! appear on neither side of the split.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::callgraph::Label;
use crate::dataset::manifest::ManifestEntry;
use crate::error::{Error, Result};

const SPLIT_HEADER: &str = "# malgraph-split v1";

/// App ids by role, the malware families on the test side, and free-form
/// metadata that the file format persists as comment lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub support: Vec<String>,
    pub test_families: Vec<String>,
    pub meta: Vec<(String, String)>,
}

impl SplitSpec {
    /// Check internal consistency against the manifest the split came from:
    /// roles are disjoint, ids are unique and known, and both sides of the
    /// split are populated.
    pub fn validate(&self, entries: &[ManifestEntry]) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Validation("split has an empty training side".into()));
        }
        if self.test.is_empty() {
            return Err(Error::Validation("split has an empty test side".into()));
        }
        let known: BTreeSet<&str> = entries.iter().map(|e| e.app_id.as_str()).collect();
        let mut seen = BTreeSet::new();
        for (role, ids) in
            [("train", &self.train), ("test", &self.test), ("support", &self.support)]
        {
            for id in ids {
                if !known.contains(id.as_str()) {
                    return Err(Error::Validation(format!(
                        "{role} app {id} is not in the manifest"
                    )));
                }
                if !seen.insert(id.as_str()) {
                    return Err(Error::Validation(format!(
                        "app {id} appears in more than one role"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Index of definite-label entries with the bookkeeping every strategy
/// needs.
struct Partitioned<'a> {
    benign: Vec<&'a str>,
    families: BTreeMap<&'a str, Vec<&'a str>>,
}

fn partition(entries: &[ManifestEntry]) -> Result<Partitioned<'_>> {
    let mut benign = Vec::new();
    let mut families: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in entries {
        match e.label.to_label() {
            Some(Label::Benign) => benign.push(e.app_id.as_str()),
            Some(Label::Malware) => {
                let family = e.family.as_deref().ok_or_else(|| {
                    Error::Validation(format!(
                        "malware app {} has no family; clean and label the manifest first",
                        e.app_id
                    ))
                })?;
                families.entry(family).or_default().push(e.app_id.as_str());
            }
            _ => {
                return Err(Error::Validation(format!(
                    "app {} has an indefinite label; clean the manifest first",
                    e.app_id
                )))
            }
        }
    }
    Ok(Partitioned { benign, families })
}

/// Families ordered largest first; ties break on the family name so the
/// order never depends on map internals.
fn families_by_size<'a>(families: &BTreeMap<&'a str, Vec<&'a str>>) -> Vec<(&'a str, usize)> {
    let mut sized: Vec<(&str, usize)> = families.iter().map(|(f, v)| (*f, v.len())).collect();
    sized.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    sized
}

fn draw_support(benign: &mut Vec<&str>, pool_size: usize, rng: &mut impl Rng) -> Result<Vec<String>> {
    if pool_size == 0 {
        return Err(Error::Validation("support pool size must be positive".into()));
    }
    if benign.len() < pool_size + 2 {
        return Err(Error::Validation(format!(
            "support pool of {pool_size} leaves fewer than two of {} benign apps for the split",
            benign.len()
        )));
    }
    benign.shuffle(rng);
    Ok(benign.drain(..pool_size).map(str::to_string).collect())
}

/// Split with family-disjoint malware: whole families go to the test side,
/// largest first, while they fit under `test_fraction` of the malware apps.
/// If none fit, the smallest family moves over so the test side is never
/// empty. Benign apps are shuffled; a withheld support pool is drawn first
/// and the rest splits by the same fraction.
pub fn family_disjoint_split(
    entries: &[ManifestEntry],
    test_fraction: f64,
    support_pool_size: usize,
    rng: &mut impl Rng,
) -> Result<SplitSpec> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let Partitioned { mut benign, families } = partition(entries)?;
    if families.len() < 2 {
        return Err(Error::Validation(format!(
            "family-disjoint splitting needs at least two malware families, found {}",
            families.len()
        )));
    }
    let total_malware: usize = families.values().map(Vec::len).sum();
    let target = test_fraction * total_malware as f64;

    let mut test_families: Vec<&str> = Vec::new();
    let mut test_malware: Vec<&str> = Vec::new();
    for (family, size) in families_by_size(&families) {
        if (test_malware.len() + size) as f64 <= target {
            test_families.push(family);
            test_malware.extend(&families[family]);
        }
    }
    if test_families.is_empty() {
        // Nothing fits under the target; the smallest family moves over.
        let (family, _) = families_by_size(&families)
            .last()
            .copied()
            .expect("at least two families exist");
        test_families.push(family);
        test_malware.extend(&families[family]);
    }

    let support = draw_support(&mut benign, support_pool_size, rng)?;
    let benign_test_count =
        ((benign.len() as f64 * test_fraction).round() as usize).clamp(1, benign.len() - 1);
    let benign_test: Vec<&str> = benign.drain(..benign_test_count).collect();

    let mut train: Vec<String> = Vec::new();
    for (family, members) in &families {
        if !test_families.contains(family) {
            train.extend(members.iter().map(|s| s.to_string()));
        }
    }
    train.extend(benign.iter().map(|s| s.to_string()));

    let mut test: Vec<String> = test_malware.iter().map(|s| s.to_string()).collect();
    test.extend(benign_test.iter().map(|s| s.to_string()));

    let mut spec = SplitSpec {
        train,
        test,
        support,
        test_families: test_families.iter().map(|s| s.to_string()).collect(),
        meta: vec![
            ("strategy".into(), "family-disjoint".into()),
            ("test_fraction".into(), format!("{test_fraction}")),
            ("support_pool".into(), format!("{support_pool_size}")),
        ],
    };
    canonicalize(&mut spec);
    spec.validate(entries)?;
    Ok(spec)
}

/// Five family-disjoint folds. Families land on the currently lightest fold,
/// largest first, which bounds the spread of fold sizes by the largest
/// family. Benign apps are shuffled once and dealt round-robin; each fold's
/// support pool is drawn from the benign apps of the other folds.
pub fn five_fold(
    entries: &[ManifestEntry],
    support_pool_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<SplitSpec>> {
    const FOLDS: usize = 5;
    let Partitioned { mut benign, families } = partition(entries)?;
    if families.len() < FOLDS {
        return Err(Error::Validation(format!(
            "five-fold evaluation needs at least {FOLDS} malware families, found {}",
            families.len()
        )));
    }

    let mut fold_families: Vec<Vec<&str>> = vec![Vec::new(); FOLDS];
    let mut fold_sizes = [0usize; FOLDS];
    for (family, size) in families_by_size(&families) {
        let lightest = (0..FOLDS).min_by_key(|&k| (fold_sizes[k], k)).expect("five folds");
        fold_families[lightest].push(family);
        fold_sizes[lightest] += size;
    }

    benign.shuffle(rng);
    let benign_folds: Vec<Vec<&str>> = (0..FOLDS)
        .map(|k| benign.iter().skip(k).step_by(FOLDS).copied().collect())
        .collect();

    let mut specs = Vec::with_capacity(FOLDS);
    for k in 0..FOLDS {
        let mut others: Vec<&str> = (0..FOLDS)
            .filter(|&j| j != k)
            .flat_map(|j| benign_folds[j].iter().copied())
            .collect();
        let support = draw_support(&mut others, support_pool_size, rng)?;

        let mut train: Vec<String> = Vec::new();
        for (family, members) in &families {
            if !fold_families[k].contains(family) {
                train.extend(members.iter().map(|s| s.to_string()));
            }
        }
        train.extend(others.iter().map(|s| s.to_string()));

        let mut test: Vec<String> = Vec::new();
        for family in &fold_families[k] {
            test.extend(families[family].iter().map(|s| s.to_string()));
        }
        test.extend(benign_folds[k].iter().map(|s| s.to_string()));

        let mut spec = SplitSpec {
            train,
            test,
            support,
            test_families: fold_families[k].iter().map(|s| s.to_string()).collect(),
            meta: vec![
                ("strategy".into(), "five-fold".into()),
                ("fold".into(), format!("{k}")),
                ("support_pool".into(), format!("{support_pool_size}")),
            ],
        };
        canonicalize(&mut spec);
        spec.validate(entries)?;
        specs.push(spec);
    }
    Ok(specs)
}

/// Split on time: training apps predate the cutoff, test apps do not.
/// Families may straddle the cutoff; the spec records the ones seen on the
/// test side. Every entry needs a timestamp.
pub fn time_split(
    entries: &[ManifestEntry],
    cutoff: NaiveDate,
    support_pool_size: usize,
    rng: &mut impl Rng,
) -> Result<SplitSpec> {
    partition(entries)?;
    let mut train_benign: Vec<&str> = Vec::new();
    let mut train: Vec<String> = Vec::new();
    let mut test: Vec<String> = Vec::new();
    let mut test_families: BTreeSet<&str> = BTreeSet::new();
    for e in entries {
        let ts = e.timestamp.ok_or_else(|| {
            Error::Validation(format!("app {} has no timestamp; a time split needs one", e.app_id))
        })?;
        if ts < cutoff {
            if e.label.to_label() == Some(Label::Benign) {
                train_benign.push(e.app_id.as_str());
            } else {
                train.push(e.app_id.clone());
            }
        } else {
            test.push(e.app_id.clone());
            if let Some(f) = e.family.as_deref() {
                test_families.insert(f);
            }
        }
    }
    let support = draw_support(&mut train_benign, support_pool_size, rng)?;
    train.extend(train_benign.iter().map(|s| s.to_string()));

    let mut spec = SplitSpec {
        train,
        test,
        support,
        test_families: test_families.iter().map(|s| s.to_string()).collect(),
        meta: vec![
            ("strategy".into(), "time".into()),
            ("cutoff".into(), cutoff.to_string()),
            ("support_pool".into(), format!("{support_pool_size}")),
        ],
    };
    canonicalize(&mut spec);
    spec.validate(entries)?;
    Ok(spec)
}

fn canonicalize(spec: &mut SplitSpec) {
    spec.train.sort();
    spec.test.sort();
    spec.support.sort();
    spec.test_families.sort();
}

/// Write a split as a line-oriented id list. Metadata and the test families
/// ride along as comment lines, so the file alone reproduces the spec.
pub fn write_split(path: &Path, spec: &SplitSpec) -> Result<()> {
    for ids in [&spec.train, &spec.test, &spec.support] {
        for id in ids {
            if id.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!(
                    "app id {id:?} contains whitespace and cannot be written to an id list"
                )));
            }
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |line: String| w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e));
    emit(format!("{SPLIT_HEADER}\n"))?;
    for (key, value) in &spec.meta {
        emit(format!("# {key}: {value}\n"))?;
    }
    for family in &spec.test_families {
        emit(format!("# test_family: {family}\n"))?;
    }
    for (role, ids) in
        [("train", &spec.train), ("test", &spec.test), ("support", &spec.support)]
    {
        for id in ids {
            emit(format!("{role}\t{id}\n"))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_split(path: &Path) -> Result<SplitSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, line)) if line.trim() == SPLIT_HEADER => {}
        _ => {
            return Err(Error::Parse {
                location: format!("{}:1", path.display()),
                detail: format!("expected header {SPLIT_HEADER:?}"),
            })
        }
    }
    let mut spec = SplitSpec::default();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let location = format!("{}:{}", path.display(), idx + 1);
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once(':') {
                let (key, value) = (key.trim().to_string(), value.trim().to_string());
                if key == "test_family" {
                    spec.test_families.push(value);
                } else {
                    spec.meta.push((key, value));
                }
            }
            continue;
        }
        let (role, id) = line.split_once('\t').ok_or_else(|| Error::Parse {
            location: location.clone(),
            detail: "expected <role><TAB><app id>".into(),
        })?;
        let id = id.to_string();
        match role {
            "train" => spec.train.push(id),
            "test" => spec.test.push(id),
            "support" => spec.support.push(id),
            other => {
                return Err(Error::Parse {
                    location,
                    detail: format!("unknown role {other:?}"),
                })
            }
        }
    }
    Ok(spec)
}
