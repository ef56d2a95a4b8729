//! Detection metrics, per-family rates, and threshold sweeps.
//!
//! Malware is the positive class everywhere. A metric whose denominator is
//! empty is reported as absent rather than zero: a test set without benign
//! apps has no false-positive rate, and collapsing that to 0.0 would turn
//! a gap in the data into the best possible score.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::callgraph::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Tally predictions against ground truth. Every prediction must resolve to
/// a definite truth label, and no app may be predicted twice.
pub fn confusion(
    predictions: &[(String, Label)],
    truth: &BTreeMap<String, Label>,
) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    let mut seen = BTreeSet::new();
    for (app_id, predicted) in predictions {
        if !seen.insert(app_id.as_str()) {
            return Err(Error::Validation(format!("app {app_id} was predicted twice")));
        }
        let actual = truth
            .get(app_id)
            .ok_or_else(|| Error::Validation(format!("app {app_id} has no ground truth")))?;
        match (predicted, actual) {
            (_, Label::Unknown) => {
                return Err(Error::Validation(format!("app {app_id} has no definite truth label")))
            }
            (Label::Unknown, _) => {
                return Err(Error::Validation(format!("app {app_id} has no definite prediction")))
            }
            (Label::Malware, Label::Malware) => counts.true_positives += 1,
            (Label::Malware, Label::Benign) => counts.false_positives += 1,
            (Label::Benign, Label::Benign) => counts.true_negatives += 1,
            (Label::Benign, Label::Malware) => counts.false_negatives += 1,
        }
    }
    Ok(counts)
}

/// Detection metrics. Absent means the counts cannot define the metric;
/// absent is never reported as zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub false_positive_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        accuracy: ratio(c.true_positives + c.true_negatives, c.total()),
        precision: ratio(c.true_positives, c.true_positives + c.false_positives),
        recall: ratio(c.true_positives, c.true_positives + c.false_negatives),
        // 2tp / (2tp + fp + fn) equals 2PR / (P + R) wherever the latter is
        // defined, and stays defined when only one of P, R exists.
        f1: ratio(
            2 * c.true_positives,
            2 * c.true_positives + c.false_positives + c.false_negatives,
        ),
        false_positive_rate: ratio(c.false_positives, c.false_positives + c.true_negatives),
    }
}

/// Detection rate of one malware family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyRate {
    pub detected: usize,
    pub total: usize,
}

impl FamilyRate {
    pub fn rate(&self) -> f64 {
        self.detected as f64 / self.total as f64
    }

    /// A family the detector misses entirely deserves a flag of its own; a
    /// high overall recall can hide it.
    pub fn is_missed(&self) -> bool {
        self.detected == 0
    }
}

/// Detection rate per family over the truth-malware apps in `predictions`.
/// Malware apps without a family are grouped under `(none)`.
pub fn per_family_detection(
    predictions: &[(String, Label)],
    truth_labels: &BTreeMap<String, Label>,
    families: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, FamilyRate>> {
    let mut rates: BTreeMap<String, FamilyRate> = BTreeMap::new();
    for (app_id, predicted) in predictions {
        let actual = truth_labels
            .get(app_id)
            .ok_or_else(|| Error::Validation(format!("app {app_id} has no ground truth")))?;
        if *actual != Label::Malware {
            continue;
        }
        let family = families.get(app_id).cloned().unwrap_or_else(|| "(none)".to_string());
        let entry = rates.entry(family).or_insert(FamilyRate { detected: 0, total: 0 });
        entry.total += 1;
        if *predicted == Label::Malware {
            entry.detected += 1;
        }
    }
    Ok(rates)
}

/// One point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Re-apply the zero-shot decision rule (benign iff the stored mean score
/// strictly exceeds the threshold) at every candidate threshold. Scores are
/// computed once per app, so sweeping is pure arithmetic.
pub fn threshold_sweep(
    scores: &[(String, f64)],
    truth: &BTreeMap<String, Label>,
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>> {
    if thresholds.is_empty() {
        return Err(Error::Validation("a sweep needs at least one threshold".into()));
    }
    for (app_id, score) in scores {
        if !score.is_finite() {
            return Err(Error::Validation(format!("app {app_id} has a non-finite score")));
        }
    }
    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        if !threshold.is_finite() {
            return Err(Error::Validation(format!("threshold {threshold} is not finite")));
        }
        let predictions: Vec<(String, Label)> = scores
            .iter()
            .map(|(app_id, score)| {
                let label = if *score > threshold { Label::Benign } else { Label::Malware };
                (app_id.clone(), label)
            })
            .collect();
        let counts = confusion(&predictions, truth)?;
        points.push(SweepPoint { threshold, counts, metrics: metrics(&counts) });
    }
    Ok(points)
}

/// The sweep point with the best F1. Points without an F1 are skipped; ties
/// go to the lowest threshold. Absent only if no point defines an F1.
pub fn best_by_f1(points: &[SweepPoint]) -> Option<&SweepPoint> {
    let mut best: Option<&SweepPoint> = None;
    for p in points {
        let Some(f1) = p.metrics.f1 else { continue };
        match best {
            Some(b) if f1 <= b.metrics.f1.unwrap_or(f64::NEG_INFINITY) => {}
            _ => best = Some(p),
        }
    }
    best
}

/// Unweighted mean over folds, per metric, skipping folds where the metric
/// is absent. A metric absent everywhere stays absent.
pub fn average_metrics(folds: &[Metrics]) -> Metrics {
    fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let present: Vec<f64> = values.flatten().collect();
        if present.is_empty() {
            None
        } else {
            Some(present.iter().sum::<f64>() / present.len() as f64)
        }
    }
    Metrics {
        accuracy: mean(folds.iter().map(|m| m.accuracy)),
        precision: mean(folds.iter().map(|m| m.precision)),
        recall: mean(folds.iter().map(|m| m.recall)),
        f1: mean(folds.iter().map(|m| m.f1)),
        false_positive_rate: mean(folds.iter().map(|m| m.false_positive_rate)),
    }
}

/// A full evaluation result, ready to serialize or print.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
    pub families: BTreeMap<String, FamilyRate>,
}

impl EvalReport {
    pub fn new(
        predictions: &[(String, Label)],
        truth: &BTreeMap<String, Label>,
        families: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let counts = confusion(predictions, truth)?;
        Ok(EvalReport {
            counts,
            metrics: metrics(&counts),
            families: per_family_detection(predictions, truth, families)?,
        })
    }

    /// Render a plain-text table.
    pub fn render_text(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            match v {
                Some(x) => format!("{:.2}%", 100.0 * x),
                None => "n/a".to_string(),
            }
        }
        let mut out = String::new();
        let c = &self.counts;
        out.push_str(&format!(
            "confusion  tp {}  fp {}  tn {}  fn {}\n",
            c.true_positives, c.false_positives, c.true_negatives, c.false_negatives
        ));
        out.push_str(&format!(
            "accuracy {}  precision {}  recall {}  f1 {}  fpr {}\n",
            cell(self.metrics.accuracy),
            cell(self.metrics.precision),
            cell(self.metrics.recall),
            cell(self.metrics.f1),
            cell(self.metrics.false_positive_rate),
        ));
        if !self.families.is_empty() {
            out.push_str("family detection:\n");
            for (family, rate) in &self.families {
                let flag = if rate.is_missed() { "  MISSED" } else { "" };
                out.push_str(&format!(
                    "  {family}: {}/{} ({:.1}%){flag}\n",
                    rate.detected,
                    rate.total,
                    100.0 * rate.rate()
                ));
            }
        }
        out
    }
}
