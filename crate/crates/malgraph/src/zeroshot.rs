//! Zero-shot and few-shot verdicts from support-set similarity.
//!
//! A query app is compared against a support set of known apps with the
//! Siamese network, and the scores are averaged. In zero-shot mode only a
//! benign support set exists: the app is benign when its mean similarity to
//! benign apps exceeds the threshold, malware otherwise, so unseen malware
//! families need no examples of their own. Few-shot mode adds a malware
//! support set and the larger mean wins.
//!
//! Mean scores are summed in sorted order, which makes them invariant to
//! the order of the support members down to the bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::callgraph::Label;
use crate::error::{Error, Result};
use crate::numerics::{as_f64, Scalar};
use crate::snn::{similarity, SnnModel};
use crate::vgae::Embedding;

/// Classification mode of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyMode {
    #[default]
    ZeroShot,
    FewShot,
}

impl std::fmt::Display for ClassifyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassifyMode::ZeroShot => write!(f, "zero-shot"),
            ClassifyMode::FewShot => write!(f, "few-shot"),
        }
    }
}

impl std::str::FromStr for ClassifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-shot" => Ok(ClassifyMode::ZeroShot),
            "few-shot" => Ok(ClassifyMode::FewShot),
            other => Err(Error::Config(format!(
                "mode must be zero-shot or few-shot, got {other}"
            ))),
        }
    }
}

/// A homogeneous set of reference embeddings for one class.
#[derive(Debug, Clone)]
pub struct SupportSet<T> {
    pub label: Label,
    pub members: Vec<Embedding<T>>,
}

/// Draw `size` members of class `label` from `pool` without replacement.
/// The pool must be homogeneous in `label`; mixing classes into a support
/// set would blur what the mean similarity measures.
pub fn build_support_set<T: Scalar>(
    pool: &[Embedding<T>],
    label: Label,
    size: usize,
    rng: &mut impl Rng,
) -> Result<SupportSet<T>> {
    if label == Label::Unknown {
        return Err(Error::Validation("support sets need a definite class".into()));
    }
    if size == 0 {
        return Err(Error::Validation("support sets cannot be empty".into()));
    }
    for e in pool {
        if e.label != label {
            return Err(Error::Validation(format!(
                "support pool for {label} contains app {} labeled {}",
                e.app_id, e.label
            )));
        }
    }
    if pool.len() < size {
        return Err(Error::Sampling(format!(
            "support set of {size} requested from a pool of {}",
            pool.len()
        )));
    }
    let members = rand::seq::index::sample(rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    Ok(SupportSet { label, members })
}

/// Mean similarity of `query` to every support member. Scores are sorted
/// before summation, so the result does not depend on member order.
pub fn mean_support_similarity<T: Scalar>(
    model: &SnnModel<T>,
    support: &SupportSet<T>,
    query: &[T],
) -> Result<T> {
    if support.members.is_empty() {
        return Err(Error::Validation("support sets cannot be empty".into()));
    }
    let mut scores = Vec::with_capacity(support.members.len());
    for member in &support.members {
        scores.push(similarity(model, query, &member.vector)?);
    }
    scores.sort_by(|a, b| as_f64(*a).total_cmp(&as_f64(*b)));
    let sum = scores.iter().fold(T::zero(), |acc, &s| acc + s);
    Ok(sum / T::from_usize(scores.len()).expect("support size fits any float"))
}

/// The verdict for one app, with the evidence that produced it.
#[derive(Debug, Clone)]
pub struct Verdict<T> {
    pub app_id: String,
    pub label: Label,
    pub mean_benign: T,
    /// Present in few-shot mode only.
    pub mean_malware: Option<T>,
    pub threshold: T,
    pub mode: ClassifyMode,
}

/// Zero-shot verdict: benign when the mean similarity to the benign support
/// set strictly exceeds the threshold. An exact tie counts as malware; the
/// detector fails closed.
pub fn classify_zero_shot<T: Scalar>(
    model: &SnnModel<T>,
    benign_support: &SupportSet<T>,
    query: &Embedding<T>,
    threshold: T,
) -> Result<Verdict<T>> {
    if benign_support.label != Label::Benign {
        return Err(Error::Validation(format!(
            "zero-shot needs a benign support set, got {}",
            benign_support.label
        )));
    }
    let mean_benign = mean_support_similarity(model, benign_support, &query.vector)?;
    let label = if mean_benign > threshold { Label::Benign } else { Label::Malware };
    Ok(Verdict {
        app_id: query.app_id.clone(),
        label,
        mean_benign,
        mean_malware: None,
        threshold,
        mode: ClassifyMode::ZeroShot,
    })
}

/// Few-shot verdict: the class with the larger mean similarity wins and a
/// tie counts as malware. The threshold is recorded for the report but does
/// not enter the decision.
pub fn classify_few_shot<T: Scalar>(
    model: &SnnModel<T>,
    benign_support: &SupportSet<T>,
    malware_support: &SupportSet<T>,
    query: &Embedding<T>,
    threshold: T,
) -> Result<Verdict<T>> {
    if benign_support.label != Label::Benign {
        return Err(Error::Validation(format!(
            "few-shot needs a benign support set, got {}",
            benign_support.label
        )));
    }
    if malware_support.label != Label::Malware {
        return Err(Error::Validation(format!(
            "few-shot needs a malware support set, got {}",
            malware_support.label
        )));
    }
    let mean_benign = mean_support_similarity(model, benign_support, &query.vector)?;
    let mean_malware = mean_support_similarity(model, malware_support, &query.vector)?;
    let label = if mean_benign > mean_malware { Label::Benign } else { Label::Malware };
    Ok(Verdict {
        app_id: query.app_id.clone(),
        label,
        mean_benign,
        mean_malware: Some(mean_malware),
        threshold,
        mode: ClassifyMode::FewShot,
    })
}
