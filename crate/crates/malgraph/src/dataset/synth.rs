//! Synthetic corpus generator.
//!
//! Real call listings are large and licensed; the generator produces a
//! corpus with the same shape from a small motif grammar. Benign apps are
//! built from a shared pool of benign motifs that only touch the lower two
//! thirds of the vocabulary. Each malware family owns a few motifs drawn
//! from the sensitive top third, which benign apps never call. Motifs are
//! pairwise distinct across every pool, so held-out families are genuinely
//! unseen, while the shared sensitive region is what makes them detectable
//! at all. Noise insertions stay inside the benign region: they perturb
//! graph structure without ever planting a sensitive API in a benign app,
//! so the classes remain separable by construction at any noise level.
//!
//! Every app is generated from its own seed substream, so one app's
//! listing never depends on how many other apps exist.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::callgraph::{CallItem, CallListing, Label, MethodListing};
use crate::dataset::manifest::{ManifestEntry, RawLabel};
use crate::error::{Error, Result};
use crate::seeds::{item_rng, stage_rng};

fn default_vocab_size() -> usize {
    60
}
fn default_benign_motifs() -> usize {
    8
}
fn default_families() -> usize {
    6
}
fn default_motifs_per_family() -> usize {
    3
}
fn default_motif_len_min() -> usize {
    3
}
fn default_motif_len_max() -> usize {
    6
}
fn default_benign_apps() -> usize {
    300
}
fn default_apps_per_family() -> usize {
    50
}
fn default_benign_motifs_per_app() -> (usize, usize) {
    (2, 5)
}
fn default_family_motifs_per_app() -> (usize, usize) {
    (1, 3)
}
fn default_noise() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_vocab_size")]
    pub vocab_size: usize,
    #[serde(default = "default_benign_motifs")]
    pub benign_motifs: usize,
    #[serde(default = "default_families")]
    pub families: usize,
    #[serde(default = "default_motifs_per_family")]
    pub motifs_per_family: usize,
    #[serde(default = "default_motif_len_min")]
    pub motif_len_min: usize,
    #[serde(default = "default_motif_len_max")]
    pub motif_len_max: usize,
    #[serde(default = "default_benign_apps")]
    pub benign_apps: usize,
    #[serde(default = "default_apps_per_family")]
    pub apps_per_family: usize,
    #[serde(default = "default_benign_motifs_per_app")]
    pub benign_motifs_per_app: (usize, usize),
    #[serde(default = "default_family_motifs_per_app")]
    pub family_motifs_per_app: (usize, usize),
    /// Probability of inserting a random benign-region API after any call.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: default_vocab_size(),
            benign_motifs: default_benign_motifs(),
            families: default_families(),
            motifs_per_family: default_motifs_per_family(),
            motif_len_min: default_motif_len_min(),
            motif_len_max: default_motif_len_max(),
            benign_apps: default_benign_apps(),
            apps_per_family: default_apps_per_family(),
            benign_motifs_per_app: default_benign_motifs_per_app(),
            family_motifs_per_app: default_family_motifs_per_app(),
            noise: default_noise(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 9 {
            return Err(Error::Config("synth vocab_size must be at least 9".into()));
        }
        if self.benign_motifs == 0 || self.motifs_per_family == 0 {
            return Err(Error::Config("synth needs at least one motif per pool".into()));
        }
        if self.families < 2 {
            return Err(Error::Config(
                "synth needs at least two malware families for a family-disjoint split".into(),
            ));
        }
        if self.motif_len_min < 2 || self.motif_len_max < self.motif_len_min {
            return Err(Error::Config(
                "synth motif lengths must satisfy 2 <= min <= max".into(),
            ));
        }
        if self.benign_apps == 0 || self.apps_per_family == 0 {
            return Err(Error::Config("synth app counts must be positive".into()));
        }
        for (name, (lo, hi)) in [
            ("benign_motifs_per_app", self.benign_motifs_per_app),
            ("family_motifs_per_app", self.family_motifs_per_app),
        ] {
            if lo == 0 || hi < lo {
                return Err(Error::Config(format!(
                    "synth {name} must satisfy 1 <= min <= max"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config("synth noise must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Benign motifs draw from `[0, benign_hi)`.
    fn benign_hi(&self) -> usize {
        self.vocab_size * 2 / 3
    }

    /// Family motifs draw from `[family_lo, vocab)`.
    fn family_lo(&self) -> usize {
        self.vocab_size * 2 / 3
    }

    /// APIs in `[sensitive_lo, vocab)` never occur in benign motifs; every
    /// family motif contains at least one.
    fn sensitive_lo(&self) -> usize {
        self.benign_hi()
    }
}

/// A generated corpus plus the vocabulary files that describe it.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest: Vec<ManifestEntry>,
    pub listings: Vec<CallListing>,
    /// Sensitive-API mapping in the identifier-per-line format; roughly the
    /// first three quarters of the vocabulary, some with permission columns.
    pub mapping_lines: Vec<String>,
    /// Extension list overlapping the tail of the mapping, so both
    /// provenances occur.
    pub extension_lines: Vec<String>,
}

pub fn api_name(index: usize) -> String {
    format!("Lsynth/gen/Api{index:03};->invoke{index:03}")
}

fn draw_motif(rng: &mut impl Rng, lo: usize, hi: usize, len: (usize, usize)) -> Vec<usize> {
    let n = rng.random_range(len.0..=len.1);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

struct MotifPools {
    benign: Vec<Vec<usize>>,
    families: Vec<Vec<Vec<usize>>>,
}

/// Draw a motif not yet in `seen`, redrawing on collision. Bounded so a
/// grammar whose motif space is smaller than the requested pool fails
/// instead of spinning.
fn draw_distinct_motif(
    rng: &mut impl Rng,
    seen: &mut BTreeSet<Vec<usize>>,
    config: &SynthConfig,
    lo: usize,
    hi: usize,
    force_sensitive: bool,
) -> Result<Vec<usize>> {
    let len = (config.motif_len_min, config.motif_len_max);
    for _ in 0..64 {
        let mut motif = draw_motif(rng, lo, hi, len);
        if force_sensitive && !motif.iter().any(|&a| a >= config.sensitive_lo()) {
            let slot = rng.random_range(0..motif.len());
            motif[slot] = rng.random_range(config.sensitive_lo()..config.vocab_size);
        }
        if seen.insert(motif.clone()) {
            return Ok(motif);
        }
    }
    Err(Error::Config(
        "synth motif space is too small for distinct motifs; raise vocab_size or motif lengths"
            .into(),
    ))
}

fn draw_pools(config: &SynthConfig, seed: u64) -> Result<MotifPools> {
    let mut rng = stage_rng(seed, "synth-motifs");
    let mut seen = BTreeSet::new();
    let mut benign = Vec::with_capacity(config.benign_motifs);
    for _ in 0..config.benign_motifs {
        benign.push(draw_distinct_motif(&mut rng, &mut seen, config, 0, config.benign_hi(), false)?);
    }
    let mut families = Vec::with_capacity(config.families);
    for _ in 0..config.families {
        let mut pool = Vec::with_capacity(config.motifs_per_family);
        for _ in 0..config.motifs_per_family {
            pool.push(draw_distinct_motif(
                &mut rng,
                &mut seen,
                config,
                config.family_lo(),
                config.vocab_size,
                true,
            )?);
        }
        families.push(pool);
    }
    Ok(MotifPools { benign, families })
}

/// Lay a motif down as one method, with noise insertions after any call.
/// Noise only draws from `[0, noise_hi)`, the benign region, so it never
/// grants a benign app a sensitive call.
fn motif_method(
    name: String,
    motif: &[usize],
    noise: f64,
    noise_hi: usize,
    rng: &mut impl Rng,
) -> MethodListing {
    let mut calls = Vec::with_capacity(motif.len());
    for &api in motif {
        calls.push(CallItem::api(api_name(api)));
        if noise > 0.0 && rng.random_bool(noise) {
            calls.push(CallItem::api(api_name(rng.random_range(0..noise_hi))));
        }
    }
    MethodListing { name, calls }
}

fn timestamp_for(index: usize) -> Option<NaiveDate> {
    NaiveDate::from_ymd_opt(2019, 1, 1)
        .unwrap()
        .checked_add_days(chrono::Days::new((index * 3 % 1460) as u64))
}

fn generate_app(
    config: &SynthConfig,
    pools: &MotifPools,
    seed: u64,
    app_id: &str,
    family: Option<usize>,
) -> CallListing {
    let mut rng = item_rng(seed, "synth-app", app_id);
    let mut methods = Vec::new();

    let (lo, hi) = config.benign_motifs_per_app;
    let benign_count = rng.random_range(lo..=hi);
    for m in 0..benign_count {
        let motif = &pools.benign[rng.random_range(0..pools.benign.len())];
        methods.push(motif_method(
            format!("base{m}"),
            motif,
            config.noise,
            config.benign_hi(),
            &mut rng,
        ));
    }
    if let Some(f) = family {
        let (lo, hi) = config.family_motifs_per_app;
        let count = rng.random_range(lo..=hi);
        for m in 0..count {
            let motif = &pools.families[f][rng.random_range(0..pools.families[f].len())];
            methods.push(motif_method(
                format!("payload{m}"),
                motif,
                config.noise,
                config.benign_hi(),
                &mut rng,
            ));
        }
    }
    // Occasional cross-method calls wire the methods into one graph.
    let names: Vec<String> = methods.iter().map(|m| m.name.clone()).collect();
    for i in 1..methods.len() {
        if rng.random_bool(0.3) {
            let callee = names[rng.random_range(0..i)].clone();
            let slot = rng.random_range(0..=methods[i].calls.len());
            methods[i].calls.insert(slot, CallItem::method(callee));
        }
    }

    CallListing {
        app_id: app_id.to_string(),
        label: if family.is_some() { Label::Malware } else { Label::Benign },
        family: family.map(|f| format!("fam{f}")),
        timestamp: None,
        methods,
    }
}

/// Generate the corpus for `config` under `seed`. Identical inputs give an
/// identical corpus, and each app only consumes its own seed substream.
pub fn generate_corpus(config: &SynthConfig, seed: u64) -> Result<SynthCorpus> {
    config.validate()?;
    let pools = draw_pools(config, seed)?;

    let mut manifest = Vec::new();
    let mut listings = Vec::new();
    let mut push_app = |app_id: String, package: String, family: Option<usize>, index: usize| {
        let mut listing = generate_app(config, &pools, seed, &app_id, family);
        let timestamp = timestamp_for(index);
        listing.timestamp = timestamp;
        manifest.push(ManifestEntry {
            app_id,
            package_name: package,
            label: if family.is_some() { RawLabel::Malware } else { RawLabel::Benign },
            family: family.map(|f| format!("fam{f}")),
            timestamp,
            detection_ratio: Some(if family.is_some() { 0.9 } else { 0.02 }),
        });
        listings.push(listing);
    };

    let mut index = 0;
    for i in 0..config.benign_apps {
        push_app(
            format!("synth-b-{i:04}"),
            format!("com.synth.benign.a{i:04}"),
            None,
            index,
        );
        index += 1;
    }
    for f in 0..config.families {
        for i in 0..config.apps_per_family {
            push_app(
                format!("synth-m{f}-{i:04}"),
                format!("com.synth.fam{f}.a{i:04}"),
                Some(f),
                index,
            );
            index += 1;
        }
    }

    // The mapping covers the first three quarters of the vocabulary; the
    // extension re-lists the last mapping quarter and adds the rest.
    let mapping_hi = config.vocab_size * 3 / 4;
    let extension_lo = config.vocab_size / 2;
    let mut mapping_lines = vec!["# synthetic sensitive API mapping".to_string()];
    for i in 0..mapping_hi {
        if i % 3 == 0 {
            mapping_lines.push(format!("{}\tandroid.permission.SYNTH_{}", api_name(i), i % 5));
        } else {
            mapping_lines.push(api_name(i));
        }
    }
    let mut extension_lines = vec!["# synthetic API extension".to_string()];
    for i in extension_lo..config.vocab_size {
        extension_lines.push(api_name(i));
    }

    Ok(SynthCorpus { manifest, listings, mapping_lines, extension_lines })
}
