//! Run configuration: one TOML document drives every pipeline command.
//!
//! Input paths fall back to fixed names inside the output directory, so a
//! purely synthetic run needs nothing but `[synth]` options and an output
//! directory; a real-data run points `[paths]` at its own files. Whether a
//! path was configured explicitly decides how a missing file is reported:
//! explicit paths are configuration errors, defaulted paths are missing
//! artifacts that name the command that produces them.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::callgraph::default_prefix_filters;
use crate::dataset::SynthConfig;
use crate::error::{Error, Result};
use crate::persist::ParamEncoding;
use crate::snn::SnnTrainConfig;
use crate::vgae::{KlNorm, TrainConfig};
use crate::zeroshot::ClassifyMode;

use super::formats;

/// Input and output locations. Every optional path defaults to a fixed
/// artifact name inside `out_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out_dir: PathBuf,
    pub mapping: Option<PathBuf>,
    pub extension: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub split_file: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            out_dir: PathBuf::from("out"),
            mapping: None,
            extension: None,
            corpus: None,
            manifest: None,
            split_file: None,
        }
    }
}

/// A resolved input location plus whether the user named it explicitly.
#[derive(Debug, Clone)]
pub struct ResolvedInput {
    pub path: PathBuf,
    pub explicit: bool,
    /// TOML field that would have named this path.
    pub field: &'static str,
    /// Command whose output lands here when the path is defaulted.
    pub producer: &'static str,
}

impl ResolvedInput {
    /// The path, if the file exists; otherwise the error the contract
    /// prescribes for this input.
    pub fn require(&self) -> Result<&Path> {
        if self.path.is_file() {
            return Ok(&self.path);
        }
        if self.explicit {
            return Err(Error::Config(format!(
                "paths.{}: {} does not exist",
                self.field,
                self.path.display()
            )));
        }
        Err(Error::Dependency { artifact: self.path.clone(), producer: self.producer })
    }
}

impl Paths {
    fn resolve(
        &self,
        configured: &Option<PathBuf>,
        field: &'static str,
        default_name: &str,
        producer: &'static str,
    ) -> ResolvedInput {
        match configured {
            Some(p) => ResolvedInput { path: p.clone(), explicit: true, field, producer },
            None => ResolvedInput {
                path: self.out_dir.join(default_name),
                explicit: false,
                field,
                producer,
            },
        }
    }

    pub fn mapping(&self) -> ResolvedInput {
        self.resolve(&self.mapping, "mapping", formats::MAPPING_FILE, "synth")
    }

    pub fn extension(&self) -> ResolvedInput {
        self.resolve(&self.extension, "extension", formats::EXTENSION_FILE, "synth")
    }

    pub fn corpus(&self) -> ResolvedInput {
        self.resolve(&self.corpus, "corpus", formats::CORPUS_FILE, "synth")
    }

    pub fn manifest(&self) -> ResolvedInput {
        self.resolve(&self.manifest, "manifest", formats::MANIFEST_FILE, "synth")
    }

    pub fn split_file(&self) -> ResolvedInput {
        self.resolve(&self.split_file, "split_file", formats::SPLIT_FILE, "split")
    }

    /// Location of a fixed-name artifact inside the output directory.
    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Options shared across commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    /// Master seed; every stage derives its own substream from it.
    pub seed: u64,
    /// Float width, 32 or 64.
    pub float: u32,
    pub mode: ClassifyMode,
    pub threshold: f64,
    pub support_size: usize,
    /// Package prefixes whose call sites are dropped during graph building.
    pub prefix_filters: Vec<String>,
    /// Restrict the vocabulary to APIs the corpus actually calls.
    pub restrict_vocab: bool,
    pub param_encoding: ParamEncoding,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            seed: 0,
            float: 64,
            mode: ClassifyMode::ZeroShot,
            threshold: 0.5,
            support_size: 30,
            prefix_filters: default_prefix_filters(),
            restrict_vocab: false,
            param_encoding: ParamEncoding::Decimal,
        }
    }
}

/// VGAE training options. The stage seed is derived from the master seed,
/// so it is not configurable here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VgaeSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_norm: KlNorm,
}

impl Default for VgaeSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        VgaeSection {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            batch_size: d.batch_size,
            kl_norm: d.kl_norm,
        }
    }
}

impl VgaeSection {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            kl_norm: self.kl_norm,
            seed,
        }
    }
}

/// SNN training options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnnSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SnnSection {
    fn default() -> Self {
        let d = SnnTrainConfig::default();
        SnnSection { learning_rate: d.learning_rate, epochs: d.epochs, batch_size: d.batch_size }
    }
}

impl SnnSection {
    pub fn to_train_config(&self, seed: u64) -> SnnTrainConfig {
        SnnTrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    #[default]
    FamilyDisjoint,
    FiveFold,
    Time,
}

/// Split command options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub strategy: SplitStrategy,
    pub test_fraction: f64,
    /// Benign apps withheld for support drawing; must cover `support_size`.
    pub support_pool: usize,
    /// Which of the five folds becomes the active split file.
    pub fold: usize,
    /// Date boundary for the time strategy, as "YYYY-MM-DD".
    pub cutoff: Option<NaiveDate>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            strategy: SplitStrategy::FamilyDisjoint,
            test_fraction: 0.2,
            support_pool: 40,
            fold: 0,
            cutoff: None,
        }
    }
}

/// Threshold grid for the sweep command: `count` evenly spaced points from
/// `start` to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { start: 0.05, stop: 0.95, count: 19 }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub pipeline: PipelineOptions,
    pub vgae: VgaeSection,
    pub snn: SnnSection,
    pub split: SplitSection,
    pub synth: SynthConfig,
    pub sweep: SweepSection,
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<ClassifyMode>,
    pub threshold: Option<f64>,
    pub float: Option<u32>,
}

impl RunConfig {
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.pipeline.seed = seed;
        }
        if let Some(out) = &overrides.out {
            self.paths.out_dir = out.clone();
        }
        if let Some(mode) = overrides.mode {
            self.pipeline.mode = mode;
        }
        if let Some(threshold) = overrides.threshold {
            self.pipeline.threshold = threshold;
        }
        if let Some(float) = overrides.float {
            self.pipeline.float = float;
        }
    }

    /// Check every value range. Path existence is not checked here; each
    /// command checks the inputs it actually reads.
    pub fn validate(&self) -> Result<()> {
        if self.paths.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("paths.out_dir must not be empty".into()));
        }
        let p = &self.pipeline;
        if p.float != 32 && p.float != 64 {
            return Err(Error::Config(format!("pipeline.float must be 32 or 64, got {}", p.float)));
        }
        if !(p.threshold > 0.0 && p.threshold < 1.0) {
            return Err(Error::Config(format!(
                "pipeline.threshold must lie strictly between 0 and 1, got {}",
                p.threshold
            )));
        }
        if p.support_size == 0 {
            return Err(Error::Config("pipeline.support_size must be at least 1".into()));
        }
        for (section, lr, epochs, batch) in [
            ("vgae", self.vgae.learning_rate, self.vgae.epochs, self.vgae.batch_size),
            ("snn", self.snn.learning_rate, self.snn.epochs, self.snn.batch_size),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!(
                    "{section}.learning_rate must be positive and finite, got {lr}"
                )));
            }
            if epochs == 0 {
                return Err(Error::Config(format!("{section}.epochs must be at least 1")));
            }
            if batch == 0 {
                return Err(Error::Config(format!("{section}.batch_size must be at least 1")));
            }
        }
        let s = &self.split;
        if !(s.test_fraction > 0.0 && s.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split.test_fraction must lie strictly between 0 and 1, got {}",
                s.test_fraction
            )));
        }
        if s.support_pool < p.support_size {
            return Err(Error::Config(format!(
                "split.support_pool ({}) cannot cover pipeline.support_size ({})",
                s.support_pool, p.support_size
            )));
        }
        if s.fold >= 5 {
            return Err(Error::Config(format!("split.fold must be 0..=4, got {}", s.fold)));
        }
        if s.strategy == SplitStrategy::Time && s.cutoff.is_none() {
            return Err(Error::Config("split.cutoff is required for the time strategy".into()));
        }
        let w = &self.sweep;
        if !(w.start > 0.0 && w.stop < 1.0 && w.start.is_finite() && w.stop.is_finite()) {
            return Err(Error::Config(format!(
                "sweep grid must lie strictly between 0 and 1, got start {} stop {}",
                w.start, w.stop
            )));
        }
        if w.count == 0 {
            return Err(Error::Config("sweep.count must be at least 1".into()));
        }
        if w.count > 1 && !(w.start < w.stop) {
            return Err(Error::Config(format!(
                "sweep.start ({}) must be below sweep.stop ({}) when count > 1",
                w.start, w.stop
            )));
        }
        self.synth.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration serialization cannot fail")
    }
}

/// Parse and validate a configuration document. Parse failures name the
/// offending field; every failure here is a configuration error.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Load a configuration file.
pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => {
            return Err(Error::Config(format!("cannot read config {}: {e}", path.display())))
        }
    };
    parse_run_config(&text)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), config_detail(e))))
}

fn config_detail(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_yields_all_defaults() {
        let config = parse_run_config("").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.pipeline.threshold, 0.5);
        assert_eq!(config.pipeline.support_size, 30);
        assert_eq!(config.pipeline.float, 64);
        assert_eq!(config.vgae.learning_rate, 0.001);
        assert_eq!(config.vgae.epochs, 300);
        assert_eq!(config.vgae.batch_size, 32);
        assert_eq!(config.snn.learning_rate, 0.001);
        assert_eq!(config.snn.epochs, 4);
        assert_eq!(config.snn.batch_size, 64);
    }

    #[test]
    fn partial_sections_keep_unmentioned_defaults() {
        let config = parse_run_config("[vgae]\nepochs = 12\n").unwrap();
        assert_eq!(config.vgae.epochs, 12);
        assert_eq!(config.vgae.learning_rate, 0.001);
        assert_eq!(config.vgae.batch_size, 32);
    }

    #[test]
    fn round_trip_preserves_the_config() {
        let mut config = RunConfig::default();
        config.pipeline.seed = 99;
        config.pipeline.mode = ClassifyMode::FewShot;
        config.pipeline.float = 32;
        config.paths.corpus = Some(PathBuf::from("data/corpus.jsonl"));
        config.split.strategy = SplitStrategy::Time;
        config.split.cutoff = NaiveDate::from_ymd_opt(2020, 12, 31);
        config.synth.noise = 0.25;
        let text = config.to_toml();
        let reloaded = parse_run_config(&text).unwrap();
        assert_eq!(reloaded, config);
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        let bad = [
            "[pipeline]\nthreshold = 1.5\n",
            "[pipeline]\nthreshold = 0.0\n",
            "[pipeline]\nfloat = 48\n",
            "[pipeline]\nsupport_size = 0\n",
            "[vgae]\nlearning_rate = -0.5\n",
            "[vgae]\nepochs = 0\n",
            "[snn]\nbatch_size = 0\n",
            "[split]\ntest_fraction = 1.0\n",
            "[split]\nsupport_pool = 3\n",
            "[split]\nfold = 5\n",
            "[split]\nstrategy = \"time\"\n",
            "[sweep]\ncount = 0\n",
            "[sweep]\nstart = 0.9\nstop = 0.2\n",
            "[synth]\nvocab_size = 2\n",
        ];
        for text in bad {
            let err = parse_run_config(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text:?} should be a config error, got {err}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_run_config("[pipeline]\nthresold = 0.4\n").unwrap_err();
        assert!(err.to_string().contains("thresold"), "{err}");
    }

    #[test]
    fn defaulted_paths_resolve_into_the_output_directory() {
        let mut config = RunConfig::default();
        config.paths.out_dir = PathBuf::from("run7");
        let corpus = config.paths.corpus();
        assert_eq!(corpus.path, PathBuf::from("run7/corpus.jsonl"));
        assert!(!corpus.explicit);
        let err = corpus.require().unwrap_err();
        assert_eq!(err.exit_code(), 3, "defaulted missing input is a dependency error");
        assert!(err.to_string().contains("synth"), "{err}");

        config.paths.corpus = Some(PathBuf::from("run7/nowhere.jsonl"));
        let err = config.paths.corpus().require().unwrap_err();
        assert_eq!(err.exit_code(), 2, "explicit missing input is a config error");
        assert!(err.to_string().contains("paths.corpus"), "{err}");
    }

    #[test]
    fn overrides_reach_their_fields() {
        let mut config = RunConfig::default();
        config.apply(&Overrides {
            seed: Some(7),
            out: Some(PathBuf::from("elsewhere")),
            mode: Some(ClassifyMode::FewShot),
            threshold: Some(0.4),
            float: Some(32),
        });
        assert_eq!(config.pipeline.seed, 7);
        assert_eq!(config.paths.out_dir, PathBuf::from("elsewhere"));
        assert_eq!(config.pipeline.mode, ClassifyMode::FewShot);
        assert_eq!(config.pipeline.threshold, 0.4);
        assert_eq!(config.pipeline.float, 32);
    }

    #[test]
    fn sweep_grid_is_strictly_increasing_and_inclusive() {
        let grid = SweepSection { start: 0.1, stop: 0.9, count: 5 }.grid();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[4], 0.9);
        for pair in grid.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        assert_eq!(SweepSection { start: 0.5, stop: 0.5, count: 1 }.grid(), vec![0.5]);
    }
}
