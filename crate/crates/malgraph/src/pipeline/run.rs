//! The nine pipeline commands.
//!
//! Each command reads its declared inputs, writes its outputs atomically,
//! and logs the effective seed it derived from the master seed. Commands
//! never mutate their inputs, so a command re-run with the same inputs and
//! seed reproduces its outputs byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;

use serde::Serialize;

use crate::callgraph::{
    build_app_graph, extend_vocab, load_api_mapping, load_corpus, write_corpus, ApiCallGraph,
    Label,
};
use crate::dataset::{
    clean_manifest, family_disjoint_split, five_fold, load_manifest, load_split, time_split,
    write_split, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{best_by_f1, threshold_sweep, EvalReport, SweepPoint};
use crate::numerics::{real, Scalar};
use crate::persist::ModelDocument;
use crate::seeds::{stage_rng, stage_seed};
use crate::snn::{train_snn, SnnModel};
use crate::vgae::{embed_graph, train_vgae, Embedding, VgaeModel};
use crate::zeroshot::{build_support_set, classify_few_shot, classify_zero_shot, ClassifyMode};

use super::config::{RunConfig, SplitStrategy};
use super::formats::{
    atomic_write, read_artifact, read_jsonl, temp_sibling, write_jsonl, ArtifactHeader,
    EmbeddingRecord, GraphRecord, VerdictRecord, EMBEDDINGS_FILE, EMBEDDINGS_FORMAT, GRAPHS_FILE,
    GRAPHS_FORMAT, HISTORY_FORMAT, REPORT_JSON_FILE, REPORT_TEXT_FILE, SNN_HISTORY_FILE,
    SNN_MODEL_FILE, SWEEP_CSV_FILE, SWEEP_JSON_FILE, VERDICTS_FILE, VERDICTS_FORMAT,
    VGAE_HISTORY_FILE, VGAE_MODEL_FILE,
};

/// One pipeline command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Split,
    BuildGraphs,
    TrainVgae,
    Embed,
    TrainSnn,
    Classify,
    Evaluate,
    Sweep,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Split => "split",
            Command::BuildGraphs => "build-graphs",
            Command::TrainVgae => "train-vgae",
            Command::Embed => "embed",
            Command::TrainSnn => "train-snn",
            Command::Classify => "classify",
            Command::Evaluate => "evaluate",
            Command::Sweep => "sweep",
        }
    }

    /// The commands of a full synthetic run, in dependency order.
    pub const FULL_PIPELINE: [Command; 8] = [
        Command::Synth,
        Command::Split,
        Command::BuildGraphs,
        Command::TrainVgae,
        Command::Embed,
        Command::TrainSnn,
        Command::Classify,
        Command::Evaluate,
    ];
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Validate the configuration and run one command under the configured
/// float width.
pub fn run_command(command: Command, config: &RunConfig) -> Result<()> {
    config.validate()?;
    match config.pipeline.float {
        32 => dispatch::<f32>(command, config),
        64 => dispatch::<f64>(command, config),
        other => Err(Error::Config(format!("pipeline.float must be 32 or 64, got {other}"))),
    }
}

fn dispatch<T: Scalar>(command: Command, config: &RunConfig) -> Result<()> {
    match command {
        Command::Synth => cmd_synth(config),
        Command::Split => cmd_split(config),
        Command::BuildGraphs => cmd_build_graphs(config),
        Command::TrainVgae => cmd_train_vgae::<T>(config),
        Command::Embed => cmd_embed::<T>(config),
        Command::TrainSnn => cmd_train_snn::<T>(config),
        Command::Classify => cmd_classify::<T>(config),
        Command::Evaluate => cmd_evaluate(config),
        Command::Sweep => cmd_sweep(config),
    }
}

fn cmd_synth(config: &RunConfig) -> Result<()> {
    let seed = config.pipeline.seed;
    log::info!("synth: master seed {seed}");
    let corpus = crate::dataset::generate_corpus(&config.synth, seed)?;

    let mut listing_bytes = Vec::new();
    write_corpus(&mut listing_bytes, &corpus.listings)
        .map_err(|e| Error::io(config.paths.corpus().path, e))?;
    atomic_write(&config.paths.corpus().path, &listing_bytes)?;

    let mut manifest_text = String::new();
    for entry in &corpus.manifest {
        manifest_text
            .push_str(&serde_json::to_string(entry).map_err(|e| Error::Format(e.to_string()))?);
        manifest_text.push('\n');
    }
    atomic_write(&config.paths.manifest().path, manifest_text.as_bytes())?;

    atomic_write(&config.paths.mapping().path, lines_text(&corpus.mapping_lines).as_bytes())?;
    atomic_write(&config.paths.extension().path, lines_text(&corpus.extension_lines).as_bytes())?;
    log::info!(
        "synth: wrote {} listings, {} manifest entries",
        corpus.listings.len(),
        corpus.manifest.len()
    );
    Ok(())
}

fn lines_text(lines: &[String]) -> String {
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn cmd_split(config: &RunConfig) -> Result<()> {
    let entries = load_manifest(config.paths.manifest().require()?)?;
    let (kept, report) = clean_manifest(&entries);
    if report.dropped() > 0 {
        log::info!(
            "split: cleaning dropped {} of {} manifest entries",
            report.dropped(),
            entries.len()
        );
    }
    let seed = stage_seed(config.pipeline.seed, "split");
    log::info!("split: stage seed {seed}");
    let mut rng = stage_rng(config.pipeline.seed, "split");
    let section = &config.split;
    let mut spec = match section.strategy {
        SplitStrategy::FamilyDisjoint => {
            family_disjoint_split(&kept, section.test_fraction, section.support_pool, &mut rng)?
        }
        SplitStrategy::FiveFold => {
            let folds = five_fold(&kept, section.support_pool, &mut rng)?;
            folds
                .into_iter()
                .nth(section.fold)
                .expect("validate() pins fold below the fold count")
        }
        SplitStrategy::Time => {
            let cutoff = section.cutoff.expect("validate() requires a cutoff for time splits");
            time_split(&kept, cutoff, section.support_pool, &mut rng)?
        }
    };
    spec.meta.push(("seed".into(), config.pipeline.seed.to_string()));

    let path = config.paths.split_file().path;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = temp_sibling(&path);
    write_split(&tmp, &spec)?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    log::info!(
        "split: {} train / {} test / {} support, test families {:?}",
        spec.train.len(),
        spec.test.len(),
        spec.support.len(),
        spec.test_families
    );
    Ok(())
}

fn cmd_build_graphs(config: &RunConfig) -> Result<()> {
    let mut vocab = load_api_mapping(config.paths.mapping().require()?)?;
    let extension = config.paths.extension();
    if extension.path.is_file() {
        vocab = extend_vocab(vocab, &extension.path)?;
    } else if extension.explicit {
        return Err(Error::Config(format!(
            "paths.extension: {} does not exist",
            extension.path.display()
        )));
    }
    let corpus = load_corpus(config.paths.corpus().require()?)?;
    if config.pipeline.restrict_vocab {
        vocab = vocab.restrict(&corpus)?;
    }

    let mut records = Vec::with_capacity(corpus.len());
    let mut skipped = 0usize;
    for listing in &corpus {
        match build_app_graph(listing, &vocab, &config.pipeline.prefix_filters) {
            Ok(graph) => records.push(GraphRecord::from_graph(&graph)),
            Err(Error::EmptyGraph { app_id }) => {
                log::warn!("build-graphs: skipping {app_id}, no vocabulary API is reachable");
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(Error::Validation(format!(
            "no app in the corpus produced a graph ({skipped} empty apps skipped)"
        )));
    }
    let header = ArtifactHeader::new(GRAPHS_FORMAT).with_vocab(&vocab.hash(), vocab.len());
    write_jsonl(&config.paths.artifact(GRAPHS_FILE), &header, &records)?;
    log::info!(
        "build-graphs: {} graphs over a vocabulary of {} ({} apps skipped)",
        records.len(),
        vocab.len(),
        skipped
    );
    Ok(())
}

/// Graph artifact plus the vocabulary facts later stages need.
fn load_graphs(config: &RunConfig) -> Result<(String, usize, Vec<ApiCallGraph>)> {
    let path = config.paths.artifact(GRAPHS_FILE);
    let (header, records) = read_jsonl::<GraphRecord>(&path, GRAPHS_FORMAT, "build-graphs")?;
    let vocab_hash = header.vocab_hash.ok_or_else(|| {
        Error::Format(format!("{}: graph artifact lacks a vocabulary hash", path.display()))
    })?;
    let vocab_size = header.vocab_size.ok_or_else(|| {
        Error::Format(format!("{}: graph artifact lacks the vocabulary size", path.display()))
    })?;
    let graphs = records.into_iter().map(GraphRecord::into_graph).collect::<Result<Vec<_>>>()?;
    Ok((vocab_hash, vocab_size, graphs))
}

fn load_split_spec(config: &RunConfig) -> Result<SplitSpec> {
    load_split(config.paths.split_file().require()?)
}

/// Items for the given role ids, in artifact order. Every id must resolve
/// to exactly one item.
fn select_by_ids<'a, I>(
    items: &'a [I],
    id_of: impl Fn(&I) -> &str,
    ids: &[String],
    role: &str,
) -> Result<Vec<&'a I>> {
    let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let have: BTreeSet<&str> = items.iter().map(|i| id_of(i)).collect();
    if let Some(missing) = wanted.iter().find(|id| !have.contains(**id)) {
        return Err(Error::Validation(format!(
            "{role} app {missing} has no entry in the upstream artifact"
        )));
    }
    let selected: Vec<&I> = items.iter().filter(|i| wanted.contains(id_of(i))).collect();
    if selected.len() != wanted.len() {
        return Err(Error::Validation(format!(
            "upstream artifact stores duplicate entries for some {role} apps"
        )));
    }
    Ok(selected)
}

fn cmd_train_vgae<T: Scalar>(config: &RunConfig) -> Result<()> {
    let (vocab_hash, vocab_size, graphs) = load_graphs(config)?;
    let split = load_split_spec(config)?;
    let train: Vec<ApiCallGraph> =
        select_by_ids(&graphs, |g| &g.app_id, &split.train, "train")?.into_iter().cloned().collect();

    let seed = stage_seed(config.pipeline.seed, "train-vgae");
    log::info!("train-vgae: stage seed {seed}, {} training graphs", train.len());
    let train_config = config.vgae.to_train_config(seed);
    let (model, history) = train_vgae::<T>(&train, vocab_size, &train_config)?;
    if let Some(last) = history.last() {
        log::info!(
            "train-vgae: epoch {} mean loss {:.6} (recon {:.6}, kl {:.6}, class {:.6})",
            last.epoch,
            last.total,
            last.recon,
            last.kl,
            last.class
        );
    }

    let doc = model.to_document(&vocab_hash, config.pipeline.param_encoding);
    let mut json = doc.to_json();
    json.push('\n');
    atomic_write(&config.paths.artifact(VGAE_MODEL_FILE), json.as_bytes())?;

    let header = ArtifactHeader::new(HISTORY_FORMAT).with_float_mode(T::NAME);
    write_jsonl(&config.paths.artifact(VGAE_HISTORY_FILE), &header, &history)
}

fn load_model_doc(config: &RunConfig, file: &str, producer: &'static str) -> Result<ModelDocument> {
    let path = config.paths.artifact(file);
    let text = read_artifact(&path, producer)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn cmd_embed<T: Scalar>(config: &RunConfig) -> Result<()> {
    let (vocab_hash, _, graphs) = load_graphs(config)?;
    let doc = load_model_doc(config, VGAE_MODEL_FILE, "train-vgae")?;
    let model: VgaeModel<T> = VgaeModel::from_document(doc, Some(&vocab_hash))?;

    let mut records = Vec::with_capacity(graphs.len());
    for graph in &graphs {
        let vector = embed_graph(&model, graph)?;
        let embedding = Embedding { app_id: graph.app_id.clone(), label: graph.label, vector };
        records.push(EmbeddingRecord::from_embedding(&embedding));
    }
    let header = ArtifactHeader::new(EMBEDDINGS_FORMAT)
        .with_vocab(&vocab_hash, model.vocab_size())
        .with_float_mode(T::NAME);
    write_jsonl(&config.paths.artifact(EMBEDDINGS_FILE), &header, &records)?;
    log::info!("embed: {} embeddings", records.len());
    Ok(())
}

/// Embedding artifact plus its vocabulary hash, decoded into `T` after the
/// float-mode check.
fn load_embeddings<T: Scalar>(config: &RunConfig) -> Result<(String, Vec<Embedding<T>>)> {
    let path = config.paths.artifact(EMBEDDINGS_FILE);
    let (header, records) = read_jsonl::<EmbeddingRecord>(&path, EMBEDDINGS_FORMAT, "embed")?;
    header.check_float_mode(T::NAME, &path)?;
    let vocab_hash = header.vocab_hash.ok_or_else(|| {
        Error::Format(format!("{}: embedding artifact lacks a vocabulary hash", path.display()))
    })?;
    Ok((vocab_hash, records.into_iter().map(EmbeddingRecord::into_embedding).collect()))
}

fn cmd_train_snn<T: Scalar>(config: &RunConfig) -> Result<()> {
    let (vocab_hash, embeddings) = load_embeddings::<T>(config)?;
    let split = load_split_spec(config)?;
    let train: Vec<Embedding<T>> =
        select_by_ids(&embeddings, |e| &e.app_id, &split.train, "train")?
            .into_iter()
            .cloned()
            .collect();

    let seed = stage_seed(config.pipeline.seed, "train-snn");
    log::info!("train-snn: stage seed {seed}, {} training embeddings", train.len());
    let train_config = config.snn.to_train_config(seed);
    let (model, history) = train_snn::<T>(&train, &train_config)?;
    if let Some(last) = history.last() {
        log::info!(
            "train-snn: epoch {} mean pair loss {:.6}, pair accuracy {:.4}",
            last.epoch,
            last.loss,
            last.pair_accuracy
        );
    }

    let doc = model.to_document(&vocab_hash, config.pipeline.param_encoding);
    let mut json = doc.to_json();
    json.push('\n');
    atomic_write(&config.paths.artifact(SNN_MODEL_FILE), json.as_bytes())?;

    let header = ArtifactHeader::new(HISTORY_FORMAT).with_float_mode(T::NAME);
    write_jsonl(&config.paths.artifact(SNN_HISTORY_FILE), &header, &history)
}

fn cmd_classify<T: Scalar>(config: &RunConfig) -> Result<()> {
    let (vocab_hash, embeddings) = load_embeddings::<T>(config)?;
    let split = load_split_spec(config)?;
    let doc = load_model_doc(config, SNN_MODEL_FILE, "train-snn")?;
    let model: SnnModel<T> = SnnModel::from_document(doc, Some(&vocab_hash))?;

    let seed = stage_seed(config.pipeline.seed, "classify");
    let mode = config.pipeline.mode;
    log::info!(
        "classify: stage seed {seed}, mode {mode}, threshold {}",
        config.pipeline.threshold
    );
    let mut rng = stage_rng(config.pipeline.seed, "classify");
    let threshold: T = real(config.pipeline.threshold);

    let support_pool: Vec<Embedding<T>> =
        select_by_ids(&embeddings, |e| &e.app_id, &split.support, "support")?
            .into_iter()
            .cloned()
            .collect();
    let benign_support =
        build_support_set(&support_pool, Label::Benign, config.pipeline.support_size, &mut rng)?;

    // The few-shot malware references come from the training side, so test
    // families stay unseen and the test set stays untouched.
    let malware_support = match mode {
        ClassifyMode::ZeroShot => None,
        ClassifyMode::FewShot => {
            let train = select_by_ids(&embeddings, |e| &e.app_id, &split.train, "train")?;
            let pool: Vec<Embedding<T>> = train
                .into_iter()
                .filter(|e| e.label == Label::Malware)
                .cloned()
                .collect();
            Some(build_support_set(&pool, Label::Malware, config.pipeline.support_size, &mut rng)?)
        }
    };

    let queries = select_by_ids(&embeddings, |e| &e.app_id, &split.test, "test")?;
    let mut records = Vec::with_capacity(queries.len());
    for query in queries {
        let verdict = match &malware_support {
            None => classify_zero_shot(&model, &benign_support, query, threshold)?,
            Some(malware) => {
                classify_few_shot(&model, &benign_support, malware, query, threshold)?
            }
        };
        records.push(VerdictRecord::from_verdict(&verdict));
    }
    let mut header = ArtifactHeader::new(VERDICTS_FORMAT).with_float_mode(T::NAME);
    header.vocab_hash = Some(vocab_hash);
    write_jsonl(&config.paths.artifact(VERDICTS_FILE), &header, &records)?;
    let malware_count = records.iter().filter(|r| r.label == Label::Malware).count();
    log::info!(
        "classify: {} verdicts, {} flagged as malware",
        records.len(),
        malware_count
    );
    Ok(())
}

/// Truth labels and families from the manifest, definite labels only.
fn load_truth(config: &RunConfig) -> Result<(BTreeMap<String, Label>, BTreeMap<String, String>)> {
    let entries = load_manifest(config.paths.manifest().require()?)?;
    let mut truth = BTreeMap::new();
    let mut families = BTreeMap::new();
    for entry in entries {
        if let Some(label) = entry.label.to_label() {
            truth.insert(entry.app_id.clone(), label);
        }
        if let Some(family) = entry.family {
            families.insert(entry.app_id, family);
        }
    }
    Ok((truth, families))
}

fn load_verdicts(config: &RunConfig) -> Result<Vec<VerdictRecord>> {
    let path = config.paths.artifact(VERDICTS_FILE);
    let (_, records) = read_jsonl::<VerdictRecord>(&path, VERDICTS_FORMAT, "classify")?;
    Ok(records)
}

fn cmd_evaluate(config: &RunConfig) -> Result<()> {
    let verdicts = load_verdicts(config)?;
    let (truth, families) = load_truth(config)?;
    let predictions: Vec<(String, Label)> =
        verdicts.iter().map(|v| (v.app_id.clone(), v.label)).collect();
    let report = EvalReport::new(&predictions, &truth, &families)?;

    let mut json =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    json.push('\n');
    atomic_write(&config.paths.artifact(REPORT_JSON_FILE), json.as_bytes())?;
    let text = report.render_text();
    atomic_write(&config.paths.artifact(REPORT_TEXT_FILE), text.as_bytes())?;
    log::info!("evaluate:\n{text}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepDocument {
    points: Vec<SweepPoint>,
    best_threshold: Option<f64>,
}

fn cmd_sweep(config: &RunConfig) -> Result<()> {
    let verdicts = load_verdicts(config)?;
    let (truth, _) = load_truth(config)?;
    let scores: Vec<(String, f64)> =
        verdicts.iter().map(|v| (v.app_id.clone(), v.mean_benign)).collect();
    let points = threshold_sweep(&scores, &truth, &config.sweep.grid())?;
    let best = best_by_f1(&points).map(|p| p.threshold);

    let mut csv = String::from("threshold,accuracy,f1\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{}\n",
            p.threshold,
            csv_cell(p.metrics.accuracy),
            csv_cell(p.metrics.f1)
        ));
    }
    atomic_write(&config.paths.artifact(SWEEP_CSV_FILE), csv.as_bytes())?;

    let doc = SweepDocument { points, best_threshold: best };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    json.push('\n');
    atomic_write(&config.paths.artifact(SWEEP_JSON_FILE), json.as_bytes())?;
    match best {
        Some(t) => log::info!("sweep: best F1 at threshold {t}"),
        None => log::info!("sweep: no threshold admits an F1 score"),
    }
    Ok(())
}

fn csv_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_match_the_cli_surface() {
        let names: Vec<&str> = [
            Command::BuildGraphs,
            Command::TrainVgae,
            Command::Embed,
            Command::TrainSnn,
            Command::Classify,
            Command::Evaluate,
            Command::Sweep,
            Command::Synth,
            Command::Split,
        ]
        .iter()
        .map(Command::name)
        .collect();
        assert_eq!(
            names,
            [
                "build-graphs",
                "train-vgae",
                "embed",
                "train-snn",
                "classify",
                "evaluate",
                "sweep",
                "synth",
                "split"
            ]
        );
    }

    #[test]
    fn selection_reports_missing_and_duplicate_ids() {
        let items = vec![
            ("a".to_string(), 1),
            ("b".to_string(), 2),
            ("b".to_string(), 3),
        ];
        let sel = select_by_ids(&items, |i| &i.0, &["a".to_string()], "test").unwrap();
        assert_eq!(sel.len(), 1);

        let err =
            select_by_ids(&items, |i| &i.0, &["ghost".to_string()], "test").unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");

        let err = select_by_ids(&items, |i| &i.0, &["b".to_string()], "test").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }
}
