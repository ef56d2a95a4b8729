//! Pipeline artifacts: fixed file names, versioned JSONL containers, and
//! atomic writes.
//!
//! Every JSONL artifact opens with a header line naming its format, version,
//! and, where it matters, the vocabulary hash and float mode it was produced
//! under. Loaders refuse mismatches instead of guessing. Writes go to a
//! sibling temp file first and land with a rename, so a crashed command
//! never leaves a half-written artifact behind.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::callgraph::{ApiCallGraph, Label};
use crate::error::{Error, Result};
use crate::numerics::{as_f64, real, Scalar};
use crate::vgae::Embedding;
use crate::zeroshot::{ClassifyMode, Verdict};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MAPPING_FILE: &str = "mapping.txt";
pub const EXTENSION_FILE: &str = "extension.txt";
pub const SPLIT_FILE: &str = "split.tsv";
pub const GRAPHS_FILE: &str = "graphs.jsonl";
pub const VGAE_MODEL_FILE: &str = "vgae_model.json";
pub const VGAE_HISTORY_FILE: &str = "vgae_training.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";
pub const SNN_MODEL_FILE: &str = "snn_model.json";
pub const SNN_HISTORY_FILE: &str = "snn_training.jsonl";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const SWEEP_CSV_FILE: &str = "sweep.csv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";

pub const GRAPHS_FORMAT: &str = "malgraph-graphs";
pub const EMBEDDINGS_FORMAT: &str = "malgraph-embeddings";
pub const VERDICTS_FORMAT: &str = "malgraph-verdicts";
pub const HISTORY_FORMAT: &str = "malgraph-history";
pub const ARTIFACT_VERSION: u32 = 1;

/// First line of every JSONL artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub float_mode: Option<String>,
}

impl ArtifactHeader {
    pub fn new(format: &str) -> Self {
        ArtifactHeader {
            format: format.to_string(),
            version: ARTIFACT_VERSION,
            vocab_hash: None,
            vocab_size: None,
            float_mode: None,
        }
    }

    pub fn with_vocab(mut self, hash: &str, size: usize) -> Self {
        self.vocab_hash = Some(hash.to_string());
        self.vocab_size = Some(size);
        self
    }

    pub fn with_float_mode(mut self, mode: &str) -> Self {
        self.float_mode = Some(mode.to_string());
        self
    }

    fn check(&self, expected_format: &str, path: &Path) -> Result<()> {
        if self.format != expected_format {
            return Err(Error::Format(format!(
                "{}: expected format {expected_format}, found {}",
                path.display(),
                self.format
            )));
        }
        if self.version != ARTIFACT_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported version {} (this build reads {ARTIFACT_VERSION})",
                path.display(),
                self.version
            )));
        }
        Ok(())
    }

    /// Fail unless the artifact was produced in float mode `expected`.
    pub fn check_float_mode(&self, expected: &str, path: &Path) -> Result<()> {
        match &self.float_mode {
            Some(mode) if mode == expected => Ok(()),
            Some(mode) => Err(Error::Format(format!(
                "{}: artifact was written in {mode} mode, run is in {expected} mode",
                path.display()
            ))),
            None => Err(Error::Format(format!(
                "{}: artifact does not record a float mode",
                path.display()
            ))),
        }
    }
}

/// Write `bytes` to `path` atomically via a sibling temp file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let tmp = temp_sibling(path);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Temp name next to the target, so the final rename stays on one
/// filesystem.
pub fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Serialize a header plus one record per line and write atomically.
pub fn write_jsonl<R: Serialize>(
    path: &Path,
    header: &ArtifactHeader,
    records: &[R],
) -> Result<()> {
    let mut out = serde_json::to_string(header).map_err(|e| Error::Format(e.to_string()))?;
    out.push('\n');
    for record in records {
        out.push_str(&serde_json::to_string(record).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Read a whole JSONL artifact, checking the header. A missing file becomes
/// a dependency error naming `producer`.
pub fn read_jsonl<R: DeserializeOwned>(
    path: &Path,
    expected_format: &str,
    producer: &'static str,
) -> Result<(ArtifactHeader, Vec<R>)> {
    let text = read_artifact(path, producer)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| {
        Error::Format(format!("{}: artifact is empty, expected a header line", path.display()))
    })?;
    let header: ArtifactHeader = parse_line(first, path, 1)?;
    header.check(expected_format, path)?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(line, path, idx + 1)?);
    }
    Ok((header, records))
}

fn parse_line<R: DeserializeOwned>(line: &str, path: &Path, line_no: usize) -> Result<R> {
    let de = &mut serde_json::Deserializer::from_str(line);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        location: format!("{}:{line_no} field {}", path.display(), e.path()),
        detail: e.inner().to_string(),
    })
}

/// Read a text artifact; a missing file becomes a dependency error naming
/// the command that produces it.
pub fn read_artifact(path: &Path, producer: &'static str) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            Err(Error::Dependency { artifact: path.to_path_buf(), producer })
        }
        Err(e) => Err(Error::io(path, e)),
    }
}

/// One graph as stored in the graph artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub app_id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<chrono::NaiveDate>,
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl GraphRecord {
    pub fn from_graph(graph: &ApiCallGraph) -> Self {
        GraphRecord {
            app_id: graph.app_id.clone(),
            label: graph.label,
            family: graph.family.clone(),
            timestamp: graph.timestamp,
            nodes: graph.nodes.clone(),
            edges: graph.edges.iter().copied().collect(),
        }
    }

    /// Rebuild the graph, re-checking that edges connect stored nodes.
    pub fn into_graph(self) -> Result<ApiCallGraph> {
        let nodes = self.nodes;
        for pair in nodes.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Format(format!(
                    "graph {}: node list is not strictly increasing",
                    self.app_id
                )));
            }
        }
        for &(from, to) in &self.edges {
            if nodes.binary_search(&from).is_err() || nodes.binary_search(&to).is_err() {
                return Err(Error::Format(format!(
                    "graph {}: edge ({from}, {to}) references a node that is not stored",
                    self.app_id
                )));
            }
        }
        Ok(ApiCallGraph {
            app_id: self.app_id,
            label: self.label,
            family: self.family,
            timestamp: self.timestamp,
            nodes,
            edges: self.edges.into_iter().collect(),
        })
    }
}

/// One embedding as stored in the embedding artifact. Values are written as
/// 64-bit decimals, which is exact for both float modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub app_id: String,
    pub label: Label,
    pub vector: Vec<f64>,
}

impl EmbeddingRecord {
    pub fn from_embedding<T: Scalar>(e: &Embedding<T>) -> Self {
        EmbeddingRecord {
            app_id: e.app_id.clone(),
            label: e.label,
            vector: e.vector.iter().map(|&x| as_f64(x)).collect(),
        }
    }

    pub fn into_embedding<T: Scalar>(self) -> Embedding<T> {
        Embedding {
            app_id: self.app_id,
            label: self.label,
            vector: self.vector.into_iter().map(real).collect(),
        }
    }
}

/// One verdict as stored in the verdict artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub app_id: String,
    pub label: Label,
    pub mean_benign: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_malware: Option<f64>,
    pub threshold: f64,
    pub mode: ClassifyMode,
}

impl VerdictRecord {
    pub fn from_verdict<T: Scalar>(v: &Verdict<T>) -> Self {
        VerdictRecord {
            app_id: v.app_id.clone(),
            label: v.label,
            mean_benign: as_f64(v.mean_benign),
            mean_malware: v.mean_malware.map(as_f64),
            threshold: as_f64(v.threshold),
            mode: v.mode,
        }
    }
}
