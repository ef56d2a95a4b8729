//! Configuration-driven pipeline: one TOML document, nine commands, fixed
//! artifact names, derived per-stage seeds.

pub mod config;
pub mod formats;
pub mod run;

pub use config::{
    load_run_config, parse_run_config, Overrides, Paths, PipelineOptions, RunConfig, SplitSection,
    SplitStrategy, SnnSection, SweepSection, VgaeSection,
};
pub use formats::{
    ArtifactHeader, EmbeddingRecord, GraphRecord, VerdictRecord, EMBEDDINGS_FILE, GRAPHS_FILE,
    MANIFEST_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE, SNN_MODEL_FILE, SPLIT_FILE, SWEEP_CSV_FILE,
    SWEEP_JSON_FILE, VERDICTS_FILE, VGAE_MODEL_FILE,
};
pub use run::{run_command, Command};
