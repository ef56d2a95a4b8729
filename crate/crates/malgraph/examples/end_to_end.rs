//! Run the full pipeline from one configuration file.
//!
//! This drives the same command sequence as the CLI: synth, split,
//! build-graphs, train-vgae, embed, train-snn, classify, evaluate. Artifacts
//! land in a temporary directory and the evaluation report prints at the
//! end. With `configs/e2e.toml` the run is deterministic: repeating it
//! yields byte-identical artifacts.
//!
//!     cargo run --example end_to_end

use std::fs;
use std::path::Path;

use malgraph::pipeline::{load_run_config, run_command, Command, REPORT_TEXT_FILE};

fn main() -> malgraph::Result<()> {
    let config_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/e2e.toml");
    let mut config = load_run_config(&config_path)?;

    let out = tempfile::tempdir().expect("temporary directory");
    config.paths.out_dir = out.path().to_path_buf();

    for command in Command::FULL_PIPELINE {
        println!("running {command}...");
        run_command(command, &config)?;
    }

    let report = fs::read_to_string(config.paths.artifact(REPORT_TEXT_FILE))
        .expect("evaluate writes the text report");
    println!("\n{report}");
    Ok(())
}
