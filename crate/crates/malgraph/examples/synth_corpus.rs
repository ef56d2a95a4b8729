//! Generate a synthetic corpus and summarize its shape.
//!
//! The generator builds benign apps from a shared motif pool and gives each
//! malware family its own motifs over the sensitive top third of the
//! vocabulary, so families are distinct but share the trait that makes
//! malware detectable.
//!
//!     cargo run --example synth_corpus

use std::collections::BTreeMap;

use malgraph::callgraph::{build_app_graph, default_prefix_filters, ApiVocab};
use malgraph::dataset::{generate_corpus, SynthConfig};

fn main() -> malgraph::Result<()> {
    let config = SynthConfig::default();
    let corpus = generate_corpus(&config, 11)?;

    let vocab = ApiVocab::from_mapping_lines(corpus.mapping_lines.iter().map(String::as_str))?
        .extend(corpus.extension_lines.iter().map(String::as_str));
    println!("vocabulary: {} sensitive APIs (hash {})", vocab.len(), vocab.hash());

    let mut per_family: BTreeMap<&str, usize> = BTreeMap::new();
    for entry in &corpus.manifest {
        *per_family.entry(entry.family.as_deref().unwrap_or("benign")).or_default() += 1;
    }
    println!("apps:");
    for (family, count) in &per_family {
        println!("  {family:8} {count}");
    }

    // Every listing builds a non-empty graph; sizes stay small because node
    // identity merges repeated API occurrences.
    let mut nodes = 0usize;
    let mut edges = 0usize;
    for listing in &corpus.listings {
        let graph = build_app_graph(listing, &vocab, &default_prefix_filters())?;
        nodes += graph.node_count();
        edges += graph.edges.len();
    }
    let n = corpus.listings.len();
    println!("graphs: {n}, mean {:.1} nodes / {:.1} edges", nodes as f64 / n as f64, edges as f64 / n as f64);
    Ok(())
}
