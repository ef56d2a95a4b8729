//! Train the variational graph autoencoder on a small synthetic corpus.
//!
//! The model learns to reconstruct adjacency while a classification head on
//! the mean-pooled latent keeps benign and malware embeddings apart. Watch
//! the total loss fall and then read one embedding per class.
//!
//!     cargo run --example train_vgae

use malgraph::callgraph::{build_app_graph, default_prefix_filters, ApiVocab, Label};
use malgraph::dataset::{generate_corpus, SynthConfig};
use malgraph::vgae::{embed_graph, TrainConfig};

fn main() -> malgraph::Result<()> {
    let config = SynthConfig {
        vocab_size: 24,
        benign_motifs: 5,
        families: 2,
        benign_apps: 40,
        apps_per_family: 15,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config, 7)?;
    let vocab = ApiVocab::from_mapping_lines(corpus.mapping_lines.iter().map(String::as_str))?
        .extend(corpus.extension_lines.iter().map(String::as_str));

    let graphs = corpus
        .listings
        .iter()
        .map(|listing| build_app_graph(listing, &vocab, &default_prefix_filters()))
        .collect::<malgraph::Result<Vec<_>>>()?;
    println!("training on {} graphs over {} APIs", graphs.len(), vocab.len());

    let train = TrainConfig { epochs: 40, learning_rate: 0.01, seed: 3, ..TrainConfig::default() };
    let (model, stats) = malgraph::vgae::train_vgae::<f64>(&graphs, vocab.len(), &train)?;
    for s in stats.iter().step_by(8).chain(stats.last()) {
        println!(
            "epoch {:3}  total {:8.4}  recon {:8.4}  kl {:7.4}  class {:7.4}",
            s.epoch, s.total, s.recon, s.kl, s.class
        );
    }

    for wanted in [Label::Benign, Label::Malware] {
        let graph = graphs.iter().find(|g| g.label == wanted).expect("both classes generated");
        let embedding = embed_graph(&model, graph)?;
        let preview: Vec<String> = embedding.iter().take(4).map(|v| format!("{v:+.3}")).collect();
        println!("{:7} {} -> [{}, ...]", format!("{wanted:?}"), graph.app_id, preview.join(", "));
    }
    Ok(())
}
