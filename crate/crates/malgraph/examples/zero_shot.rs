//! Zero-shot detection of unseen malware families, end to end in library
//! calls.
//!
//! The split withholds whole malware families from training, so at test
//! time the detector faces families it has never seen. It compares each
//! test app only against a benign support set: apps that do not resemble
//! known-good software are flagged, no malware examples required.
//!
//!     cargo run --example zero_shot

use std::collections::BTreeMap;

use malgraph::callgraph::{build_app_graph, default_prefix_filters, ApiCallGraph, ApiVocab, Label};
use malgraph::dataset::{family_disjoint_split, generate_corpus, SynthConfig};
use malgraph::eval::{metrics, ConfusionCounts};
use malgraph::seeds::stage_rng;
use malgraph::snn::{train_snn, SnnTrainConfig};
use malgraph::vgae::{embed_graph, train_vgae, Embedding, TrainConfig};
use malgraph::zeroshot::{build_support_set, classify_zero_shot};
use rand::Rng;

fn main() -> malgraph::Result<()> {
    let master_seed = 11;

    // Corpus: benign apps plus four malware families, two of which the
    // split will hold out entirely.
    let config = SynthConfig {
        vocab_size: 30,
        benign_motifs: 6,
        families: 4,
        benign_apps: 120,
        apps_per_family: 25,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config, master_seed)?;
    let vocab = ApiVocab::from_mapping_lines(corpus.mapping_lines.iter().map(String::as_str))?
        .extend(corpus.extension_lines.iter().map(String::as_str));

    let graphs: BTreeMap<String, ApiCallGraph> = corpus
        .listings
        .iter()
        .map(|listing| {
            build_app_graph(listing, &vocab, &default_prefix_filters())
                .map(|g| (g.app_id.clone(), g))
        })
        .collect::<malgraph::Result<_>>()?;

    let mut rng = stage_rng(master_seed, "split");
    let split = family_disjoint_split(&corpus.manifest, 0.5, 40, &mut rng)?;
    split.validate(&corpus.manifest)?;
    println!(
        "split: {} train / {} test, held-out families {:?}",
        split.train.len(),
        split.test.len(),
        split.test_families
    );

    let train_graphs: Vec<ApiCallGraph> =
        split.train.iter().map(|id| graphs[id].clone()).collect();
    let vgae_config = TrainConfig {
        epochs: 60,
        learning_rate: 0.01,
        seed: stage_rng(master_seed, "train-vgae").random(),
        ..TrainConfig::default()
    };
    let (vgae, _) = train_vgae::<f64>(&train_graphs, vocab.len(), &vgae_config)?;

    let embed = |ids: &[String]| -> malgraph::Result<Vec<Embedding<f64>>> {
        ids.iter()
            .map(|id| {
                let graph = &graphs[id];
                Ok(Embedding {
                    app_id: id.clone(),
                    label: graph.label,
                    vector: embed_graph(&vgae, graph)?,
                })
            })
            .collect()
    };
    let train_embeddings = embed(&split.train)?;
    let test_embeddings = embed(&split.test)?;
    let support_pool = embed(&split.support)?;

    let snn_config = SnnTrainConfig {
        learning_rate: 0.01,
        epochs: 40,
        seed: stage_rng(master_seed, "train-snn").random(),
        ..SnnTrainConfig::default()
    };
    let (snn, _) = train_snn(&train_embeddings, &snn_config)?;

    // The support pool was withheld from training, so the benign reference
    // is untouched by both networks' updates.
    let mut rng = stage_rng(master_seed, "classify");
    let support = build_support_set(&support_pool, Label::Benign, 30, &mut rng)?;

    let mut counts = ConfusionCounts::default();
    for query in &test_embeddings {
        let verdict = classify_zero_shot(&snn, &support, query, 0.5)?;
        match (query.label, verdict.label) {
            (Label::Malware, Label::Malware) => counts.true_positives += 1,
            (Label::Malware, _) => counts.false_negatives += 1,
            (Label::Benign, Label::Benign) => counts.true_negatives += 1,
            (Label::Benign, _) => counts.false_positives += 1,
            (Label::Unknown, _) => {}
        }
    }

    let m = metrics(&counts);
    println!(
        "tp {} fp {} tn {} fn {}",
        counts.true_positives, counts.false_positives, counts.true_negatives, counts.false_negatives
    );
    for (name, value) in [("accuracy", m.accuracy), ("recall", m.recall), ("f1", m.f1)] {
        match value {
            Some(v) => println!("{name:9} {:.2}%", v * 100.0),
            None => println!("{name:9} undefined"),
        }
    }
    Ok(())
}
