//! Few-shot classification with a handful of malware references.
//!
//! Zero-shot mode compares a query only to benign software. When a few
//! labeled malware samples exist, few-shot mode also builds a malware
//! support set from the training families and lets the larger mean
//! similarity win. The test families remain unseen; the malware references
//! only anchor what "looks like malware in general" means.
//!
//!     cargo run --example few_shot

use std::collections::BTreeMap;

use malgraph::callgraph::{build_app_graph, default_prefix_filters, ApiCallGraph, ApiVocab, Label};
use malgraph::dataset::{family_disjoint_split, generate_corpus, SynthConfig};
use malgraph::seeds::stage_rng;
use malgraph::snn::{train_snn, SnnTrainConfig};
use malgraph::vgae::{embed_graph, train_vgae, Embedding, TrainConfig};
use malgraph::zeroshot::{build_support_set, classify_few_shot};
use rand::Rng;

fn main() -> malgraph::Result<()> {
    let master_seed = 11;
    let config = SynthConfig {
        vocab_size: 30,
        benign_motifs: 6,
        families: 4,
        benign_apps: 100,
        apps_per_family: 20,
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
    let split = family_disjoint_split(&corpus.manifest, 0.5, 30, &mut rng)?;
    println!("held-out families: {:?}", split.test_families);

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
    let snn_config = SnnTrainConfig {
        learning_rate: 0.01,
        epochs: 40,
        seed: stage_rng(master_seed, "train-snn").random(),
        ..SnnTrainConfig::default()
    };
    let (snn, _) = train_snn(&train_embeddings, &snn_config)?;

    // Benign references come from the withheld pool; malware references
    // come from the training families, never from the held-out ones.
    let mut rng = stage_rng(master_seed, "classify");
    let benign_support = build_support_set(&embed(&split.support)?, Label::Benign, 20, &mut rng)?;
    let known_malware: Vec<Embedding<f64>> = train_embeddings
        .iter()
        .filter(|e| e.label == Label::Malware)
        .cloned()
        .collect();
    let malware_support = build_support_set(&known_malware, Label::Malware, 20, &mut rng)?;

    let mut correct = 0usize;
    let test_embeddings = embed(&split.test)?;
    for query in &test_embeddings {
        let verdict = classify_few_shot(&snn, &benign_support, &malware_support, query, 0.5)?;
        if verdict.label == query.label {
            correct += 1;
        }
    }
    println!(
        "few-shot accuracy on unseen families: {}/{} = {:.2}%",
        correct,
        test_embeddings.len(),
        100.0 * correct as f64 / test_embeddings.len() as f64
    );

    // The evidence behind one verdict of each class.
    for wanted in [Label::Benign, Label::Malware] {
        let query = test_embeddings.iter().find(|e| e.label == wanted).expect("both classes");
        let v = classify_few_shot(&snn, &benign_support, &malware_support, query, 0.5)?;
        println!(
            "{:14} mean benign {:.3} vs mean malware {:.3} -> {}",
            v.app_id,
            v.mean_benign,
            v.mean_malware.expect("few-shot records both means"),
            v.label
        );
    }
    Ok(())
}
