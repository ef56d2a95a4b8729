//! Train the Siamese network on toy embeddings and score pairs.
//!
//! The twin towers share weights and the head reads the elementwise
//! absolute difference, so at initialization an input paired with itself
//! scores exactly 0.5: the difference vector is zero and only the (zero)
//! biases reach the logit. Training pushes same-class pairs above that
//! line and cross-class pairs below it.
//!
//!     cargo run --example siamese_similarity

use malgraph::callgraph::Label;
use malgraph::snn::{similarity, SnnModel, SnnTrainConfig};
use malgraph::vgae::Embedding;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two well-separated Gaussian blobs in the 16-dimensional input space.
fn toy_embeddings(count: usize, seed: u64) -> Vec<Embedding<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Benign } else { Label::Malware };
            let center = if label == Label::Benign { -0.5 } else { 0.5 };
            let vector = (0..16).map(|_| center + rng.random_range(-0.2..0.2)).collect();
            Embedding { app_id: format!("toy-{i:03}"), label, vector }
        })
        .collect()
}

fn main() -> malgraph::Result<()> {
    let embeddings = toy_embeddings(80, 1);

    let fresh = SnnModel::<f64>::init(&mut ChaCha8Rng::seed_from_u64(9))?;
    let own = similarity(&fresh, &embeddings[0].vector, &embeddings[0].vector)?;
    println!("untrained, any input vs itself: {own} (exact)");
    assert_eq!(own, 0.5);

    let config = SnnTrainConfig { learning_rate: 0.05, epochs: 30, seed: 2, ..SnnTrainConfig::default() };
    let (model, stats) = malgraph::snn::train_snn(&embeddings, &config)?;
    for s in stats.iter().step_by(10).chain(stats.last()) {
        println!("epoch {:2}  loss {:.4}  pair accuracy {:.3}", s.epoch, s.loss, s.pair_accuracy);
    }

    let benign: Vec<&Embedding<f64>> =
        embeddings.iter().filter(|e| e.label == Label::Benign).take(2).collect();
    let malware: Vec<&Embedding<f64>> =
        embeddings.iter().filter(|e| e.label == Label::Malware).take(2).collect();

    let same = similarity(&model, &benign[0].vector, &benign[1].vector)?;
    let diff = similarity(&model, &benign[0].vector, &malware[0].vector)?;
    println!("trained, benign vs benign  {same:.4}");
    println!("trained, benign vs malware {diff:.4}");
    assert!(same > diff);
    Ok(())
}
