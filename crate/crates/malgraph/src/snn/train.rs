//! Pair sampling and the SGD training loop for the Siamese network.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::callgraph::Label;
use crate::error::{Error, Result};
use crate::numerics::{as_f64, real, OptimizerState, Scalar};
use crate::vgae::Embedding;

use super::{pair_loss_and_grad, SnnModel};

/// One training pair: indices into the embedding slice plus the stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSample {
    pub a: usize,
    pub b: usize,
    pub same: bool,
}

#[derive(Debug, Clone)]
pub struct SnnTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SnnTrainConfig {
    fn default() -> Self {
        SnnTrainConfig { learning_rate: 0.001, epochs: 4, batch_size: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SnnEpochStats {
    pub epoch: usize,
    /// Mean pair BCE.
    pub loss: f64,
    /// Fraction of pairs whose score lands on the correct side of 0.5.
    pub pair_accuracy: f64,
}

/// Draw `count` labeled pairs: ceil(count / 2) same-class pairs followed by
/// floor(count / 2) different-class pairs, then one shuffle so mini-batches
/// mix both strata. Anchors are uniform over all items, partners uniform
/// within the stratum, and a pair never repeats one item.
///
/// Fails when a requested stratum cannot be served: same-class pairs need
/// every present class to hold at least two items (any item may become an
/// anchor), different-class pairs need at least two distinct classes.
pub fn sample_pairs(
    labels: &[Label],
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<PairSample>> {
    if labels.iter().any(|&l| l == Label::Unknown) {
        return Err(Error::Validation("pair sampling needs definite labels".into()));
    }
    if count > 0 && labels.is_empty() {
        return Err(Error::Sampling("cannot sample pairs from an empty set".into()));
    }
    let same_count = count.div_ceil(2);
    let diff_count = count / 2;

    let benign: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] == Label::Benign).collect();
    let malware: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] == Label::Malware).collect();

    // Anchors are uniform over all items, so every class an anchor can land
    // in must be able to serve a distinct partner.
    if same_count > 0 {
        for (class, members) in [("benign", &benign), ("malware", &malware)] {
            if members.len() == 1 {
                return Err(Error::Sampling(format!(
                    "same-class pairs need at least two {class} apps, found 1"
                )));
            }
        }
    }
    if diff_count > 0 && (benign.is_empty() || malware.is_empty()) {
        return Err(Error::Sampling(
            "different-class pairs need both classes present".into(),
        ));
    }

    let mut pairs = Vec::with_capacity(count);
    for _ in 0..same_count {
        let anchor = rng.random_range(0..labels.len());
        let stratum = if labels[anchor] == Label::Benign { &benign } else { &malware };
        // The anchor's class has >= 2 members, so resampling terminates.
        let partner = loop {
            let p = stratum[rng.random_range(0..stratum.len())];
            if p != anchor {
                break p;
            }
        };
        pairs.push(PairSample { a: anchor, b: partner, same: true });
    }
    for _ in 0..diff_count {
        let anchor = rng.random_range(0..labels.len());
        let stratum = if labels[anchor] == Label::Benign { &malware } else { &benign };
        let partner = stratum[rng.random_range(0..stratum.len())];
        pairs.push(PairSample { a: anchor, b: partner, same: false });
    }
    pairs.shuffle(rng);
    Ok(pairs)
}

/// Train a fresh Siamese network on labeled embeddings with SGD. Every
/// epoch draws `2 * embeddings.len()` fresh pairs. Initialization, pair
/// sampling, and shuffling all come from one ChaCha stream seeded with
/// `config.seed`.
pub fn train_snn<T: Scalar>(
    embeddings: &[Embedding<T>],
    config: &SnnTrainConfig,
) -> Result<(SnnModel<T>, Vec<SnnEpochStats>)> {
    if embeddings.is_empty() {
        return Err(Error::Validation("cannot train on an empty embedding set".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Validation("batch size must be positive".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::Validation("learning rate must be positive".into()));
    }
    for e in embeddings {
        if e.vector.len() != super::INPUT {
            return Err(Error::Validation(format!(
                "app {}: embedding width {} (the network takes {})",
                e.app_id,
                e.vector.len(),
                super::INPUT
            )));
        }
    }
    let labels: Vec<Label> = embeddings.iter().map(|e| e.label).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = SnnModel::<T>::init(&mut rng)?;
    let mut optimizer = OptimizerState::<T>::sgd(config.learning_rate);

    let pair_count = embeddings.len() * 2;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let pairs = sample_pairs(&labels, pair_count, &mut rng)?;
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for batch in pairs.chunks(config.batch_size) {
            model.params.zero_grads();
            let grad_scale = T::one() / real::<T>(batch.len() as f64);
            for pair in batch {
                let (loss, score) = pair_loss_and_grad(
                    &mut model.params,
                    &embeddings[pair.a].vector,
                    &embeddings[pair.b].vector,
                    pair.same,
                    grad_scale,
                )?;
                loss_sum += as_f64(loss);
                if (as_f64(score) > 0.5) == pair.same {
                    correct += 1;
                }
            }
            optimizer.step(&mut model.params)?;
        }
        history.push(SnnEpochStats {
            epoch,
            loss: loss_sum / pair_count as f64,
            pair_accuracy: correct as f64 / pair_count as f64,
        });
    }
    Ok((model, history))
}
