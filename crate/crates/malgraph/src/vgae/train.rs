//! VGAE training loop: Adam over shuffled mini-batches with per-epoch loss
//! history.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::callgraph::ApiCallGraph;
use crate::error::{Error, Result};
use crate::numerics::{as_f64, real, OptimizerState, Scalar};

use super::{draw_noise, loss_and_grad, PreparedGraph, VgaeModel};

/// Normalizer for the KL term in the graph loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlNorm {
    /// Divide each graph's KL by its own node count.
    #[default]
    NodeCount,
    /// Divide every graph's KL by the number of training graphs.
    DatasetSize,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub kl_norm: KlNorm,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 300,
            batch_size: 32,
            kl_norm: KlNorm::NodeCount,
            seed: 0,
        }
    }
}

/// Mean loss components over one epoch, in declaration order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    pub class: f64,
}

/// Train a fresh VGAE. Initialization, shuffling, and reparameterization
/// noise all come from a ChaCha stream seeded with `config.seed`, so equal
/// inputs give bitwise-equal models.
pub fn train_vgae<T: Scalar>(
    graphs: &[ApiCallGraph],
    vocab_size: usize,
    config: &TrainConfig,
) -> Result<(VgaeModel<T>, Vec<EpochStats>)> {
    if graphs.is_empty() {
        return Err(Error::Validation("cannot train on an empty graph set".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Validation("batch size must be positive".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::Validation("learning rate must be positive".into()));
    }
    let prepared: Vec<PreparedGraph<T>> = graphs
        .iter()
        .map(|g| PreparedGraph::new(g, vocab_size))
        .collect::<Result<_>>()?;
    for p in &prepared {
        super::class_index(p.label).map_err(|_| {
            Error::Validation(format!("app {}: training graphs must carry a definite label", p.app_id))
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = VgaeModel::<T>::init(vocab_size, &mut rng)?;
    let mut optimizer = OptimizerState::adam(config.learning_rate, &model.params);

    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 4];
        for batch in order.chunks(config.batch_size) {
            model.params.zero_grads();
            let grad_scale = T::one() / real::<T>(batch.len() as f64);
            for &idx in batch {
                let graph = &prepared[idx];
                let eps = draw_noise(graph.node_count(), &mut rng);
                let kl_scale = match config.kl_norm {
                    KlNorm::NodeCount => T::one() / real::<T>(graph.node_count() as f64),
                    KlNorm::DatasetSize => T::one() / real::<T>(prepared.len() as f64),
                };
                let parts =
                    loss_and_grad(&mut model.params, graph, &eps, kl_scale, grad_scale)?;
                sums[0] += as_f64(parts.total);
                sums[1] += as_f64(parts.recon);
                sums[2] += as_f64(parts.kl);
                sums[3] += as_f64(parts.class);
            }
            optimizer.step(&mut model.params)?;
        }
        let count = prepared.len() as f64;
        history.push(EpochStats {
            epoch,
            total: sums[0] / count,
            recon: sums[1] / count,
            kl: sums[2] / count,
            class: sums[3] / count,
        });
    }
    Ok((model, history))
}
