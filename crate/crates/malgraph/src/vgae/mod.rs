//! Variational graph auto-encoder over API call graphs.
//!
//! Two shared relu GCN layers (widths 32 and 24) feed parallel linear GCN
//! heads for the latent mean and log-variance (width 16). The latent code is
//! sampled by reparameterization, an inner-product decoder reconstructs the
//! adjacency, and a small classifier head on the mean-pooled latent mean
//! supervises the embedding space. The training loss is
//!
//! `L = [L_rec + (1/N) * L_KL] + L_class`
//!
//! with `N` the graph's node count, `L_rec` a positive-weighted binary
//! cross-entropy over all node pairs, `L_KL` the Gaussian KL summed over
//! nodes and dimensions, and `L_class` the cross-entropy of the graph label.
//!
//! Backward passes are derived by hand; `grad_check` in the test suite and
//! the acceptance tests verify every parameter against central finite
//! differences.

mod train;

pub use train::{train_vgae, EpochStats, KlNorm, TrainConfig};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::callgraph::{ApiCallGraph, Label};
use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, real, relu, sigmoid, softmax, softplus, Matrix, ParamSet, Scalar,
};
use crate::persist::{ModelDocument, ParamEncoding};

pub const HIDDEN1: usize = 32;
pub const HIDDEN2: usize = 24;
pub const LATENT: usize = 16;
pub const CLASSES: usize = 2;

const W_GCN1: &str = "gcn1.w";
const W_GCN2: &str = "gcn2.w";
const W_MU: &str = "mu.w";
const W_LOGVAR: &str = "logvar.w";
const W_CLS: &str = "cls.w";
const B_CLS: &str = "cls.b";

/// A graph embedding with the identity it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub app_id: String,
    pub label: Label,
    pub vector: Vec<T>,
}

/// Latent encoding of one graph.
#[derive(Debug, Clone)]
pub struct LatentOutput<T> {
    pub mu: Matrix<T>,
    pub logvar: Matrix<T>,
    /// `z = mu + exp(0.5 * logvar) ⊙ eps`, with the drawn `eps` recorded.
    pub z: Matrix<T>,
    pub eps: Matrix<T>,
}

/// VGAE parameters. The input width is the vocabulary size; all other widths
/// are fixed by the architecture.
#[derive(Debug, Clone)]
pub struct VgaeModel<T> {
    vocab_size: usize,
    pub params: ParamSet<T>,
}

impl<T: Scalar> VgaeModel<T> {
    /// Glorot-uniform weights, zero classifier bias.
    pub fn init(vocab_size: usize, rng: &mut impl Rng) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::Validation("vocabulary size must be positive".into()));
        }
        let mut params = ParamSet::new();
        params.insert(W_GCN1, crate::numerics::glorot_matrix(vocab_size, HIDDEN1, rng))?;
        params.insert(W_GCN2, crate::numerics::glorot_matrix(HIDDEN1, HIDDEN2, rng))?;
        params.insert(W_MU, crate::numerics::glorot_matrix(HIDDEN2, LATENT, rng))?;
        params.insert(W_LOGVAR, crate::numerics::glorot_matrix(HIDDEN2, LATENT, rng))?;
        params.insert(W_CLS, crate::numerics::glorot_matrix(LATENT, CLASSES, rng))?;
        params.insert(B_CLS, Matrix::zeros(1, CLASSES))?;
        Ok(VgaeModel { vocab_size, params })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn shape_table(vocab_size: usize) -> Vec<(&'static str, usize, usize)> {
        vec![
            (W_GCN1, vocab_size, HIDDEN1),
            (W_GCN2, HIDDEN1, HIDDEN2),
            (W_MU, HIDDEN2, LATENT),
            (W_LOGVAR, HIDDEN2, LATENT),
            (W_CLS, LATENT, CLASSES),
            (B_CLS, 1, CLASSES),
        ]
    }

    pub fn to_document(&self, vocab_hash: &str, encoding: ParamEncoding) -> ModelDocument {
        ModelDocument::from_params("vgae", vocab_hash, encoding, &self.params)
    }

    /// Restore from a persisted document, refusing vocabulary-hash, version,
    /// and float-mode mismatches.
    pub fn from_document(doc: ModelDocument, expected_vocab_hash: Option<&str>) -> Result<Self> {
        let vocab_size = doc
            .params
            .iter()
            .find(|p| p.name == W_GCN1)
            .map(|p| p.rows)
            .ok_or_else(|| Error::Format("model document lacks the first GCN layer".into()))?;
        let table = Self::shape_table(vocab_size);
        let params = doc.into_params("vgae", expected_vocab_hash, &table)?;
        Ok(VgaeModel { vocab_size, params })
    }
}

/// One-hot node features: row `i` selects the vocabulary index of node `i`.
pub fn node_features<T: Scalar>(graph: &ApiCallGraph, vocab_size: usize) -> Result<Matrix<T>> {
    let mut x = Matrix::zeros(graph.node_count(), vocab_size);
    for (i, &v) in graph.nodes.iter().enumerate() {
        if v >= vocab_size {
            return Err(Error::Validation(format!(
                "node index {v} outside vocabulary of size {vocab_size}"
            )));
        }
        x.set(i, v, T::one());
    }
    Ok(x)
}

/// A graph preprocessed for repeated encoder passes: normalized adjacency,
/// reconstruction target, and positive-pair weight are all reusable.
#[derive(Debug, Clone)]
pub struct PreparedGraph<T> {
    pub app_id: String,
    pub label: Label,
    pub nodes: Vec<usize>,
    pub a_hat: Matrix<T>,
    pub target: Matrix<T>,
    pub pos_weight: T,
}

impl<T: Scalar> PreparedGraph<T> {
    pub fn new(graph: &ApiCallGraph, vocab_size: usize) -> Result<Self> {
        if let Some(&max) = graph.nodes.iter().max() {
            if max >= vocab_size {
                return Err(Error::Validation(format!(
                    "app {}: node index {max} outside vocabulary of size {vocab_size}",
                    graph.app_id
                )));
            }
        }
        let (target, pos_weight) = recon_target(graph);
        Ok(PreparedGraph {
            app_id: graph.app_id.clone(),
            label: graph.label,
            nodes: graph.nodes.clone(),
            a_hat: graph.normalized_adjacency()?,
            target,
            pos_weight,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Reconstruction target: symmetrized adjacency with self-loops excluded
/// from the positives, plus `pos_weight = (N^2 - E) / max(1, E)`.
fn recon_target<T: Scalar>(graph: &ApiCallGraph) -> (Matrix<T>, T) {
    let n = graph.node_count();
    let mut target = Matrix::zeros(n, n);
    let mut positives = 0usize;
    for &(from, to) in &graph.edges {
        if from == to {
            continue;
        }
        let i = graph.local_index(from).expect("edge endpoint must be a node");
        let j = graph.local_index(to).expect("edge endpoint must be a node");
        for (a, b) in [(i, j), (j, i)] {
            if target.get(a, b) == T::zero() {
                target.set(a, b, T::one());
                positives += 1;
            }
        }
    }
    let pos_weight = real::<T>((n * n - positives) as f64) / real::<T>(positives.max(1) as f64);
    (target, pos_weight)
}

/// Forward state retained for the backward pass.
struct Tape<T> {
    h1pre: Matrix<T>,
    h1: Matrix<T>,
    h2pre: Matrix<T>,
    h2: Matrix<T>,
    mu: Matrix<T>,
    logvar: Matrix<T>,
    sig: Matrix<T>,
    z: Matrix<T>,
    s: Matrix<T>,
    pooled: Vec<T>,
    class_probs: Vec<T>,
    class_target: usize,
    kl_scale: T,
}

/// Gather rows of `w` for one-hot features: exactly `X * W` without the
/// arithmetic.
fn gather_rows<T: Scalar>(w: &Matrix<T>, indices: &[usize]) -> Matrix<T> {
    let mut out = Matrix::zeros(indices.len(), w.cols());
    for (i, &v) in indices.iter().enumerate() {
        out.row_mut(i).copy_from_slice(w.row(v));
    }
    out
}

fn latent_forward<T: Scalar>(
    params: &ParamSet<T>,
    prepared: &PreparedGraph<T>,
) -> Result<(Matrix<T>, Matrix<T>, Matrix<T>, Matrix<T>, Matrix<T>, Matrix<T>)> {
    let a_hat = &prepared.a_hat;
    let g0 = gather_rows(params.get(W_GCN1), &prepared.nodes);
    let h1pre = a_hat.matmul(&g0)?;
    let h1 = h1pre.map(relu);
    let h2pre = a_hat.matmul(&h1.matmul(params.get(W_GCN2))?)?;
    let h2 = h2pre.map(relu);
    let mu = a_hat.matmul(&h2.matmul(params.get(W_MU))?)?;
    let logvar = a_hat.matmul(&h2.matmul(params.get(W_LOGVAR))?)?;
    Ok((h1pre, h1, h2pre, h2, mu, logvar))
}

/// Encode with caller-provided reparameterization noise (one row per node,
/// [`LATENT`] columns).
pub fn encode_with_noise<T: Scalar>(
    model: &VgaeModel<T>,
    graph: &ApiCallGraph,
    eps: Matrix<T>,
) -> Result<LatentOutput<T>> {
    let prepared = PreparedGraph::new(graph, model.vocab_size)?;
    if eps.rows() != prepared.node_count() || eps.cols() != LATENT {
        return Err(Error::Shape {
            op: "encode_with_noise",
            detail: format!("noise is {}x{}, graph needs {}x{LATENT}", eps.rows(), eps.cols(), prepared.node_count()),
        });
    }
    let (_, _, _, _, mu, logvar) = latent_forward(&model.params, &prepared)?;
    let sig = logvar.map(|lv| (lv * real::<T>(0.5)).exp());
    let z = mu.add(&sig.hadamard(&eps)?)?;
    mu.check_finite("encode")?;
    logvar.check_finite("encode")?;
    z.check_finite("encode")?;
    Ok(LatentOutput { mu, logvar, z, eps })
}

/// Encode with fresh standard-normal noise from `rng`.
pub fn encode<T: Scalar>(
    model: &VgaeModel<T>,
    graph: &ApiCallGraph,
    rng: &mut impl Rng,
) -> Result<LatentOutput<T>> {
    let eps = draw_noise(graph.node_count(), rng);
    encode_with_noise(model, graph, eps)
}

/// Standard-normal noise matrix; drawn in f64 so both float modes consume
/// the stream identically.
pub fn draw_noise<T: Scalar>(n: usize, rng: &mut impl Rng) -> Matrix<T> {
    let mut eps = Matrix::zeros(n, LATENT);
    for v in eps.data_mut() {
        let x: f64 = StandardNormal.sample(rng);
        *v = real(x);
    }
    eps
}

/// Inner-product decoder: `sigmoid(z zᵀ)`.
pub fn decode<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    z.matmul(&z.transpose()).expect("z zᵀ shapes always agree").map(sigmoid)
}

/// Positive-weighted reconstruction BCE over all node pairs, computed from
/// probabilities. Probabilities are clamped away from 0 and 1 before the
/// logarithm; the width of the clamp follows the float mode's epsilon.
pub fn recon_loss<T: Scalar>(graph: &ApiCallGraph, probabilities: &Matrix<T>) -> Result<T> {
    let n = graph.node_count();
    if probabilities.rows() != n || probabilities.cols() != n {
        return Err(Error::Shape {
            op: "recon_loss",
            detail: format!("probabilities are {}x{}, graph has {n} nodes", probabilities.rows(), probabilities.cols()),
        });
    }
    let (target, pos_weight) = recon_target::<T>(graph);
    let floor = real::<T>(1e-12).max(T::epsilon());
    let ceil = T::one() - floor;
    let mut sum = T::zero();
    for (p, t) in probabilities.data().iter().zip(target.data()) {
        let p = (*p).max(floor).min(ceil);
        if *t == T::one() {
            sum -= pos_weight * p.ln();
        } else {
            sum -= (T::one() - p).ln();
        }
    }
    Ok(sum / real::<T>((n * n) as f64))
}

/// Gaussian KL against the standard normal, summed over nodes and latent
/// dimensions: `-0.5 * sum(1 + logvar - mu^2 - exp(logvar))`.
pub fn kl_loss<T: Scalar>(mu: &Matrix<T>, logvar: &Matrix<T>) -> Result<T> {
    if mu.rows() != logvar.rows() || mu.cols() != logvar.cols() {
        return Err(Error::Shape {
            op: "kl_loss",
            detail: format!("mu {}x{}, logvar {}x{}", mu.rows(), mu.cols(), logvar.rows(), logvar.cols()),
        });
    }
    let half = real::<T>(0.5);
    let mut sum = T::zero();
    for (&m, &lv) in mu.data().iter().zip(logvar.data()) {
        sum -= half * (T::one() + lv - m * m - lv.exp());
    }
    Ok(sum)
}

/// Classifier logits from the mean-pooled latent mean.
pub fn class_logits<T: Scalar>(model: &VgaeModel<T>, mu: &Matrix<T>) -> Result<Vec<T>> {
    let pooled = mean_pool(mu);
    affine_logits(&model.params, &pooled)
}

fn mean_pool<T: Scalar>(mu: &Matrix<T>) -> Vec<T> {
    let n = mu.rows();
    let scale = T::one() / real::<T>(n as f64);
    (0..mu.cols())
        .map(|j| (0..n).map(|i| mu.get(i, j)).fold(T::zero(), |acc, v| acc + v) * scale)
        .collect()
}

fn affine_logits<T: Scalar>(params: &ParamSet<T>, pooled: &[T]) -> Result<Vec<T>> {
    let w = params.get(W_CLS);
    let b = params.get(B_CLS);
    if pooled.len() != w.rows() {
        return Err(Error::Shape {
            op: "class_logits",
            detail: format!("pooled width {} vs W rows {}", pooled.len(), w.rows()),
        });
    }
    Ok((0..CLASSES)
        .map(|j| {
            pooled
                .iter()
                .enumerate()
                .fold(b.get(0, j), |acc, (i, &p)| acc + p * w.get(i, j))
        })
        .collect())
}

/// Loss components of one graph. `kl` is the already-normalized contribution,
/// so `total = recon + kl + class`.
#[derive(Debug, Clone, Copy)]
pub struct LossParts<T> {
    pub recon: T,
    pub kl: T,
    pub class: T,
    pub total: T,
}

fn class_index(label: Label) -> Result<usize> {
    match label {
        Label::Benign => Ok(0),
        Label::Malware => Ok(1),
        Label::Unknown => Err(Error::Validation("training graphs must carry a definite label".into())),
    }
}

fn forward_tape<T: Scalar>(
    params: &ParamSet<T>,
    prepared: &PreparedGraph<T>,
    label: Label,
    eps: &Matrix<T>,
    kl_scale: T,
) -> Result<(LossParts<T>, Tape<T>)> {
    let n = prepared.node_count();
    let (h1pre, h1, h2pre, h2, mu, logvar) = latent_forward(params, prepared)?;
    let sig = logvar.map(|lv| (lv * real::<T>(0.5)).exp());
    let z = mu.add(&sig.hadamard(eps)?)?;
    let s = z.matmul(&z.transpose())?;

    // Reconstruction BCE straight from logits: softplus keeps it stable.
    let mut rec_sum = T::zero();
    for (x, t) in s.data().iter().zip(prepared.target.data()) {
        if *t == T::one() {
            rec_sum += prepared.pos_weight * softplus(-*x);
        } else {
            rec_sum += softplus(*x);
        }
    }
    let recon = rec_sum / real::<T>((n * n) as f64);

    let kl = kl_loss(&mu, &logvar)? * kl_scale;

    let pooled = mean_pool(&mu);
    let logits = affine_logits(params, &pooled)?;
    let class_target = class_index(label)?;
    let class = cross_entropy(&logits, class_target);
    let class_probs = softmax(&logits);

    let total = recon + kl + class;
    if !total.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss on app {}", prepared.app_id)));
    }
    let parts = LossParts { recon, kl, class, total };
    let tape = Tape {
        h1pre,
        h1,
        h2pre,
        h2,
        mu,
        logvar,
        sig,
        z,
        s,
        pooled,
        class_probs,
        class_target,
        kl_scale,
    };
    Ok((parts, tape))
}

fn backward_tape<T: Scalar>(
    params: &mut ParamSet<T>,
    prepared: &PreparedGraph<T>,
    eps: &Matrix<T>,
    tape: &Tape<T>,
    grad_scale: T,
) -> Result<()> {
    let n = prepared.node_count();
    let a_hat = &prepared.a_hat; // symmetric, so Âᵀ M = Â M
    let inv_n2 = T::one() / real::<T>((n * n) as f64);

    // dL/dS for the weighted BCE-from-logits.
    let mut g_s = Matrix::zeros(n, n);
    for ((g, &x), &t) in g_s.data_mut().iter_mut().zip(tape.s.data()).zip(prepared.target.data()) {
        *g = if t == T::one() {
            -prepared.pos_weight * sigmoid(-x) * inv_n2
        } else {
            sigmoid(x) * inv_n2
        };
    }
    // S = Z Zᵀ  =>  dZ = (G + Gᵀ) Z.
    let d_z = g_s.add(&g_s.transpose())?.matmul(&tape.z)?;

    // Classifier head. dlogits = softmax - onehot.
    let mut d_logits = tape.class_probs.clone();
    d_logits[tape.class_target] -= T::one();
    {
        let w_cls = params.get(W_CLS).clone();
        let d_wcls = params.grad_mut(W_CLS);
        for i in 0..LATENT {
            for j in 0..CLASSES {
                let cur = d_wcls.get(i, j);
                d_wcls.set(i, j, cur + grad_scale * tape.pooled[i] * d_logits[j]);
            }
        }
        let d_bcls = params.grad_mut(B_CLS);
        for j in 0..CLASSES {
            let cur = d_bcls.get(0, j);
            d_bcls.set(0, j, cur + grad_scale * d_logits[j]);
        }
        // d_pooled flows into every row of mu with weight 1/N.
        let inv_n = T::one() / real::<T>(n as f64);
        let mut d_mu = d_z.clone();
        for i in 0..n {
            for j in 0..LATENT {
                let mut v = d_mu.get(i, j);
                // KL: d/dmu of kl_scale * [-0.5(1 + lv - mu^2 - e^lv)] = kl_scale * mu.
                v += tape.kl_scale * tape.mu.get(i, j);
                let d_pooled_j =
                    (0..CLASSES).map(|c| d_logits[c] * w_cls.get(j, c)).fold(T::zero(), |a, b| a + b);
                v += d_pooled_j * inv_n;
                d_mu.set(i, j, v);
            }
        }

        // d_logvar: reparameterization (z = mu + sig ⊙ eps, sig = e^{lv/2})
        // contributes dZ ⊙ eps ⊙ 0.5 sig; KL contributes 0.5 (e^lv - 1).
        let half = real::<T>(0.5);
        let mut d_logvar = Matrix::zeros(n, LATENT);
        for i in 0..n {
            for j in 0..LATENT {
                let repar = d_z.get(i, j) * eps.get(i, j) * half * tape.sig.get(i, j);
                let kl = tape.kl_scale * half * (tape.logvar.get(i, j).exp() - T::one());
                d_logvar.set(i, j, repar + kl);
            }
        }

        // Latent heads: MU = Â (H2 Wmu), LOGVAR = Â (H2 Wlv).
        let d_gmu = a_hat.matmul(&d_mu)?;
        let d_glv = a_hat.matmul(&d_logvar)?;
        let h2_t = tape.h2.transpose();
        params.grad_mut(W_MU).add_assign_scaled(&h2_t.matmul(&d_gmu)?, grad_scale)?;
        params.grad_mut(W_LOGVAR).add_assign_scaled(&h2_t.matmul(&d_glv)?, grad_scale)?;

        let mut d_h2 = d_gmu.matmul(&params.get(W_MU).transpose())?;
        d_h2 = d_h2.add(&d_glv.matmul(&params.get(W_LOGVAR).transpose())?)?;

        // H2 = relu(Â (H1 W1)).
        let d_h2pre = mask_relu(&d_h2, &tape.h2pre);
        let d_g1 = a_hat.matmul(&d_h2pre)?;
        params.grad_mut(W_GCN2).add_assign_scaled(&tape.h1.transpose().matmul(&d_g1)?, grad_scale)?;
        let d_h1 = d_g1.matmul(&params.get(W_GCN2).transpose())?;

        // H1 = relu(Â (X W0)); X is one-hot, so dW0 scatters rows of dG0.
        let d_h1pre = mask_relu(&d_h1, &tape.h1pre);
        let d_g0 = a_hat.matmul(&d_h1pre)?;
        let d_w0 = params.grad_mut(W_GCN1);
        for (i, &v) in prepared.nodes.iter().enumerate() {
            for j in 0..HIDDEN1 {
                let cur = d_w0.get(v, j);
                d_w0.set(v, j, cur + grad_scale * d_g0.get(i, j));
            }
        }
    }
    Ok(())
}

fn mask_relu<T: Scalar>(grad: &Matrix<T>, pre: &Matrix<T>) -> Matrix<T> {
    let mut out = grad.clone();
    for (g, &p) in out.data_mut().iter_mut().zip(pre.data()) {
        if p <= T::zero() {
            *g = T::zero();
        }
    }
    out
}

/// Total loss of one prepared graph with explicit noise; accumulates
/// `grad_scale` times the gradients into the parameter set.
pub fn loss_and_grad<T: Scalar>(
    params: &mut ParamSet<T>,
    prepared: &PreparedGraph<T>,
    eps: &Matrix<T>,
    kl_scale: T,
    grad_scale: T,
) -> Result<LossParts<T>> {
    let (parts, tape) = forward_tape(params, prepared, prepared.label, eps, kl_scale)?;
    backward_tape(params, prepared, eps, &tape, grad_scale)?;
    Ok(parts)
}

/// Three-term training loss with fresh reparameterization noise. Uses the
/// per-graph node count as the KL normalizer.
pub fn total_loss<T: Scalar>(
    model: &VgaeModel<T>,
    graph: &ApiCallGraph,
    rng: &mut impl Rng,
) -> Result<LossParts<T>> {
    let prepared = PreparedGraph::new(graph, model.vocab_size)?;
    let eps = draw_noise(prepared.node_count(), rng);
    let kl_scale = T::one() / real::<T>(prepared.node_count() as f64);
    let (parts, _) = forward_tape(&model.params, &prepared, graph.label, &eps, kl_scale)?;
    Ok(parts)
}

/// Deterministic 16-dimensional graph embedding: mean pool over the latent
/// means. Sampling noise plays no role here.
pub fn embed_graph<T: Scalar>(model: &VgaeModel<T>, graph: &ApiCallGraph) -> Result<Vec<T>> {
    let prepared = PreparedGraph::new(graph, model.vocab_size)?;
    let (_, _, _, _, mu, _) = latent_forward(&model.params, &prepared)?;
    mu.check_finite("embed_graph")?;
    Ok(mean_pool(&mu))
}

/// Label a graph with the VGAE's own classifier head. Ties go to malware.
pub fn vgae_classify<T: Scalar>(
    model: &VgaeModel<T>,
    graph: &ApiCallGraph,
) -> Result<(Label, Vec<T>)> {
    let prepared = PreparedGraph::new(graph, model.vocab_size)?;
    let (_, _, _, _, mu, _) = latent_forward(&model.params, &prepared)?;
    let logits = affine_logits(&model.params, &mean_pool(&mu))?;
    let probs = softmax(&logits);
    let label = if probs[1] >= probs[0] { Label::Malware } else { Label::Benign };
    Ok((label, probs))
}
