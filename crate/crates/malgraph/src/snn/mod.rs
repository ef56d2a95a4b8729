//! Siamese similarity network over graph embeddings.
//!
//! Two copies of one shared-weight MLP (16 → 128 → 64 → 32, relu throughout)
//! encode a pair of embeddings. The twin outputs are fused by the
//! elementwise absolute difference, and a small head (32 → 16 relu → 1)
//! turns the fused vector into a similarity score in [0, 1]. The score is
//! symmetric in its arguments down to the bit: IEEE subtraction gives
//! exactly negated differences in either order and the absolute value
//! erases the sign.
//!
//! Pairs are labeled 1 when both apps share a class and 0 otherwise, and
//! the network is trained with plain SGD on the binary cross-entropy of the
//! score. Backward passes are derived by hand and checked against central
//! finite differences in the tests.

mod train;

pub use train::{sample_pairs, train_snn, PairSample, SnnEpochStats, SnnTrainConfig};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{relu, sigmoid, softplus, Matrix, ParamSet, Scalar};
use crate::persist::{ModelDocument, ParamEncoding};

/// Embedding width accepted by the twin subnetwork.
pub const INPUT: usize = 16;
pub const TWIN1: usize = 128;
pub const TWIN2: usize = 64;
pub const TWIN3: usize = 32;
pub const HEAD1: usize = 16;

const LAYERS: [(&str, &str, usize, usize); 5] = [
    ("twin.l1.w", "twin.l1.b", TWIN1, INPUT),
    ("twin.l2.w", "twin.l2.b", TWIN2, TWIN1),
    ("twin.l3.w", "twin.l3.b", TWIN3, TWIN2),
    ("head.l1.w", "head.l1.b", HEAD1, TWIN3),
    ("head.l2.w", "head.l2.b", 1, HEAD1),
];

/// Siamese network parameters. Weights are stored `out x in`; biases are
/// `1 x out` rows.
#[derive(Debug, Clone)]
pub struct SnnModel<T> {
    pub params: ParamSet<T>,
}

impl<T: Scalar> SnnModel<T> {
    /// Glorot-uniform weights and zero biases. Zero biases make the score
    /// of an identical pair exactly 0.5 at initialization.
    pub fn init(rng: &mut impl Rng) -> Result<Self> {
        let mut params = ParamSet::new();
        for (w_name, b_name, out, input) in LAYERS {
            params.insert(w_name, crate::numerics::glorot_matrix(out, input, rng))?;
            params.insert(b_name, Matrix::zeros(1, out))?;
        }
        Ok(SnnModel { params })
    }

    fn shape_table() -> Vec<(&'static str, usize, usize)> {
        LAYERS
            .iter()
            .flat_map(|&(w, b, out, input)| [(w, out, input), (b, 1, out)])
            .collect()
    }

    pub fn to_document(&self, vocab_hash: &str, encoding: ParamEncoding) -> ModelDocument {
        ModelDocument::from_params("snn", vocab_hash, encoding, &self.params)
    }

    pub fn from_document(doc: ModelDocument, expected_vocab_hash: Option<&str>) -> Result<Self> {
        let params = doc.into_params("snn", expected_vocab_hash, &Self::shape_table())?;
        Ok(SnnModel { params })
    }
}

/// `W x + b` for a vector input, with `W` stored `out x in`.
fn affine<T: Scalar>(w: &Matrix<T>, b: &Matrix<T>, x: &[T]) -> Vec<T> {
    debug_assert_eq!(w.cols(), x.len());
    (0..w.rows())
        .map(|o| {
            x.iter()
                .enumerate()
                .fold(b.get(0, o), |acc, (i, &xi)| acc + w.get(o, i) * xi)
        })
        .collect()
}

fn relu_vec<T: Scalar>(v: &[T]) -> Vec<T> {
    v.iter().map(|&x| relu(x)).collect()
}

/// Per-path forward state kept for backpropagation.
struct TwinTape<T> {
    x: Vec<T>,
    z1: Vec<T>,
    a1: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
    z3: Vec<T>,
    a3: Vec<T>,
}

fn twin_forward<T: Scalar>(params: &ParamSet<T>, x: &[T]) -> TwinTape<T> {
    let z1 = affine(params.get("twin.l1.w"), params.get("twin.l1.b"), x);
    let a1 = relu_vec(&z1);
    let z2 = affine(params.get("twin.l2.w"), params.get("twin.l2.b"), &a1);
    let a2 = relu_vec(&z2);
    let z3 = affine(params.get("twin.l3.w"), params.get("twin.l3.b"), &a2);
    let a3 = relu_vec(&z3);
    TwinTape { x: x.to_vec(), z1, a1, z2, a2, z3, a3 }
}

fn check_width<T: Scalar>(x: &[T]) -> Result<()> {
    if x.len() != INPUT {
        return Err(Error::Shape {
            op: "snn_forward",
            detail: format!("embedding width {} (the network takes {INPUT})", x.len()),
        });
    }
    Ok(())
}

/// The shared twin subnetwork on one embedding.
pub fn subnetwork_forward<T: Scalar>(model: &SnnModel<T>, x: &[T]) -> Result<Vec<T>> {
    check_width(x)?;
    Ok(twin_forward(&model.params, x).a3)
}

struct PairTape<T> {
    left: TwinTape<T>,
    right: TwinTape<T>,
    fused: Vec<T>,
    h1z: Vec<T>,
    h1: Vec<T>,
    logit: T,
}

fn pair_forward<T: Scalar>(params: &ParamSet<T>, a: &[T], b: &[T]) -> Result<PairTape<T>> {
    check_width(a)?;
    check_width(b)?;
    let left = twin_forward(params, a);
    let right = twin_forward(params, b);
    let fused: Vec<T> =
        left.a3.iter().zip(&right.a3).map(|(&u, &v)| (u - v).abs()).collect();
    let h1z = affine(params.get("head.l1.w"), params.get("head.l1.b"), &fused);
    let h1 = relu_vec(&h1z);
    let logit = affine(params.get("head.l2.w"), params.get("head.l2.b"), &h1)[0];
    if !logit.is_finite() {
        return Err(Error::Numeric("similarity logit is not finite".into()));
    }
    Ok(PairTape { left, right, fused, h1z, h1, logit })
}

/// Similarity score of two embeddings, in [0, 1]. Symmetric down to the
/// bit: `similarity(a, b)` and `similarity(b, a)` are identical.
pub fn similarity<T: Scalar>(model: &SnnModel<T>, a: &[T], b: &[T]) -> Result<T> {
    Ok(sigmoid(pair_forward(&model.params, a, b)?.logit))
}

/// Binary cross-entropy of one pair, computed from the logit. `same` pairs
/// have target 1.
pub fn pair_loss<T: Scalar>(model: &SnnModel<T>, a: &[T], b: &[T], same: bool) -> Result<T> {
    let logit = pair_forward(&model.params, a, b)?.logit;
    Ok(bce_from_logit(logit, same))
}

fn bce_from_logit<T: Scalar>(logit: T, same: bool) -> T {
    let t = if same { T::one() } else { T::zero() };
    softplus(logit) - t * logit
}

/// Loss and gradient of one pair, accumulating `grad_scale` times the
/// gradients into the parameter set. Returns (loss, score).
pub fn pair_loss_and_grad<T: Scalar>(
    params: &mut ParamSet<T>,
    a: &[T],
    b: &[T],
    same: bool,
    grad_scale: T,
) -> Result<(T, T)> {
    let tape = pair_forward(params, a, b)?;
    let loss = bce_from_logit(tape.logit, same);
    let score = sigmoid(tape.logit);

    let t = if same { T::one() } else { T::zero() };
    let d_logit = (score - t) * grad_scale;

    // Head layer 2: logit = w2 h1 + b2.
    {
        let d_w2 = params.grad_mut("head.l2.w");
        for i in 0..HEAD1 {
            let cur = d_w2.get(0, i);
            d_w2.set(0, i, cur + d_logit * tape.h1[i]);
        }
    }
    {
        let d_b2 = params.grad_mut("head.l2.b");
        let cur = d_b2.get(0, 0);
        d_b2.set(0, 0, cur + d_logit);
    }

    // Head layer 1: h1 = relu(W1 d + b1).
    let w2 = params.get("head.l2.w").clone();
    let mut d_h1z = vec![T::zero(); HEAD1];
    for i in 0..HEAD1 {
        if tape.h1z[i] > T::zero() {
            d_h1z[i] = d_logit * w2.get(0, i);
        }
    }
    let w1 = params.get("head.l1.w").clone();
    {
        let d_w1 = params.grad_mut("head.l1.w");
        for o in 0..HEAD1 {
            for i in 0..TWIN3 {
                let cur = d_w1.get(o, i);
                d_w1.set(o, i, cur + d_h1z[o] * tape.fused[i]);
            }
        }
    }
    {
        let d_b1 = params.grad_mut("head.l1.b");
        for o in 0..HEAD1 {
            let cur = d_b1.get(0, o);
            d_b1.set(0, o, cur + d_h1z[o]);
        }
    }

    // Fuse: d = |u - v|, so dd/du = sign(u - v) and dd/dv is its negation.
    // Exact ties contribute nothing (subgradient 0).
    let mut d_u = vec![T::zero(); TWIN3];
    let mut d_v = vec![T::zero(); TWIN3];
    for i in 0..TWIN3 {
        let d_fused: T = (0..HEAD1).map(|o| d_h1z[o] * w1.get(o, i)).fold(T::zero(), |x, y| x + y);
        let diff = tape.left.a3[i] - tape.right.a3[i];
        if diff > T::zero() {
            d_u[i] = d_fused;
            d_v[i] = -d_fused;
        } else if diff < T::zero() {
            d_u[i] = -d_fused;
            d_v[i] = d_fused;
        }
    }

    twin_backward(params, &tape.left, &d_u)?;
    twin_backward(params, &tape.right, &d_v)?;
    Ok((loss, score))
}

/// Backpropagate a gradient on the twin output through one path; both paths
/// accumulate into the same shared weights.
fn twin_backward<T: Scalar>(params: &mut ParamSet<T>, tape: &TwinTape<T>, d_out: &[T]) -> Result<()> {
    let d_z3 = masked(d_out, &tape.z3);
    accumulate_layer(params, "twin.l3.w", "twin.l3.b", &d_z3, &tape.a2);
    let d_a2 = back_through(params.get("twin.l3.w"), &d_z3);

    let d_z2 = masked(&d_a2, &tape.z2);
    accumulate_layer(params, "twin.l2.w", "twin.l2.b", &d_z2, &tape.a1);
    let d_a1 = back_through(params.get("twin.l2.w"), &d_z2);

    let d_z1 = masked(&d_a1, &tape.z1);
    accumulate_layer(params, "twin.l1.w", "twin.l1.b", &d_z1, &tape.x);
    Ok(())
}

fn masked<T: Scalar>(grad: &[T], pre: &[T]) -> Vec<T> {
    grad.iter()
        .zip(pre)
        .map(|(&g, &z)| if z > T::zero() { g } else { T::zero() })
        .collect()
}

fn accumulate_layer<T: Scalar>(
    params: &mut ParamSet<T>,
    w_name: &str,
    b_name: &str,
    d_z: &[T],
    input: &[T],
) {
    {
        let d_w = params.grad_mut(w_name);
        for (o, &dz) in d_z.iter().enumerate() {
            if dz == T::zero() {
                continue;
            }
            for (i, &xi) in input.iter().enumerate() {
                let cur = d_w.get(o, i);
                d_w.set(o, i, cur + dz * xi);
            }
        }
    }
    let d_b = params.grad_mut(b_name);
    for (o, &dz) in d_z.iter().enumerate() {
        let cur = d_b.get(0, o);
        d_b.set(0, o, cur + dz);
    }
}

/// `Wᵀ d_z` for `W` stored `out x in`.
fn back_through<T: Scalar>(w: &Matrix<T>, d_z: &[T]) -> Vec<T> {
    (0..w.cols())
        .map(|i| {
            d_z.iter()
                .enumerate()
                .fold(T::zero(), |acc, (o, &dz)| acc + dz * w.get(o, i))
        })
        .collect()
}
