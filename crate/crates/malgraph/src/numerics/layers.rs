//! Layer primitives: activations, adjacency normalization, graph-conv and
//! dense layers, and the stable softmax used by the classifier head.

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::scalar::{real, Scalar};

/// Activation applied elementwise at a layer output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => relu(x),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Stable `ln(1 + exp(x))`.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Symmetric degree normalization with self-loops:
/// `Â = D^{-1/2} (A ∨ Aᵀ ∨ I) D^{-1/2}`.
///
/// The input must be square and binary. Directed inputs are symmetrized by
/// edge union before self-loops are attached, and the upper triangle is
/// mirrored onto the lower one so the result is symmetric bit for bit.
pub fn normalize_adjacency<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape {
            op: "normalize_adjacency",
            detail: format!("{}x{} is not square", a.rows(), a.cols()),
        });
    }
    if a.data().iter().any(|&x| x != T::zero() && x != T::one()) {
        return Err(Error::Validation("adjacency entries must be 0 or 1".into()));
    }

    // Binary union A ∨ Aᵀ ∨ I, kept as bools so degrees are exact integers.
    let mut tilde = vec![false; n * n];
    for i in 0..n {
        tilde[i * n + i] = true;
        for j in 0..n {
            if a.get(i, j) == T::one() {
                tilde[i * n + j] = true;
                tilde[j * n + i] = true;
            }
        }
    }
    let degrees: Vec<T> = (0..n)
        .map(|i| real(tilde[i * n..(i + 1) * n].iter().filter(|&&x| x).count() as f64))
        .collect();

    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if tilde[i * n + j] {
                let v = T::one() / (degrees[i] * degrees[j]).sqrt();
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
    }
    Ok(out)
}

/// One graph-convolution layer: `act(Â · H · W)`.
pub fn gcn_layer<T: Scalar>(
    a_hat: &Matrix<T>,
    h: &Matrix<T>,
    w: &Matrix<T>,
    activation: Activation,
) -> Result<Matrix<T>> {
    let propagated = a_hat.matmul(h)?;
    Ok(propagated.matmul(w)?.map(|x| activation.apply(x)))
}

/// One dense layer: `act(W x + b)` with `W` stored as `out x in`.
pub fn dense_layer<T: Scalar>(
    x: &[T],
    w: &Matrix<T>,
    b: &[T],
    activation: Activation,
) -> Result<Vec<T>> {
    if w.cols() != x.len() || w.rows() != b.len() {
        return Err(Error::Shape {
            op: "dense_layer",
            detail: format!("W {}x{}, x {}, b {}", w.rows(), w.cols(), x.len(), b.len()),
        });
    }
    Ok((0..w.rows())
        .map(|i| {
            let pre = w.row(i).iter().zip(x).fold(b[i], |acc, (&wij, &xj)| acc + wij * xj);
            activation.apply(pre)
        })
        .collect())
}

/// Stable softmax over a slice (max-shifted before exponentiation).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: T = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of integer class `target` under `logits`, via log-sum-exp.
pub fn cross_entropy<T: Scalar>(logits: &[T], target: usize) -> T {
    let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    lse - logits[target]
}
