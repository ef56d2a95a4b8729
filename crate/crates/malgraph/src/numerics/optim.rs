//! SGD and Adam parameter updates over a [`ParamSet`].

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::numerics::params::ParamSet;
use crate::numerics::scalar::{real, Scalar};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer with per-parameter state. Adam keeps first/second moment
/// estimates aligned index-for-index with the parameter set it was built for.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    learning_rate: T,
    step: u64,
    // (m, v) per parameter, empty for SGD.
    moments: Vec<(Matrix<T>, Matrix<T>)>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerState {
            kind: OptimizerKind::Sgd,
            learning_rate: real(learning_rate),
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn adam(learning_rate: f64, params: &ParamSet<T>) -> Self {
        let moments = params
            .iter()
            .map(|p| {
                (
                    Matrix::zeros(p.value.rows(), p.value.cols()),
                    Matrix::zeros(p.value.rows(), p.value.cols()),
                )
            })
            .collect();
        OptimizerState {
            kind: OptimizerKind::Adam,
            learning_rate: real(learning_rate),
            step: 0,
            moments,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update using the gradients currently in `params`.
    ///
    /// Fails if no backward pass populated gradients since the last
    /// `zero_grads`, if the set no longer matches the optimizer state, or if
    /// an update produces a non-finite parameter.
    pub fn step(&mut self, params: &mut ParamSet<T>) -> Result<()> {
        if !params.grads_ready() {
            return Err(Error::State("optimizer step before any backward pass".into()));
        }
        if self.kind == OptimizerKind::Adam && self.moments.len() != params.len() {
            return Err(Error::State(format!(
                "optimizer state holds {} parameters, set holds {}",
                self.moments.len(),
                params.len()
            )));
        }
        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for idx in 0..params.len() {
                    let grad = params.by_index(idx).grad.clone();
                    params.value_mut_by_index(idx).add_assign_scaled(&grad, -lr)?;
                }
            }
            OptimizerKind::Adam => {
                let b1: T = real(ADAM_BETA1);
                let b2: T = real(ADAM_BETA2);
                let eps: T = real(ADAM_EPS);
                let corr1 = T::one() - real::<T>(ADAM_BETA1).powi(self.step as i32);
                let corr2 = T::one() - real::<T>(ADAM_BETA2).powi(self.step as i32);
                for idx in 0..params.len() {
                    let param = params.by_index(idx);
                    if param.grad.rows() != param.value.rows()
                        || param.grad.cols() != param.value.cols()
                    {
                        return Err(Error::Shape {
                            op: "adam_step",
                            detail: format!("gradient shape mismatch for {}", param.name),
                        });
                    }
                    let grad = param.grad.clone();
                    let (m, v) = &mut self.moments[idx];
                    for ((mi, vi), &g) in
                        m.data_mut().iter_mut().zip(v.data_mut().iter_mut()).zip(grad.data())
                    {
                        *mi = b1 * *mi + (T::one() - b1) * g;
                        *vi = b2 * *vi + (T::one() - b2) * g * g;
                    }
                    let value = params.value_mut_by_index(idx);
                    for ((pv, &mi), &vi) in
                        value.data_mut().iter_mut().zip(m.data()).zip(v.data())
                    {
                        let m_hat = mi / corr1;
                        let v_hat = vi / corr2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        for idx in 0..params.len() {
            params.by_index(idx).value.check_finite("optimizer step")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_param(value: f64, grad: f64) -> ParamSet<f64> {
        let mut set = ParamSet::new();
        set.insert("w", Matrix::from_vec(1, 1, vec![value]).unwrap()).unwrap();
        set.grad_mut("w").set(0, 0, grad);
        set
    }

    #[test]
    fn step_without_gradients_is_a_state_error() {
        let mut set = ParamSet::<f64>::new();
        set.insert("w", Matrix::zeros(1, 1)).unwrap();
        let mut opt = OptimizerState::sgd(0.1);
        assert!(matches!(opt.step(&mut set), Err(Error::State(_))));
    }

    #[test]
    fn sgd_with_zero_gradient_leaves_parameters_unchanged() {
        let mut set = one_param(1.5, 0.0);
        let mut opt = OptimizerState::sgd(0.5);
        opt.step(&mut set).unwrap();
        assert_eq!(set.get("w").get(0, 0), 1.5);
    }

    #[test]
    fn sgd_single_scalar_step() {
        // p = 1, g = 1, lr = 0.001 -> 0.999.
        let mut set = one_param(1.0, 1.0);
        let mut opt = OptimizerState::sgd(0.001);
        opt.step(&mut set).unwrap();
        assert_eq!(set.get("w").get(0, 0), 0.999);
    }

    #[test]
    fn adam_first_step_matches_scalar_reference() {
        // Hand-rolled single-coordinate Adam, written independently of the
        // implementation above.
        let (lr, b1, b2, eps) = (0.001f64, 0.9, 0.999, 1e-8);
        let g = 3.0;
        let m = (1.0 - b1) * g;
        let v = (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1);
        let v_hat = v / (1.0 - b2);
        let expected = 1.0 - lr * m_hat / (v_hat.sqrt() + eps);

        let mut set = one_param(1.0, g);
        let mut opt = OptimizerState::adam(lr, &set);
        opt.step(&mut set).unwrap();
        assert_relative_eq!(set.get("w").get(0, 0), expected, epsilon = 1e-15);
    }

    #[test]
    fn adam_two_steps_match_scalar_reference() {
        let (lr, b1, b2, eps) = (0.01f64, 0.9f64, 0.999f64, 1e-8f64);
        let grads = [2.0, -1.0];
        let (mut p, mut m, mut v) = (0.5f64, 0.0, 0.0);
        for (t, &g) in grads.iter().enumerate() {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t as i32 + 1));
            let v_hat = v / (1.0 - b2.powi(t as i32 + 1));
            p -= lr * m_hat / (v_hat.sqrt() + eps);
        }

        let mut set = one_param(0.5, grads[0]);
        let mut opt = OptimizerState::adam(lr, &set);
        opt.step(&mut set).unwrap();
        set.zero_grads();
        set.grad_mut("w").set(0, 0, grads[1]);
        opt.step(&mut set).unwrap();
        assert_relative_eq!(set.get("w").get(0, 0), p, epsilon = 1e-15);
    }

    #[test]
    fn adam_rejects_a_mismatched_set() {
        let set_a = one_param(1.0, 1.0);
        let mut opt = OptimizerState::adam(0.001, &set_a);
        let mut set_b = ParamSet::<f64>::new();
        set_b.insert("w", Matrix::zeros(1, 1)).unwrap();
        set_b.insert("extra", Matrix::zeros(1, 1)).unwrap();
        set_b.grad_mut("w").set(0, 0, 1.0);
        assert!(matches!(opt.step(&mut set_b), Err(Error::State(_))));
    }
}
