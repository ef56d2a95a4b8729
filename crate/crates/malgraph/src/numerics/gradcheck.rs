//! Central-difference gradient verification.
//!
//! `grad_check` probes a deterministic scalar loss around the current
//! parameters and compares the finite-difference slope against the gradients
//! an analytic backward pass computes. Run it in 64-bit mode; the rounding
//! floor of `f32` drowns the comparison.

use rand::Rng;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::numerics::params::ParamSet;
use crate::numerics::scalar::{as_f64, real, Scalar};

/// Outcome of one gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Worst relative error over all probed coordinates.
    pub max_rel_error: f64,
    /// Number of coordinates probed.
    pub probes: usize,
}

/// Compare analytic gradients against central finite differences.
///
/// `loss_and_grad` must evaluate the loss for the current parameter values
/// and leave matching gradients in the set; it has to be deterministic, so
/// any sampling noise inside the model must be frozen by the caller. When
/// `probe_count` is smaller than the number of scalar parameters, that many
/// coordinates are sampled without replacement; otherwise all are probed.
///
/// The relative error per coordinate is
/// `|analytic - numeric| / max(1e-12, |analytic| + |numeric|)`.
pub fn grad_check<T: Scalar>(
    params: &mut ParamSet<T>,
    mut loss_and_grad: impl FnMut(&mut ParamSet<T>) -> Result<T>,
    probe_count: usize,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<GradCheckReport> {
    let base_loss = loss_and_grad(params)?;
    if !base_loss.is_finite() {
        return Err(Error::Numeric("gradient check loss is not finite".into()));
    }

    // Snapshot analytic gradients as (param index, entry index) -> value.
    let analytic: Vec<Vec<f64>> = (0..params.len())
        .map(|idx| params.by_index(idx).grad.data().iter().map(|&g| as_f64(g)).collect())
        .collect();

    let total: usize = params.scalar_count();
    if total == 0 {
        return Err(Error::State("gradient check on an empty parameter set".into()));
    }
    let coords: Vec<usize> = if probe_count >= total {
        (0..total).collect()
    } else {
        let mut picked: Vec<usize> = sample(rng, total, probe_count).into_iter().collect();
        picked.sort_unstable();
        picked
    };

    // Map a flat coordinate to (parameter, offset) by walking sizes.
    let sizes: Vec<usize> =
        (0..params.len()).map(|i| params.by_index(i).value.data().len()).collect();

    let eps: T = real(epsilon);
    let mut max_rel_error = 0.0f64;
    for flat in &coords {
        let (mut idx, mut offset) = (0usize, *flat);
        while offset >= sizes[idx] {
            offset -= sizes[idx];
            idx += 1;
        }

        let original = params.by_index(idx).value.data()[offset];
        params.value_mut_by_index(idx).data_mut()[offset] = original + eps;
        let plus = loss_and_grad(params)?;
        params.value_mut_by_index(idx).data_mut()[offset] = original - eps;
        let minus = loss_and_grad(params)?;
        params.value_mut_by_index(idx).data_mut()[offset] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric("perturbed loss is not finite".into()));
        }

        let numeric = (as_f64(plus) - as_f64(minus)) / (2.0 * epsilon);
        let exact = analytic[idx][offset];
        let rel = (exact - numeric).abs() / (exact.abs() + numeric.abs()).max(1e-12);
        if rel > max_rel_error {
            max_rel_error = rel;
        }
    }

    // Restore the analytic gradients for the unperturbed parameters, so the
    // set is left exactly as one forward/backward pass put it.
    loss_and_grad(params)?;
    Ok(GradCheckReport { max_rel_error, probes: coords.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::Matrix;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// L = 0.5 * sum(w^2) has gradient exactly w.
    fn quadratic(params: &mut ParamSet<f64>) -> Result<f64> {
        let w = params.get("w").clone();
        let loss = 0.5 * w.data().iter().map(|x| x * x).sum::<f64>();
        let g = params.grad_mut("w");
        g.data_mut().copy_from_slice(w.data());
        Ok(loss)
    }

    #[test]
    fn quadratic_loss_passes_tightly() {
        let mut params = ParamSet::new();
        params
            .insert("w", Matrix::from_vec(2, 3, vec![0.3, -1.2, 0.7, 2.0, -0.4, 0.05]).unwrap())
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = grad_check(&mut params, quadratic, usize::MAX, 1e-5, &mut rng).unwrap();
        assert_eq!(report.probes, 6);
        assert!(report.max_rel_error < 1e-9, "rel error {}", report.max_rel_error);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let mut params = ParamSet::new();
        params.insert("w", Matrix::from_vec(1, 1, vec![0.8]).unwrap()).unwrap();
        let bad = |p: &mut ParamSet<f64>| {
            let w = p.get("w").get(0, 0);
            p.grad_mut("w").set(0, 0, 2.5 * w); // true gradient is w
            Ok(0.5 * w * w)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = grad_check(&mut params, bad, usize::MAX, 1e-5, &mut rng).unwrap();
        assert!(report.max_rel_error > 0.1);
    }

    #[test]
    fn non_finite_loss_is_a_numeric_error() {
        let mut params = ParamSet::new();
        params.insert("w", Matrix::from_vec(1, 1, vec![1.0]).unwrap()).unwrap();
        let nan = |p: &mut ParamSet<f64>| {
            p.grad_mut("w").set(0, 0, 0.0);
            Ok(f64::NAN)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            grad_check(&mut params, nan, 1, 1e-5, &mut rng),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn probe_subset_is_respected() {
        let mut params = ParamSet::new();
        params.insert("w", Matrix::from_vec(4, 4, vec![0.1; 16]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let report = grad_check(&mut params, quadratic, 5, 1e-5, &mut rng).unwrap();
        assert_eq!(report.probes, 5);
    }
}
