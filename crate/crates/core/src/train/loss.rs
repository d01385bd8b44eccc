//! Binary cross-entropy with the probability clamp documented in the README.

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::tensor::Tensor4;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any log.
pub const PROB_CLAMP: f64 = 1e-7;

fn check_pair<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "bce: prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

#[inline]
fn clamp01<T: Scalar>(p: T) -> T {
    let lo = sc::<T>(PROB_CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        lo
    } else if p > hi {
        hi
    } else {
        p
    }
}

/// Mean over elements of `-(t ln p + (1 - t) ln(1 - p))`.
pub fn bce_loss<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<T> {
    check_pair(pred, target)?;
    let n = sc::<T>(pred.len() as f64);
    let mut total = T::zero();
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let p = clamp01(p);
        total = total - (t * p.ln() + (T::one() - t) * (T::one() - p).ln());
    }
    Ok(total / n)
}

/// Gradient of [`bce_loss`] with respect to the prediction:
/// `(p - t) / (p (1 - p)) / N` elementwise, finite thanks to the clamp.
pub fn bce_grad<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<Tensor4<T>> {
    check_pair(pred, target)?;
    let n = sc::<T>(pred.len() as f64);
    let mut out = pred.clone();
    for (g, &t) in out.data_mut().iter_mut().zip(target.data()) {
        let p = clamp01(*g);
        *g = (p - t) / (p * (T::one() - p)) / n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn scalar_pair(p: f64, t: f64) -> (Tensor4<f64>, Tensor4<f64>) {
        (
            Tensor4::new(1, 1, 1, 1, vec![p]).unwrap(),
            Tensor4::new(1, 1, 1, 1, vec![t]).unwrap(),
        )
    }

    #[test]
    fn half_confidence_costs_ln_two() {
        let (p, t) = scalar_pair(0.5, 1.0);
        assert!((bce_loss(&p, &t).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_cost_almost_nothing() {
        let p = Tensor4::new(1, 1, 2, 1, vec![1.0 - PROB_CLAMP, PROB_CLAMP]).unwrap();
        let t = Tensor4::new(1, 1, 2, 1, vec![1.0, 0.0]).unwrap();
        assert!(bce_loss(&p, &t).unwrap() < 1e-6);
    }

    #[test]
    fn loss_matches_direct_summation_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.gen_range(1..40);
            let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
            let p = Tensor4::new(1, 1, n, 1, probs.clone()).unwrap();
            let t = Tensor4::new(1, 1, n, 1, labels.clone()).unwrap();

            let direct: f64 = probs
                .iter()
                .zip(&labels)
                .map(|(&p, &t)| -(t * p.ln() + (1.0 - t) * (1.0 - p).ln()))
                .sum::<f64>()
                / n as f64;
            assert!((bce_loss(&p, &t).unwrap() - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_analytic_values_and_symmetry() {
        let (p, t) = scalar_pair(0.5, 1.0);
        assert!((bce_grad(&p, &t).unwrap().data()[0] + 2.0).abs() < 1e-12);
        let (p, t) = scalar_pair(0.5, 0.0);
        assert!((bce_grad(&p, &t).unwrap().data()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let n = 6;
        let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let labels: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        let t = Tensor4::new(1, 1, n, 1, labels).unwrap();
        let eps = 1e-6;
        let grad = bce_grad(&Tensor4::new(1, 1, n, 1, probs.clone()).unwrap(), &t).unwrap();
        for i in 0..n {
            let mut plus = probs.clone();
            let mut minus = probs.clone();
            plus[i] += eps;
            minus[i] -= eps;
            let lp = bce_loss(&Tensor4::new(1, 1, n, 1, plus).unwrap(), &t).unwrap();
            let lm = bce_loss(&Tensor4::new(1, 1, n, 1, minus).unwrap(), &t).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let g = grad.data()[i];
            let rel = (fd - g).abs() / g.abs().max(fd.abs()).max(1e-12);
            assert!(rel <= 1e-6, "element {i}: fd {fd} vs analytic {g}");
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = Tensor4::<f64>::zeros(1, 2, 2, 1).unwrap();
        let t = Tensor4::<f64>::zeros(1, 2, 3, 1).unwrap();
        assert!(bce_loss(&p, &t).is_err());
        assert!(bce_grad(&p, &t).is_err());
    }
}
