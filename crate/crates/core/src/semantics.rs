//! Scalar primitives: entailment score and distance, softmax, entropy.

use crate::embed::EmbeddingVector;
use crate::error::{CarolError, Result};

fn check_dims(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CarolError::input(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Asymmetric alignment of `a` toward `b`: `<a, b> / ||b||`.
///
/// Linear in `a`, invariant to positive rescaling of `b`.
pub fn entailment_score(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dims(a, b)?;
    let nb = b.norm();
    if nb == 0.0 {
        return Err(CarolError::Degenerate("second argument has zero norm".into()));
    }
    Ok(a.dot(b) / nb)
}

/// Cosine distance `1 - cos(a, b)` clamped to `[0, 2]`.
///
/// This is the quantity every "nearest" decision is made on: 0 for positively
/// parallel vectors, 1 for orthogonal ones, 2 for antipodal ones.
pub fn entailment_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(CarolError::Degenerate("zero-norm embedding".into()));
    }
    Ok((1.0 - a.dot(b) / (na * nb)).clamp(0.0, 2.0))
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(CarolError::input("softmax of an empty vector"));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(CarolError::input("softmax logits must be finite"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub(crate) fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(CarolError::input("empty probability vector"));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(CarolError::input(format!("invalid probability {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CarolError::input(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p)?;
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum();
    h.max(0.0)
}

/// `exp(H(p))`.
pub fn perplexity(p: &[f64]) -> Result<f64> {
    Ok(shannon_entropy(p)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn score_examples() {
        assert_eq!(entailment_score(&v(&[1.0, 0.0]), &v(&[0.0, 2.0])).unwrap(), 0.0);
        assert_eq!(entailment_score(&v(&[3.0, 4.0]), &v(&[3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(entailment_score(&v(&[1.0, 1.0]), &v(&[2.0, 0.0])).unwrap(), 1.0);
        let rev = entailment_score(&v(&[2.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((rev - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn score_errors() {
        assert!(matches!(
            entailment_score(&v(&[1.0]), &v(&[1.0, 2.0])),
            Err(CarolError::Input(_))
        ));
        assert!(matches!(
            entailment_score(&v(&[1.0, 0.0]), &v(&[0.0, 0.0])),
            Err(CarolError::Degenerate(_))
        ));
        assert!(matches!(
            entailment_distance(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(CarolError::Degenerate(_))
        ));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(entailment_distance(&v(&[3.0, 4.0]), &v(&[3.0, 4.0])).unwrap(), 0.0);
        assert_eq!(entailment_distance(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(entailment_distance(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[2.0, 1.0, 0.5, -1.0]).unwrap();
        assert!((p[0] - 0.61).abs() < 0.005, "{}", p[0]);
        let u = softmax(&[7.0, 7.0, 7.0]).unwrap();
        assert!(u.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(softmax(&[-3.0]).unwrap(), vec![1.0]);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((shannon_entropy(&[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let k = 7;
        let u = vec![1.0 / k as f64; k];
        assert!((shannon_entropy(&u).unwrap() - (k as f64).ln()).abs() < 1e-12);
        assert!((perplexity(&u).unwrap() - k as f64).abs() < 1e-9);
        assert!(shannon_entropy(&[0.5, 0.6]).is_err());
        assert!(shannon_entropy(&[1.5, -0.5]).is_err());
    }

    fn vec2() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|d| {
            (
                prop::collection::vec(-5.0f64..5.0, d),
                prop::collection::vec(-5.0f64..5.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn score_linear_in_first_scale_free_in_second((a, b) in vec2(), lam in 0.1f64..10.0) {
            let (va, vb) = (v(&a), v(&b));
            prop_assume!(vb.norm() > 1e-6);
            let base = entailment_score(&va, &vb).unwrap();
            let scaled_a = v(&a.iter().map(|x| x * lam).collect::<Vec<_>>());
            let scaled_b = v(&b.iter().map(|x| x * lam).collect::<Vec<_>>());
            prop_assert!((entailment_score(&scaled_a, &vb).unwrap() - lam * base).abs() < 1e-9 * (1.0 + base.abs() * lam));
            prop_assert!((entailment_score(&va, &scaled_b).unwrap() - base).abs() < 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn distance_symmetric_and_bounded((a, b) in vec2()) {
            let (va, vb) = (v(&a), v(&b));
            prop_assume!(va.norm() > 1e-6 && vb.norm() > 1e-6);
            let d1 = entailment_distance(&va, &vb).unwrap();
            let d2 = entailment_distance(&vb, &va).unwrap();
            prop_assert!((0.0..=2.0).contains(&d1));
            prop_assert!((d1 - d2).abs() < 1e-15);
        }

        #[test]
        fn softmax_shift_invariant(xs in prop::collection::vec(-30.0f64..30.0, 1..10), c in -100.0f64..100.0) {
            let p = softmax(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let q = softmax(&shifted).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
