use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy, with probabilities clamped to
/// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "bce_loss: {} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        total -= match y {
            1 => p.ln(),
            0 => (1.0 - p).ln(),
            other => return Err(Error::invalid(format!("label {other} is not 0 or 1"))),
        };
    }
    Ok(total / probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((bce_loss(&[0.5], &[1]).unwrap() - 0.693147).abs() < 1e-6);
        assert!(bce_loss(&[1.0], &[1]).unwrap() <= 2.8e-11);
        let expected = (-(0.9f64).ln() - (0.8f64).ln()) / 2.0;
        let got = bce_loss(&[0.9, 0.2], &[1, 0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.164252).abs() < 1e-6);
    }

    #[test]
    fn clamps_certain_mistakes() {
        let l = bce_loss(&[0.0], &[1]).unwrap();
        assert!(l.is_finite() && (l - 27.631).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[0.5, 0.5], &[1]).is_err());
        assert!(bce_loss(&[0.5], &[2]).is_err());
    }
}
