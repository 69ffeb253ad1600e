//! Similarity-score encoding for the two perceptrons.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("score {0} outside [0, {1}]")]
    OutOfRange(f64, f64),
    #[error("malformed output distribution: {0}")]
    BadDistribution(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// One probability: the chance of perfect similarity. Score = p · M.
    Binary,
    /// A distribution over grades 0..=M with mass split between the two
    /// integers adjacent to the score. Score = ⟨out, [0, 1, …, M]⟩.
    NClass,
}

/// Encode a score in [0, M] as the target the network is trained against.
pub fn encode_target(score: f64, scheme: Scheme, max_score: u32) -> Result<Vec<f64>, EncodeError> {
    let m = max_score as f64;
    if !(0.0..=m).contains(&score) || !score.is_finite() {
        return Err(EncodeError::OutOfRange(score, m));
    }
    match scheme {
        Scheme::Binary => Ok(vec![score / m]),
        Scheme::NClass => {
            let mut v = vec![0.0; max_score as usize + 1];
            let lo = score.floor() as usize;
            let frac = score - score.floor();
            if frac == 0.0 {
                v[lo] = 1.0;
            } else {
                v[lo] = 1.0 - frac;
                v[lo + 1] = frac;
            }
            Ok(v)
        }
    }
}

/// Read a score in [0, M] back out of a network output.
pub fn decode_output(out: &[f64], scheme: Scheme, max_score: u32) -> Result<f64, EncodeError> {
    let m = max_score as f64;
    match scheme {
        Scheme::Binary => {
            if out.len() != 1 || !(0.0..=1.0).contains(&out[0]) {
                return Err(EncodeError::BadDistribution(format!("{out:?}")));
            }
            Ok(out[0] * m)
        }
        Scheme::NClass => {
            if out.len() != max_score as usize + 1 {
                return Err(EncodeError::BadDistribution(format!(
                    "expected {} classes, got {}",
                    max_score + 1,
                    out.len()
                )));
            }
            let sum: f64 = out.iter().sum();
            if (sum - 1.0).abs() > 1e-6 || out.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
                return Err(EncodeError::BadDistribution(format!("{out:?}")));
            }
            Ok(out.iter().enumerate().map(|(i, p)| i as f64 * p).sum())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nclass_splits_mass_between_adjacent_grades() {
        let v = encode_target(2.7, Scheme::NClass, 5).unwrap();
        let want = [0.0, 0.0, 0.3, 0.7, 0.0, 0.0];
        for (a, b) in v.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn score_zero_is_one_hot_at_zero() {
        assert_eq!(
            encode_target(0.0, Scheme::NClass, 5).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn binary_scales_by_max() {
        assert_eq!(encode_target(4.0, Scheme::Binary, 5).unwrap(), vec![0.8]);
        assert_eq!(decode_output(&[0.8], Scheme::Binary, 5).unwrap(), 4.0);
    }

    #[test]
    fn decode_nclass_is_expectation() {
        let got = decode_output(&[0.0, 0.0, 0.3, 0.7, 0.0, 0.0], Scheme::NClass, 5).unwrap();
        assert!((got - 2.7).abs() < 1e-12);
        let one_hot = decode_output(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], Scheme::NClass, 5).unwrap();
        assert_eq!(one_hot, 3.0);
    }

    #[test]
    fn round_trip_is_exact() {
        for k in 0..=50 {
            let score = k as f64 * 0.1;
            for scheme in [Scheme::Binary, Scheme::NClass] {
                let enc = encode_target(score, scheme, 5).unwrap();
                let dec = decode_output(&enc, scheme, 5).unwrap();
                assert!((dec - score).abs() < 1e-9, "{scheme:?} {score}");
            }
        }
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(encode_target(5.1, Scheme::Binary, 5).is_err());
        assert!(encode_target(-0.1, Scheme::NClass, 5).is_err());
        assert!(decode_output(&[0.5, 0.6], Scheme::Binary, 5).is_err());
        assert!(decode_output(&[0.5, 0.6], Scheme::NClass, 5).is_err());
    }
}
