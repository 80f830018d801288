//! Scoring: normalized estimation error, fault-detection error, symbol error
//! rate and the matrix norms used to scale the regularizers.

use crate::error::{invalid, Result};
use crate::linalg::{row_norms, singular_values};
use crate::CMat;

/// Returned by [`normalized_error_db`] for an exact estimate.
pub const EXACT_RECOVERY_DB: f64 = -300.0;

/// `10 log10(||H - H_hat||_F^2 / (M K))`.
pub fn normalized_error_db(h: &CMat, h_hat: &CMat) -> Result<f64> {
    if h.shape() != h_hat.shape() {
        return Err(invalid(format!("shape mismatch: {:?} vs {:?}", h.shape(), h_hat.shape())));
    }
    if h.is_empty() {
        return Err(invalid("empty matrices"));
    }
    let mse = (h - h_hat).norm_squared() / h.len() as f64;
    if mse == 0.0 {
        return Ok(EXACT_RECOVERY_DB);
    }
    Ok((10.0 * mse.log10()).max(EXACT_RECOVERY_DB))
}

/// Hamming distance between the true and estimated fault indicators.
pub fn detection_error(s: &[bool], s_hat: &[bool]) -> Result<usize> {
    if s.len() != s_hat.len() {
        return Err(invalid(format!("length mismatch: {} vs {}", s.len(), s_hat.len())));
    }
    Ok(s.iter().zip(s_hat).filter(|(a, b)| a != b).count())
}

pub fn spectral_norm(z: &CMat) -> f64 {
    singular_values(z).first().copied().unwrap_or(0.0)
}

/// `||Z||_{2,inf}`: the largest row norm.
pub fn row_linf_norm(z: &CMat) -> f64 {
    row_norms(z).into_iter().fold(0.0, f64::max)
}

/// `||Z||_{2,1}`: the sum of row norms.
pub fn row_l21_norm(z: &CMat) -> f64 {
    row_norms(z).into_iter().sum()
}

pub fn nuclear_norm(z: &CMat) -> f64 {
    singular_values(z).into_iter().sum()
}

/// Fraction of mismatched symbols.
pub fn symbol_error_rate<T: PartialEq>(decisions: &[T], truth: &[T]) -> Result<f64> {
    if decisions.len() != truth.len() {
        return Err(invalid(format!("length mismatch: {} vs {}", decisions.len(), truth.len())));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = decisions.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn error_db_examples() {
        let h = CMat::from_element(3, 2, C64::new(1.0, -2.0));
        assert_eq!(normalized_error_db(&h, &h).unwrap(), EXACT_RECOVERY_DB);
        let e = CMat::from_element(2, 1, C64::new(1.0, 0.0));
        let z = CMat::zeros(2, 1);
        assert!(normalized_error_db(&e, &z).unwrap().abs() < 1e-12);
        assert!(normalized_error_db(&e, &CMat::zeros(1, 2)).is_err());
    }

    #[test]
    fn detection_examples() {
        let s = [true, false, false];
        assert_eq!(detection_error(&s, &s).unwrap(), 0);
        assert_eq!(detection_error(&s, &[false, true, true]).unwrap(), 3);
        assert_eq!(detection_error(&s, &[false, true, false]).unwrap(), 2);
        assert!(detection_error(&s, &[true]).is_err());
    }

    #[test]
    fn norm_examples() {
        let i = CMat::identity(4, 4);
        assert!((spectral_norm(&i) - 1.0).abs() < 1e-12);
        assert!((row_linf_norm(&i) - 1.0).abs() < 1e-12);
        let u = CMat::from_fn(3, 1, |r, _| C64::new([0.6, 0.0, 0.8][r], 0.0));
        let v = CMat::from_fn(2, 1, |r, _| C64::new(0.0, [1.0, 0.0][r]));
        assert!((spectral_norm(&(&u * v.transpose())) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ser_examples() {
        assert_eq!(symbol_error_rate(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(symbol_error_rate(&[0, 0], &[1, 1]).unwrap(), 1.0);
        assert_eq!(symbol_error_rate(&[0, 1, 2, 3], &[0, 1, 2, 0]).unwrap(), 0.25);
    }
}
