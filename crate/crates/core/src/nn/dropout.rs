use rand::Rng;

use crate::error::{Error, Result};

/// Inverted-dropout mask: each entry is 0 with probability `p`, else `1/(1-p)`.
pub fn dropout_mask<R: Rng + ?Sized>(dim: usize, p: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok(vec![1.0; dim]);
    }
    let keep = 1.0 / (1.0 - p);
    Ok((0..dim)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dropout_mask(5, 0.0, &mut rng).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn invalid_probability_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(dropout_mask(3, 1.0, &mut rng).is_err());
        assert!(dropout_mask(3, -0.1, &mut rng).is_err());
    }

    #[test]
    fn empirical_rate_and_unit_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mask = dropout_mask(100_000, 0.5, &mut rng).unwrap();
        let zeros = mask.iter().filter(|&&m| m == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.5).abs() < 0.01, "zero fraction {zeros}");
        let mean = mask.iter().sum::<f64>() / 1e5;
        assert!((mean - 1.0).abs() < 0.02);

        for p in [0.1f64, 0.3, 0.7] {
            let keep = 1.0 / (1.0 - p);
            // E[m] = (1 - p) * 1/(1-p)
            assert!(((1.0 - p) * keep - 1.0).abs() < 1e-12);
        }
    }
}
