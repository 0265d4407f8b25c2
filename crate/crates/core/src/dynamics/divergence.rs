//! Kullback-Leibler divergences over bids and group spending.

use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market};
use crate::trading_post::BidTensor;

/// `Σ x log(x/y)` with `0·log(0/y) = 0`.
pub fn kl(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(MarketError::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    let mut sum = 0.0;
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        if a == 0.0 {
            continue;
        }
        if !(b > 0.0) {
            return Err(MarketError::Divergence(i));
        }
        sum += a * (a / b).ln();
    }
    Ok(sum)
}

/// Generalized form `Σ x log(x/y) − x + y`, nonnegative for any positive pair.
#[cfg(test)]
pub(crate) fn kl_generalized(x: &[f64], y: &[f64]) -> Result<f64> {
    let base = kl(x, y)?;
    Ok(base - x.iter().sum::<f64>() + y.iter().sum::<f64>())
}

/// Divergence between the bids of provider `s`.
pub fn kl_a(x: &BidTensor, y: &BidTensor, s: usize) -> Result<f64> {
    let xs: Vec<f64> = x[s].iter().flatten().copied().collect();
    let ys: Vec<f64> = y[s].iter().flatten().copied().collect();
    kl(&xs, &ys)
}

/// Divergence between the per-group spending of provider `s`.
pub fn kl_b(x: &BidTensor, y: &BidTensor, s: usize) -> Result<f64> {
    kl(&x.group_totals(s), &y.group_totals(s))
}

/// `d_g(x, y) = Σ_s KL_a + Σ_{1<α<∞} KL_b/(α−1)`.
pub fn bregman_divergence(market: &Market, x: &BidTensor, y: &BidTensor) -> Result<f64> {
    let mut total = 0.0;
    for (s, p) in market.providers.iter().enumerate() {
        total += kl_a(x, y, s)?;
        if let Alpha::Finite(a) = p.alpha {
            if a > 1.0 {
                total += kl_b(x, y, s)? / (a - 1.0);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_and_known_value() {
        assert_eq!(kl(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((kl(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl(&[0.5, 0.5], &[1.0, 0.0]), Err(MarketError::Divergence(1)));
    }

    #[test]
    fn nonnegative_on_equal_mass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(1..8);
            let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
            x.iter_mut().for_each(|v| *v /= sx);
            y.iter_mut().for_each(|v| *v /= sy);
            assert!(kl(&x, &y).unwrap() >= -1e-15);
        }
    }
}
