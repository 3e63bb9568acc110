//! Weight normalization, systematic resampling and weighted statistics.

use rand::Rng;

use crate::density::{Particle, ParticleCloud};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};
use crate::state::State;

/// Scales nonnegative weights to sum to one, preserving order.
///
/// The vector is divided by its maximum before summation so inputs near the
/// bottom of the floating-point range do not underflow.
pub fn normalize_weights<T: Scalar>(weights: &[T]) -> Result<Vec<T>> {
    if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    let max = weights.iter().copied().fold(T::zero(), T::max);
    if max <= T::zero() {
        return Err(Error::DegenerateWeights);
    }
    let scaled: Vec<T> = weights.iter().map(|&w| w / max).collect();
    let total: T = scaled.iter().copied().sum();
    Ok(scaled.into_iter().map(|w| w / total).collect())
}

/// Converts log weights into normalized linear weights via log-sum-exp.
/// Entries equal to `-inf` map to zero.
pub fn normalize_log_weights<T: Scalar>(log_weights: &[T]) -> Result<Vec<T>> {
    if log_weights.iter().any(|w| w.is_nan() || *w == T::infinity()) {
        return Err(Error::DegenerateWeights);
    }
    let lse = log_sum_exp(log_weights);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(log_weights.iter().map(|&w| (w - lse).exp()).collect())
}

/// Ancestor indices chosen by systematic resampling of `weights`.
///
/// One uniform draw `u ∈ [0, 1/count)` places `count` evenly spaced pointers
/// over the cumulative weight; ancestor `j` receives either `⌊count·W_j⌋` or
/// `⌈count·W_j⌉` copies. Weights need not be normalized.
pub fn systematic_indices<T: Scalar, R: Rng + ?Sized>(
    weights: &[T],
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(Error::ZeroResampleCount);
    }
    if weights.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let total: T = weights.iter().copied().sum();
    if !(total.is_finite() && total > T::zero()) || weights.iter().any(|w| *w < T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    let step = T::one() / T::from_usize(count).unwrap();
    let offset = T::unit_uniform(rng) * step;
    let last = weights.len() - 1;
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    let mut cumulative = weights[0] / total;
    for k in 0..count {
        let pointer = offset + T::from_usize(k).unwrap() * step;
        while pointer >= cumulative && j < last {
            j += 1;
            cumulative += weights[j] / total;
        }
        out.push(j);
    }
    Ok(out)
}

/// Systematic resampling to `count` equally weighted particles.
pub fn systematic_resample<T: Scalar, R: Rng + ?Sized>(
    cloud: &ParticleCloud<T>,
    count: usize,
    rng: &mut R,
) -> Result<ParticleCloud<T>> {
    let weights: Vec<T> = cloud.weights().collect();
    let idx = systematic_indices(&weights, count, rng)?;
    let w = T::one() / T::from_usize(count).unwrap();
    Ok(ParticleCloud::new(
        idx.into_iter().map(|j| Particle::new(cloud.particles[j].state, w)).collect(),
    ))
}

/// `Σ_p w_p x_p` over a normalized cloud.
pub fn weighted_mean<T: Scalar>(cloud: &ParticleCloud<T>) -> Result<State<T>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut acc = State::zero();
    for p in &cloud.particles {
        acc = acc + p.state * p.weight;
    }
    Ok(acc)
}
