//! Probability containers: particles, Bernoulli components, global hypotheses
//! and the multi-Bernoulli mixture density built from them.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::State;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle<T> {
    pub state: State<T>,
    pub weight: T,
}

impl<T: Scalar> Particle<T> {
    pub fn new(state: State<T>, weight: T) -> Self {
        Particle { state, weight }
    }
}

/// Weighted sample approximation of a single-target density.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleCloud<T> {
    pub particles: Vec<Particle<T>>,
}

impl<T: Scalar> ParticleCloud<T> {
    pub fn new(particles: Vec<Particle<T>>) -> Self {
        ParticleCloud { particles }
    }

    /// Equal-weight cloud over the given states.
    pub fn uniform(states: impl IntoIterator<Item = State<T>>) -> Self {
        let mut particles: Vec<Particle<T>> =
            states.into_iter().map(|s| Particle::new(s, T::one())).collect();
        let w = T::one() / T::from_usize(particles.len().max(1)).unwrap();
        for p in &mut particles {
            p.weight = w;
        }
        ParticleCloud { particles }
    }

    /// Single particle of weight one.
    pub fn point_mass(state: State<T>) -> Self {
        ParticleCloud { particles: vec![Particle::new(state, T::one())] }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = T> + '_ {
        self.particles.iter().map(|p| p.weight)
    }

    pub fn states(&self) -> impl Iterator<Item = &State<T>> + '_ {
        self.particles.iter().map(|p| &p.state)
    }

    pub fn total_weight(&self) -> T {
        self.weights().sum()
    }

    /// Checks finiteness and non-negativity of every particle.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.particles.iter().enumerate() {
            if !(p.weight.is_finite() && p.weight >= T::zero()) {
                return Err(Error::InvalidDensity(format!("particle {i} has weight {}", p.weight)));
            }
            if !p.state.is_finite() {
                return Err(Error::InvalidDensity(format!("particle {i} has non-finite state")));
            }
        }
        Ok(())
    }
}

/// Bernoulli random finite set: empty with probability `1 - existence`,
/// otherwise a single target distributed as `cloud`.
///
/// The cloud is reference counted so hypotheses that descend from the same
/// update share storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliComponent<T> {
    pub existence: T,
    pub cloud: Arc<ParticleCloud<T>>,
}

impl<T: Scalar> BernoulliComponent<T> {
    pub fn new(existence: T, cloud: ParticleCloud<T>) -> Self {
        BernoulliComponent { existence, cloud: Arc::new(cloud) }
    }

    pub fn with_shared(existence: T, cloud: Arc<ParticleCloud<T>>) -> Self {
        BernoulliComponent { existence, cloud }
    }

    /// Key identifying components that are the same value by construction
    /// (same shared cloud and same existence).
    pub(crate) fn identity(&self) -> (usize, u64) {
        (Arc::as_ptr(&self.cloud) as usize, self.existence.as_f64().to_bits())
    }
}

/// One multi-Bernoulli term of the mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalHypothesis<T> {
    pub weight: T,
    pub components: Vec<BernoulliComponent<T>>,
}

impl<T: Scalar> GlobalHypothesis<T> {
    pub fn new(weight: T, components: Vec<BernoulliComponent<T>>) -> Self {
        GlobalHypothesis { weight, components }
    }
}

/// Normalized mixture of global hypotheses sharing a common component count.
#[derive(Debug, Clone, PartialEq)]
pub struct MbmDensity<T> {
    pub hypotheses: Vec<GlobalHypothesis<T>>,
}

impl<T: Scalar> MbmDensity<T> {
    pub fn new(hypotheses: Vec<GlobalHypothesis<T>>) -> Self {
        MbmDensity { hypotheses }
    }

    /// Single hypothesis of weight one with no Bernoulli components.
    pub fn empty() -> Self {
        MbmDensity { hypotheses: vec![GlobalHypothesis::new(T::one(), Vec::new())] }
    }

    pub fn num_hypotheses(&self) -> usize {
        self.hypotheses.len()
    }

    /// Component count shared by every hypothesis.
    pub fn num_components(&self) -> usize {
        self.hypotheses.first().map_or(0, |h| h.components.len())
    }

    pub fn weights(&self) -> Vec<T> {
        self.hypotheses.iter().map(|h| h.weight).collect()
    }

    /// `Σ_h w_h r_{h,i}` for every component index `i`.
    pub fn marginal_existence(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_components()];
        for h in &self.hypotheses {
            for (acc, c) in out.iter_mut().zip(&h.components) {
                *acc += h.weight * c.existence;
            }
        }
        out
    }

    /// Expected number of targets under the mixture.
    pub fn expected_cardinality(&self) -> T {
        self.marginal_existence().into_iter().sum()
    }

    /// Checks the mixture invariants: nonempty, normalized weights, equal
    /// component counts, existences in `[0, 1]` and well-formed clouds.
    pub fn validate(&self) -> Result<()> {
        if self.hypotheses.is_empty() {
            return Err(Error::InvalidDensity("no hypotheses".into()));
        }
        let n = self.num_components();
        let mut total = T::zero();
        for (h, hyp) in self.hypotheses.iter().enumerate() {
            if !(hyp.weight.is_finite() && hyp.weight >= T::zero()) {
                return Err(Error::InvalidDensity(format!("hypothesis {h} weight {}", hyp.weight)));
            }
            total += hyp.weight;
            if hyp.components.len() != n {
                return Err(Error::InvalidDensity(format!(
                    "hypothesis {h} has {} components, expected {n}",
                    hyp.components.len()
                )));
            }
            for (i, c) in hyp.components.iter().enumerate() {
                if !(c.existence >= T::zero() && c.existence <= T::one()) {
                    return Err(Error::InvalidDensity(format!(
                        "hypothesis {h} component {i} existence {}",
                        c.existence
                    )));
                }
                c.cloud.validate()?;
            }
        }
        let tol = T::of(1e-9).max(T::epsilon() * T::of(16.0 * self.hypotheses.len() as f64));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidDensity(format!("weights sum to {total}")));
        }
        Ok(())
    }
}

/// Target-to-measurement association `Θ = [θ(1), …, θ(n)]`.
///
/// Entry `0` marks a missed detection; entry `j ≥ 1` assigns measurement `j`
/// (one-based). Positive entries are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Association(pub Vec<usize>);

impl Association {
    pub fn all_missed(n: usize) -> Self {
        Association(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when entries are within `0..=m` and positive entries are distinct.
    pub fn is_valid(&self, m: usize) -> bool {
        let mut seen = vec![false; m + 1];
        for &j in &self.0 {
            if j > m {
                return false;
            }
            if j > 0 {
                if seen[j] {
                    return false;
                }
                seen[j] = true;
            }
        }
        true
    }
}
