//! Scan-by-scan filter drivers.

use crate::density::MbmDensity;
use crate::error::Result;
use crate::estimation::{extract_states, prune_components, prune_hypotheses, FilterParams, StateEstimate};
use crate::mbm::{mbm_predict, mbm_update, AssociationStrategy};
use crate::models::ModelSet;
use crate::phd::{phd_estimate, phd_predict, phd_resample, phd_update, PhdParams, PhdParticleSet};
use crate::rng::SimRng;
use crate::scalar::Scalar;
use crate::state::Measurement;

/// A multi-target filter consuming one scan of measurements at a time.
pub trait Tracker<T> {
    /// Processes one scan and returns the state estimate for it.
    fn step(&mut self, measurements: &[Measurement<T>]) -> Result<StateEstimate<T>>;
}

/// Particle MBM filter. Each scan runs update, hypothesis pruning, component
/// pruning, extraction and prediction, in that order.
pub struct MbmFilter<T> {
    models: ModelSet<T>,
    params: FilterParams,
    strategy: AssociationStrategy,
    rng: SimRng,
    predicted: MbmDensity<T>,
    posterior: Option<MbmDensity<T>>,
}

impl<T: Scalar> MbmFilter<T> {
    /// Starts from a single empty hypothesis predicted once with birth.
    pub fn new(models: ModelSet<T>, params: FilterParams, mut rng: SimRng) -> Result<Self> {
        let predicted = mbm_predict(&MbmDensity::empty(), &models, params.particles_per_target, &mut rng)?;
        let strategy = AssociationStrategy::Gibbs(params.gibbs());
        Ok(MbmFilter { models, params, strategy, rng, predicted, posterior: None })
    }

    pub fn with_strategy(mut self, strategy: AssociationStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Density predicted to the next scan.
    pub fn predicted(&self) -> &MbmDensity<T> {
        &self.predicted
    }

    /// Pruned posterior of the last processed scan.
    pub fn posterior(&self) -> Option<&MbmDensity<T>> {
        self.posterior.as_ref()
    }
}

impl<T: Scalar> Tracker<T> for MbmFilter<T> {
    fn step(&mut self, measurements: &[Measurement<T>]) -> Result<StateEstimate<T>> {
        let updated = mbm_update(&self.predicted, measurements, &self.models, &self.strategy, &mut self.rng)?;
        let pruned = prune_hypotheses(&updated.density, &self.params)?;
        let pruned = prune_components(&pruned, &self.params);
        let estimate = extract_states(&pruned, &self.params)?;
        self.predicted = mbm_predict(&pruned, &self.models, self.params.particles_per_target, &mut self.rng)?;
        self.posterior = Some(pruned);
        Ok(estimate)
    }
}

/// SMC-PHD baseline: update, resample, estimate, predict.
pub struct PhdFilter<T> {
    models: ModelSet<T>,
    params: PhdParams,
    rng: SimRng,
    predicted: PhdParticleSet<T>,
}

impl<T: Scalar> PhdFilter<T> {
    pub fn new(models: ModelSet<T>, params: PhdParams, mut rng: SimRng) -> Self {
        let predicted = phd_predict(&PhdParticleSet::default(), &models, &params, &mut rng);
        PhdFilter { models, params, rng, predicted }
    }

    pub fn predicted(&self) -> &PhdParticleSet<T> {
        &self.predicted
    }
}

impl<T: Scalar> Tracker<T> for PhdFilter<T> {
    fn step(&mut self, measurements: &[Measurement<T>]) -> Result<StateEstimate<T>> {
        let updated = phd_update(&self.predicted, measurements, &self.models);
        let resampled = phd_resample(&updated, &self.params, &mut self.rng)?;
        let states = phd_estimate(&resampled, &self.params, &mut self.rng);
        self.predicted = phd_predict(&resampled, &self.models, &self.params, &mut self.rng);
        Ok(StateEstimate { states, source_hypothesis: 0 })
    }
}
