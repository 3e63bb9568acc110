//! State extraction and the two pruning rules that bound the mixture.

use crate::density::MbmDensity;
use crate::error::Result;
use crate::gibbs::GibbsConfig;
use crate::scalar::Scalar;
use crate::state::State;
use crate::weights::{normalize_weights, weighted_mean};

/// Tuning of the particle MBM filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// `N_h`, the posterior hypothesis budget per update.
    pub max_hypotheses: usize,
    /// `r^p`: a component whose marginal existence falls below this is
    /// removed from every hypothesis.
    pub target_prune: f64,
    /// `w^p`: hypotheses lighter than this are dropped.
    pub hyp_prune: f64,
    /// `r^th`: existence a component needs to be reported.
    pub extract_threshold: f64,
    /// `n^p`, particles per Bernoulli component.
    pub particles_per_target: usize,
    /// Gibbs sweeps discarded before recording associations.
    pub gibbs_burn_in: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            max_hypotheses: 100,
            target_prune: 1e-5,
            hyp_prune: 1e-5,
            extract_threshold: 0.5,
            particles_per_target: 1000,
            gibbs_burn_in: 0,
        }
    }
}

impl FilterParams {
    pub fn gibbs(&self) -> GibbsConfig {
        GibbsConfig { max_hypotheses: self.max_hypotheses, burn_in: self.gibbs_burn_in, ..GibbsConfig::default() }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("target_prune", self.target_prune),
            ("hyp_prune", self.hyp_prune),
            ("extract_threshold", self.extract_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.max_hypotheses == 0 {
            return Err("max_hypotheses must be >= 1".into());
        }
        if self.particles_per_target == 0 {
            return Err("particles_per_target must be >= 1".into());
        }
        Ok(())
    }
}

/// Point estimate of the multi-target state at one scan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateEstimate<T> {
    pub states: Vec<State<T>>,
    pub source_hypothesis: usize,
}

impl<T> StateEstimate<T> {
    pub fn cardinality(&self) -> usize {
        self.states.len()
    }
}

/// Index of the heaviest hypothesis; the lowest index wins ties.
pub fn select_map_hypothesis<T: Scalar>(density: &MbmDensity<T>) -> usize {
    let mut best = 0;
    for (h, hyp) in density.hypotheses.iter().enumerate().skip(1) {
        if hyp.weight > density.hypotheses[best].weight {
            best = h;
        }
    }
    best
}

/// Weighted means of the components of the MAP hypothesis whose existence is
/// strictly above `extract_threshold`.
pub fn extract_states<T: Scalar>(density: &MbmDensity<T>, params: &FilterParams) -> Result<StateEstimate<T>> {
    if density.hypotheses.is_empty() {
        return Ok(StateEstimate::default());
    }
    let h = select_map_hypothesis(density);
    let threshold = T::of(params.extract_threshold);
    let states = density.hypotheses[h]
        .components
        .iter()
        .filter(|c| c.existence > threshold)
        .map(|c| weighted_mean(&c.cloud))
        .collect::<Result<Vec<_>>>()?;
    Ok(StateEstimate { states, source_hypothesis: h })
}

/// Removes component index `i` from every hypothesis when
/// `Σ_h w_h r_{h,i} < target_prune`. Weights are untouched.
pub fn prune_components<T: Scalar>(density: &MbmDensity<T>, params: &FilterParams) -> MbmDensity<T> {
    let threshold = T::of(params.target_prune);
    let keep: Vec<bool> = density.marginal_existence().into_iter().map(|r| !(r < threshold)).collect();
    let mut out = density.clone();
    for hyp in &mut out.hypotheses {
        let mut idx = 0;
        hyp.components.retain(|_| {
            let k = keep[idx];
            idx += 1;
            k
        });
    }
    out
}

/// Drops hypotheses with `w_h < hyp_prune` (the MAP hypothesis always stays)
/// and renormalizes the survivors.
pub fn prune_hypotheses<T: Scalar>(density: &MbmDensity<T>, params: &FilterParams) -> Result<MbmDensity<T>> {
    if density.hypotheses.is_empty() {
        return Ok(density.clone());
    }
    let map = select_map_hypothesis(density);
    let threshold = T::of(params.hyp_prune);
    let mut kept: Vec<_> = density
        .hypotheses
        .iter()
        .enumerate()
        .filter(|(h, hyp)| *h == map || !(hyp.weight < threshold))
        .map(|(_, hyp)| hyp.clone())
        .collect();
    let w: Vec<T> = kept.iter().map(|h| h.weight).collect();
    for (hyp, w) in kept.iter_mut().zip(normalize_weights(&w)?) {
        hyp.weight = w;
    }
    Ok(MbmDensity::new(kept))
}
