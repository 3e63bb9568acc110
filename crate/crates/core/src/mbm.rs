//! Particle multi-Bernoulli mixture recursion.
//!
//! The update expands every prior hypothesis into posterior hypotheses, one
//! per retained association. A posterior hypothesis' weight is the prior
//! weight times one contribution per Bernoulli component: the detection
//! contribution `r Σ_p w_p p_d l(z|x_p) / c(z)` or the miss contribution
//! `1 - r + r Σ_p w_p (1 - p_d)`. Prediction thins existence by survival,
//! propagates particles, and appends the birth Bernoullis to every
//! hypothesis without touching the hypothesis weights.
//!
//! Hypotheses descending from a common prior share their components, so both
//! steps work on the set of distinct components and fan the results back out.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::density::{Association, BernoulliComponent, GlobalHypothesis, MbmDensity, Particle, ParticleCloud};
use crate::error::{Error, Result};
use crate::gibbs::{exhaustive_associations, gibbs_sample, CostMatrix, GibbsConfig};
use crate::models::{measure, DetectionSurvival, ModelSet};
use crate::rng::stream;
use crate::scalar::{log_sum_exp, Scalar};
use crate::state::Measurement;
use crate::weights::{normalize_log_weights, systematic_indices};

/// Result of updating one Bernoulli component under one association value.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentUpdate<T> {
    pub component: BernoulliComponent<T>,
    /// `ln C`; `-inf` marks an infeasible association.
    pub log_contribution: T,
}

impl<T: Scalar> ComponentUpdate<T> {
    pub fn contribution(&self) -> T {
        self.log_contribution.exp()
    }

    pub fn is_feasible(&self) -> bool {
        self.log_contribution > T::neg_infinity()
    }
}

/// Per-particle quantities reused across every measurement.
struct CloudGeometry<T> {
    predicted: Vec<Option<Measurement<T>>>,
    /// `ln(w_p / Σw) + ln p_d(x_p)`
    log_weighted_pd: Vec<T>,
}

impl<T: Scalar> CloudGeometry<T> {
    fn new(cloud: &ParticleCloud<T>, probs: &DetectionSurvival<T>) -> Self {
        let total = cloud.total_weight();
        let mut predicted = Vec::with_capacity(cloud.len());
        let mut log_weighted_pd = Vec::with_capacity(cloud.len());
        for p in &cloud.particles {
            predicted.push(measure(&p.state).ok());
            log_weighted_pd.push((p.weight / total).ln() + probs.p_d(&p.state).ln());
        }
        CloudGeometry { predicted, log_weighted_pd }
    }

    /// Fills `out` with `ln(w_p p_d(x_p) l(z|x_p))` and returns its log-sum.
    fn detection_log_weights(
        &self,
        z: &Measurement<T>,
        model: &crate::models::MeasurementModel<T>,
        out: &mut Vec<T>,
    ) -> T {
        out.clear();
        out.extend(self.predicted.iter().zip(&self.log_weighted_pd).map(|(pred, &lwpd)| match pred {
            Some(pred) if lwpd > T::neg_infinity() => lwpd + model.log_likelihood_at(z, pred),
            _ => T::neg_infinity(),
        }));
        log_sum_exp(out)
    }
}

fn is_uniform<T: Scalar>(cloud: &ParticleCloud<T>) -> bool {
    let first = cloud.particles.first().map(|p| p.weight);
    cloud.particles.iter().all(|p| Some(p.weight) == first)
}

/// Equal-weight cloud of the same size, drawn from `states` by systematic
/// resampling with the given linear weights.
fn resampled<T: Scalar, R: Rng + ?Sized>(
    states: impl Fn(usize) -> crate::state::State<T>,
    weights: &[T],
    rng: &mut R,
) -> Result<ParticleCloud<T>> {
    let count = weights.len();
    let idx = systematic_indices(weights, count, rng)?;
    let w = T::one() / T::from_usize(count).unwrap();
    Ok(ParticleCloud::new(idx.into_iter().map(|j| Particle::new(states(j), w)).collect()))
}

fn materialize_detected<T: Scalar, R: Rng + ?Sized>(
    comp: &BernoulliComponent<T>,
    log_weights: &[T],
    log_contribution: T,
    rng: &mut R,
) -> Result<ComponentUpdate<T>> {
    if log_contribution == T::neg_infinity() || comp.cloud.is_empty() {
        return Ok(ComponentUpdate {
            component: BernoulliComponent::with_shared(T::one(), Arc::clone(&comp.cloud)),
            log_contribution: T::neg_infinity(),
        });
    }
    let weights = normalize_log_weights(log_weights)?;
    let cloud = resampled(|j| comp.cloud.particles[j].state, &weights, rng)?;
    Ok(ComponentUpdate { component: BernoulliComponent::new(T::one(), cloud), log_contribution })
}

/// Bernoulli component conditioned on generating measurement `z`.
///
/// Existence becomes one; particles are reweighted by `p_d·l(z|x)` and
/// resampled. The contribution is `r Σ_p w_p p_d(x_p) l(z|x_p) / c(z)` with
/// `c` the filter clutter density.
pub fn update_detected<T: Scalar, R: Rng + ?Sized>(
    comp: &BernoulliComponent<T>,
    z: &Measurement<T>,
    models: &ModelSet<T>,
    rng: &mut R,
) -> Result<ComponentUpdate<T>> {
    let geom = CloudGeometry::new(&comp.cloud, &models.probabilities);
    let log_c = models.clutter.filter_density().ln();
    let mut lw = Vec::new();
    let log_sum = geom.detection_log_weights(z, &models.measurement, &mut lw);
    materialize_detected(comp, &lw, comp.existence.ln() + log_sum - log_c, rng)
}

fn missed_from_geometry<T: Scalar, R: Rng + ?Sized>(
    comp: &BernoulliComponent<T>,
    probs: &DetectionSurvival<T>,
    rng: &mut R,
) -> Result<ComponentUpdate<T>> {
    let cloud = &comp.cloud;
    let total = cloud.total_weight();
    let miss_weights: Vec<T> =
        cloud.particles.iter().map(|p| p.weight * (T::one() - probs.p_d(&p.state))).collect();
    let q: T = miss_weights.iter().copied().sum::<T>() / total;
    let r = comp.existence;
    let contribution = T::one() - r + r * q;
    let existence = if contribution > T::zero() { r * q / contribution } else { T::zero() };
    let shared = q <= T::zero() || (probs.detection.constant().is_some() && is_uniform(cloud));
    let cloud = if shared {
        Arc::clone(cloud)
    } else {
        Arc::new(resampled(|j| cloud.particles[j].state, &miss_weights, rng)?)
    };
    Ok(ComponentUpdate { component: BernoulliComponent::with_shared(existence, cloud), log_contribution: contribution.ln() })
}

/// Bernoulli component conditioned on producing no measurement.
///
/// With `q = Σ_p w_p (1 - p_d(x_p))` the contribution is `1 - r + r q`, the
/// posterior existence `r q / (1 - r + r q)`, and particles are reweighted by
/// `1 - p_d` and resampled.
pub fn update_missed<T: Scalar, R: Rng + ?Sized>(
    comp: &BernoulliComponent<T>,
    models: &ModelSet<T>,
    rng: &mut R,
) -> Result<ComponentUpdate<T>> {
    missed_from_geometry(comp, &models.probabilities, rng)
}

/// Every single-component update needed for one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdatedComponentTable<T> {
    /// `detected[i][j]`: component `i` updated with measurement `j` (zero-based).
    pub detected: Vec<Vec<BernoulliComponent<T>>>,
    pub missed: Vec<BernoulliComponent<T>>,
}

/// Contributions and updated components of every (component, measurement)
/// pair of `hyp`. The unnormalized weight of association `Θ` is
/// `w_h · exp(cost.log_weight(Θ))`.
pub fn build_cost_matrix<T: Scalar, R: Rng + ?Sized>(
    hyp: &GlobalHypothesis<T>,
    zs: &[Measurement<T>],
    models: &ModelSet<T>,
    rng: &mut R,
) -> Result<(CostMatrix<T>, UpdatedComponentTable<T>)> {
    let n = hyp.components.len();
    let m = zs.len();
    let log_c = models.clutter.filter_density().ln();
    let mut log_detect = Vec::with_capacity(n * m);
    let mut log_miss = Vec::with_capacity(n);
    let mut detected = Vec::with_capacity(n);
    let mut missed = Vec::with_capacity(n);
    let mut lw = Vec::new();
    for comp in &hyp.components {
        let geom = CloudGeometry::new(&comp.cloud, &models.probabilities);
        let mut row = Vec::with_capacity(m);
        for z in zs {
            let log_sum = geom.detection_log_weights(z, &models.measurement, &mut lw);
            let upd = materialize_detected(comp, &lw, comp.existence.ln() + log_sum - log_c, rng)?;
            log_detect.push(upd.log_contribution);
            row.push(upd.component);
        }
        detected.push(row);
        let miss = missed_from_geometry(comp, &models.probabilities, rng)?;
        log_miss.push(miss.log_contribution);
        missed.push(miss.component);
    }
    Ok((CostMatrix::from_flat(n, m, log_detect, log_miss), UpdatedComponentTable { detected, missed }))
}

/// How posterior associations are chosen for each prior hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssociationStrategy {
    /// `⌈N_h·w_h⌉` Gibbs sweeps per prior hypothesis.
    Gibbs(GibbsConfig),
    /// Every valid association; only for small problems.
    Exhaustive,
}

/// Which prior hypothesis and association produced a posterior hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HypothesisOrigin {
    pub prior: usize,
    pub association: Association,
}

#[derive(Debug, Clone)]
pub struct UpdateOutcome<T> {
    pub density: MbmDensity<T>,
    /// Parallel to `density.hypotheses`.
    pub origins: Vec<HypothesisOrigin>,
    /// Unnormalized log weights `ln w_h + Σ_i ln C_i`, parallel to
    /// `density.hypotheses`.
    pub log_weights: Vec<T>,
}

/// Distinct components across hypotheses and, per hypothesis, the index of
/// each of its components in that list.
struct ComponentIndex<'a, T> {
    unique: Vec<&'a BernoulliComponent<T>>,
    per_hypothesis: Vec<Vec<usize>>,
}

fn index_components<T: Scalar>(hypotheses: &[GlobalHypothesis<T>]) -> ComponentIndex<'_, T> {
    let mut lookup: HashMap<(usize, u64), usize> = HashMap::new();
    let mut unique = Vec::new();
    let per_hypothesis = hypotheses
        .iter()
        .map(|h| {
            h.components
                .iter()
                .map(|c| {
                    *lookup.entry(c.identity()).or_insert_with(|| {
                        unique.push(c);
                        unique.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    ComponentIndex { unique, per_hypothesis }
}

struct DistinctUpdate<T> {
    geometry: CloudGeometry<T>,
    missed: ComponentUpdate<T>,
    log_detect: Vec<T>,
}

/// Measurement update of the whole mixture.
///
/// Each prior hypothesis proposes associations (Gibbs or exhaustive); every
/// distinct association with nonzero weight becomes a posterior hypothesis.
/// Weights are normalized jointly in log space.
pub fn mbm_update<T: Scalar, R: Rng + ?Sized>(
    prior: &MbmDensity<T>,
    zs: &[Measurement<T>],
    models: &ModelSet<T>,
    strategy: &AssociationStrategy,
    rng: &mut R,
) -> Result<UpdateOutcome<T>> {
    let seed_missed: u64 = rng.random();
    let seed_assoc: u64 = rng.random();
    let seed_detected: u64 = rng.random();
    let m = zs.len();
    let log_c = models.clutter.filter_density().ln();
    let index = index_components(&prior.hypotheses);

    let tables: Vec<DistinctUpdate<T>> = index
        .unique
        .par_iter()
        .enumerate()
        .map(|(u, comp)| {
            let geometry = CloudGeometry::new(&comp.cloud, &models.probabilities);
            let missed = missed_from_geometry(comp, &models.probabilities, &mut stream(seed_missed, u as u64))?;
            let log_r = comp.existence.ln();
            let mut lw = Vec::with_capacity(comp.cloud.len());
            let log_detect = zs
                .iter()
                .map(|z| log_r + geometry.detection_log_weights(z, &models.measurement, &mut lw) - log_c)
                .collect();
            Ok(DistinctUpdate { geometry, missed, log_detect })
        })
        .collect::<Result<_>>()?;

    let proposals: Vec<Vec<(Association, T)>> = prior
        .hypotheses
        .par_iter()
        .enumerate()
        .map(|(h, hyp)| {
            let comps = &index.per_hypothesis[h];
            let n = comps.len();
            let mut log_detect = Vec::with_capacity(n * m);
            let mut log_miss = Vec::with_capacity(n);
            for &u in comps {
                log_detect.extend_from_slice(&tables[u].log_detect);
                log_miss.push(tables[u].missed.log_contribution);
            }
            let cost = CostMatrix::from_flat(n, m, log_detect, log_miss);
            let associations = match strategy {
                AssociationStrategy::Exhaustive => exhaustive_associations(n, m)?,
                AssociationStrategy::Gibbs(cfg) => {
                    let k = cfg.sample_count(hyp.weight);
                    gibbs_sample(&cost, k, cfg, &mut stream(seed_assoc, h as u64))
                }
            };
            let log_prior = hyp.weight.ln();
            Ok(associations
                .into_iter()
                .filter_map(|a| {
                    let lw = log_prior + cost.log_weight(&a);
                    (lw > T::neg_infinity()).then_some((a, lw))
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let needed: BTreeSet<(usize, usize)> = proposals
        .iter()
        .enumerate()
        .flat_map(|(h, props)| {
            let comps = &index.per_hypothesis[h];
            props.iter().flat_map(move |(a, _)| {
                a.0.iter().enumerate().filter(|(_, &j)| j > 0).map(move |(i, &j)| (comps[i], j))
            })
        })
        .collect();
    let needed: Vec<(usize, usize)> = needed.into_iter().collect();
    let detected: HashMap<(usize, usize), BernoulliComponent<T>> = needed
        .par_iter()
        .map(|&(u, j)| {
            let table = &tables[u];
            let mut lw = Vec::new();
            table.geometry.detection_log_weights(&zs[j - 1], &models.measurement, &mut lw);
            let mut rng = stream(seed_detected, (u * (m + 1) + j) as u64);
            let upd = materialize_detected(index.unique[u], &lw, table.log_detect[j - 1], &mut rng)?;
            Ok(((u, j), upd.component))
        })
        .collect::<Result<_>>()?;

    let mut hypotheses = Vec::new();
    let mut origins = Vec::new();
    let mut log_weights = Vec::new();
    for (h, props) in proposals.into_iter().enumerate() {
        let comps = &index.per_hypothesis[h];
        for (association, lw) in props {
            let components = association
                .0
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    let u = comps[i];
                    if j == 0 {
                        tables[u].missed.component.clone()
                    } else {
                        detected[&(u, j)].clone()
                    }
                })
                .collect();
            hypotheses.push(GlobalHypothesis::new(T::zero(), components));
            origins.push(HypothesisOrigin { prior: h, association });
            log_weights.push(lw);
        }
    }
    if hypotheses.is_empty() {
        return Err(Error::DegeneratePosterior);
    }
    for (hyp, w) in hypotheses.iter_mut().zip(normalize_log_weights(&log_weights)?) {
        hyp.weight = w;
    }
    Ok(UpdateOutcome { density: MbmDensity::new(hypotheses), origins, log_weights })
}

/// Survival thinning and particle propagation of one component.
///
/// Existence becomes `r Σ_p w_p p_s(x_p)`; particles move through the
/// transition density and are resampled with weights `∝ w_p p_s(x_p)`.
pub fn predict_component<T: Scalar, R: Rng + ?Sized>(
    comp: &BernoulliComponent<T>,
    models: &ModelSet<T>,
    rng: &mut R,
) -> Result<BernoulliComponent<T>> {
    let cloud = &comp.cloud;
    if cloud.is_empty() {
        return Ok(BernoulliComponent::with_shared(T::zero(), Arc::clone(cloud)));
    }
    let total = cloud.total_weight();
    let survival: Vec<T> =
        cloud.particles.iter().map(|p| p.weight * models.probabilities.p_s(&p.state)).collect();
    let surv: T = survival.iter().copied().sum::<T>() / total;
    let moved: Vec<_> = cloud.particles.iter().map(|p| models.motion.transition_sample(&p.state, rng)).collect();
    let keep_weights = surv <= T::zero() || (models.probabilities.survival.constant().is_some() && is_uniform(cloud));
    let new_cloud = if keep_weights {
        ParticleCloud::uniform(moved)
    } else {
        resampled(|j| moved[j], &survival, rng)?
    };
    Ok(BernoulliComponent::new(comp.existence * surv, new_cloud))
}

/// Prediction of the whole mixture. Hypothesis weights are carried over
/// unchanged and the birth components, each with `particles` particles, are
/// appended to every hypothesis in the same order.
pub fn mbm_predict<T: Scalar, R: Rng + ?Sized>(
    posterior: &MbmDensity<T>,
    models: &ModelSet<T>,
    particles: usize,
    rng: &mut R,
) -> Result<MbmDensity<T>> {
    let seed: u64 = rng.random();
    let index = index_components(&posterior.hypotheses);
    let predicted: Vec<BernoulliComponent<T>> = index
        .unique
        .par_iter()
        .enumerate()
        .map(|(u, c)| predict_component(c, models, &mut stream(seed, u as u64)))
        .collect::<Result<_>>()?;
    let offset = index.unique.len();
    let births: Vec<BernoulliComponent<T>> = (0..models.birth.len())
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, (offset + b) as u64);
            let cloud = models.birth.sample_particles(b, &models.motion, particles, &mut rng);
            BernoulliComponent::new(models.birth.components[b].existence, cloud)
        })
        .collect();
    let hypotheses = posterior
        .hypotheses
        .iter()
        .zip(&index.per_hypothesis)
        .map(|(hyp, comps)| {
            let components = comps.iter().map(|&u| predicted[u].clone()).chain(births.iter().cloned()).collect();
            GlobalHypothesis::new(hyp.weight, components)
        })
        .collect();
    Ok(MbmDensity::new(hypotheses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BirthModel, ClutterModel, MotionModel, ProbabilityFn};
    use crate::rng::seeded;
    use crate::state::State;
    use std::f64::consts::PI;

    /// Models with constant p_d/p_s and a clutter density of exactly `c`.
    fn models(p_d: f64, p_s: f64, c: f64) -> ModelSet<f64> {
        let base = ClutterModel::<f64>::default();
        let v = base.support().volume();
        ModelSet {
            clutter: ClutterModel { area_intensity: c * v / base.fov_area(), ..base },
            probabilities: DetectionSurvival::constant(p_d, p_s),
            birth: BirthModel::none(),
            ..ModelSet::default()
        }
    }

    fn target() -> State<f64> {
        State::new(10.0, 1.0, 20.0, -1.0)
    }

    /// Measurement whose likelihood at `target()` is exactly `l`.
    fn measurement_with_likelihood(l: f64) -> Measurement<f64> {
        let pred = measure(&target()).unwrap();
        let peak = 1.0 / (2.0 * PI * (0.25f64 * 0.09).sqrt());
        let dr = (2.0 * 0.25 * (peak / l).ln()).sqrt();
        Measurement::new(pred.range + dr, pred.bearing)
    }

    fn comp(r: f64) -> BernoulliComponent<f64> {
        BernoulliComponent::new(r, ParticleCloud::point_mass(target()))
    }

    #[test]
    fn detected_update_closed_form() {
        let models = models(0.9, 0.99, 0.1);
        let z = measurement_with_likelihood(0.4);
        assert!((models.measurement.likelihood(&z, &target()) - 0.4).abs() < 1e-14);
        let upd = update_detected(&comp(0.5), &z, &models, &mut seeded(0)).unwrap();
        assert!((upd.contribution() - 1.8).abs() < 1e-12);
        assert_eq!(upd.component.existence, 1.0);

        let blind = ModelSet { probabilities: DetectionSurvival::constant(0.0, 0.99), ..models.clone() };
        let upd = update_detected(&comp(0.5), &z, &blind, &mut seeded(0)).unwrap();
        assert_eq!(upd.contribution(), 0.0);
        assert!(!upd.is_feasible());
        assert_eq!(upd.component.existence, 1.0);
    }

    #[test]
    fn detected_update_reweights_particles() {
        let models = models(0.9, 0.99, 0.1);
        let near = target();
        let far = State::new(-30.0, 0.0, 40.0, 0.0);
        let cloud = ParticleCloud::uniform((0..100).map(|i| if i % 2 == 0 { near } else { far }));
        let z = measure(&near).unwrap();
        let upd = update_detected(&BernoulliComponent::new(0.7, cloud), &z, &models, &mut seeded(1)).unwrap();
        assert_eq!(upd.component.cloud.len(), 100);
        assert!(upd.component.cloud.states().all(|s| *s == near));
        assert!(upd.component.cloud.weights().all(|w| w == 0.01));
    }

    #[test]
    fn missed_update_closed_form() {
        let m = models(0.9, 0.99, 0.1);
        let cloud = ParticleCloud::uniform((0..1000).map(|i| State::new(i as f64, 0.0, 1.0, 0.0)));
        let upd = update_missed(&BernoulliComponent::new(0.5, cloud.clone()), &m, &mut seeded(0)).unwrap();
        assert!((upd.component.existence - 1.0 / 11.0).abs() < 1e-12);
        assert!((upd.contribution() - 0.55).abs() < 1e-12);

        let blind = models(0.0, 0.99, 0.1);
        let upd = update_missed(&BernoulliComponent::new(0.3, cloud.clone()), &blind, &mut seeded(0)).unwrap();
        assert!((upd.component.existence - 0.3).abs() < 1e-15);
        assert!((upd.contribution() - 1.0).abs() < 1e-15);
        assert_eq!(*upd.component.cloud, cloud);

        let certain = models(1.0, 0.99, 0.1);
        let upd = update_missed(&BernoulliComponent::new(0.3, cloud.clone()), &certain, &mut seeded(0)).unwrap();
        assert_eq!(upd.component.existence, 0.0);
        assert!((upd.contribution() - 0.7).abs() < 1e-15);
        let upd = update_missed(&BernoulliComponent::new(1.0, cloud), &certain, &mut seeded(0)).unwrap();
        assert!(!upd.is_feasible());
        assert_eq!(upd.component.existence, 0.0);
    }

    #[test]
    fn missed_update_state_dependent_detection() {
        let mut m = models(0.9, 0.99, 0.1);
        // blind for x < 0
        m.probabilities.detection = ProbabilityFn::Function(Arc::new(|s: &State<f64>| if s.px() < 0.0 { 0.0 } else { 1.0 }));
        let a = State::new(-5.0, 0.0, 5.0, 0.0);
        let b = State::new(5.0, 0.0, 5.0, 0.0);
        let cloud = ParticleCloud::uniform([a, b, a, b]);
        let upd = update_missed(&BernoulliComponent::new(0.5, cloud), &m, &mut seeded(2)).unwrap();
        // q = 0.5, C = 0.75, r' = 1/3
        assert!((upd.contribution() - 0.75).abs() < 1e-15);
        assert!((upd.component.existence - 1.0 / 3.0).abs() < 1e-15);
        assert!(upd.component.cloud.states().all(|s| *s == a));
    }

    #[test]
    fn cost_matrix_composition() {
        let models = models(0.9, 0.99, 0.1);
        let z = measurement_with_likelihood(0.4);
        let hyp = GlobalHypothesis::new(1.0, vec![comp(0.5)]);
        let (cost, table) = build_cost_matrix(&hyp, &[z], &models, &mut seeded(0)).unwrap();
        assert!((cost.entry(0, 1) - 1.8).abs() < 1e-12);
        assert!((cost.entry(0, 0) - 0.55).abs() < 1e-12);
        assert_eq!(table.detected[0][0].existence, 1.0);
        assert!((table.missed[0].existence - 1.0 / 11.0).abs() < 1e-12);

        let (cost, table) = build_cost_matrix(&hyp, &[], &models, &mut seeded(0)).unwrap();
        assert_eq!(cost.num_measurements(), 0);
        assert!(table.detected[0].is_empty());
        assert!((cost.entry(0, 0) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn cost_matrix_ignores_measurement_order() {
        let models = models(0.9, 0.99, 0.02);
        let hyp = GlobalHypothesis::new(1.0, vec![comp(0.5), BernoulliComponent::new(0.8, ParticleCloud::point_mass(State::new(-10.0, 0.0, 30.0, 0.0)))]);
        let zs = [measurement_with_likelihood(0.3), Measurement::new(31.0, 1.9), Measurement::new(25.0, 1.0)];
        let rev: Vec<_> = zs.iter().rev().copied().collect();
        let (a, _) = build_cost_matrix(&hyp, &zs, &models, &mut seeded(0)).unwrap();
        let (b, _) = build_cost_matrix(&hyp, &rev, &models, &mut seeded(5)).unwrap();
        for i in 0..2 {
            assert_eq!(a.log_entry(i, 0), b.log_entry(i, 0));
            for j in 1..=3 {
                assert_eq!(a.log_entry(i, j), b.log_entry(i, 4 - j));
            }
        }
    }

    #[test]
    fn update_two_hypothesis_enumeration() {
        let models = models(0.9, 0.99, 0.1);
        let z = measurement_with_likelihood(0.4);
        let prior = MbmDensity::new(vec![GlobalHypothesis::new(1.0, vec![comp(0.5)])]);
        let gibbs = AssociationStrategy::Gibbs(GibbsConfig { max_hypotheses: 1000, ..GibbsConfig::default() });
        for strategy in [gibbs, AssociationStrategy::Exhaustive] {
            let out = mbm_update(&prior, &[z], &models, &strategy, &mut seeded(3)).unwrap();
            assert_eq!(out.density.num_hypotheses(), 2);
            out.density.validate().unwrap();
            let w_detect = out.origins.iter().position(|o| o.association.0 == vec![1]).unwrap();
            assert!((out.density.hypotheses[w_detect].weight - 1.8 / 2.35).abs() < 1e-12);
            assert!((out.density.hypotheses[1 - w_detect].weight - 0.55 / 2.35).abs() < 1e-12);
            assert_eq!(out.density.hypotheses[w_detect].components[0].existence, 1.0);
        }
    }

    #[test]
    fn update_without_measurements_or_targets() {
        let models = models(0.9, 0.99, 0.1);
        let strategy = AssociationStrategy::Gibbs(GibbsConfig::default());
        let prior = MbmDensity::new(vec![
            GlobalHypothesis::new(0.25, vec![comp(0.5), comp(0.2)]),
            GlobalHypothesis::new(0.75, vec![comp(0.9), comp(0.1)]),
        ]);
        let out = mbm_update(&prior, &[], &models, &strategy, &mut seeded(0)).unwrap();
        assert_eq!(out.density.num_hypotheses(), 2);
        let miss = |r: f64| 1.0 - r + r * 0.1;
        let w0 = 0.25 * miss(0.5) * miss(0.2);
        let w1 = 0.75 * miss(0.9) * miss(0.1);
        assert!((out.density.hypotheses[0].weight - w0 / (w0 + w1)).abs() < 1e-12);
        assert!((out.density.hypotheses[1].weight - w1 / (w0 + w1)).abs() < 1e-12);

        let empty = MbmDensity::new(vec![GlobalHypothesis::new(0.4, vec![]), GlobalHypothesis::new(0.6, vec![])]);
        let zs = [Measurement::new(10.0, 1.0), Measurement::new(20.0, 2.0)];
        let out = mbm_update(&empty, &zs, &models, &strategy, &mut seeded(0)).unwrap();
        assert_eq!(out.density, empty);
    }

    #[test]
    fn update_is_deterministic_and_keeps_invariants() {
        let models = models(0.9, 0.99, 0.05);
        let prior = MbmDensity::new(vec![GlobalHypothesis::new(
            1.0,
            vec![comp(0.6), BernoulliComponent::new(0.3, ParticleCloud::uniform((0..50).map(|i| State::new(-10.0 + 0.1 * i as f64, 0.0, 30.0, 0.0))))],
        )]);
        let zs = [measurement_with_likelihood(0.5), Measurement::new(31.0, 1.9)];
        let strategy = AssociationStrategy::Gibbs(GibbsConfig::default());
        let a = mbm_update(&prior, &zs, &models, &strategy, &mut seeded(8)).unwrap();
        let b = mbm_update(&prior, &zs, &models, &strategy, &mut seeded(8)).unwrap();
        assert_eq!(a.density, b.density);
        a.density.validate().unwrap();
        for (hyp, origin) in a.density.hypotheses.iter().zip(&a.origins) {
            for (c, &j) in hyp.components.iter().zip(&origin.association.0) {
                if j > 0 {
                    assert_eq!(c.existence, 1.0);
                }
            }
        }
    }

    #[test]
    fn predict_component_closed_form() {
        let cloud = ParticleCloud::uniform((0..1000).map(|i| State::new(i as f64, 1.0, 1.0, 0.0)));
        let out = predict_component(&BernoulliComponent::new(0.4, cloud.clone()), &models(0.9, 0.99, 0.1), &mut seeded(0)).unwrap();
        assert!((out.existence - 0.396).abs() < 1e-12);
        assert_eq!(out.cloud.len(), 1000);
        let out = predict_component(&BernoulliComponent::new(0.4, cloud.clone()), &models(0.9, 1.0, 0.1), &mut seeded(0)).unwrap();
        assert_eq!(out.existence, 0.4);
        let out = predict_component(&BernoulliComponent::new(0.4, cloud), &models(0.9, 0.0, 0.1), &mut seeded(0)).unwrap();
        assert_eq!(out.existence, 0.0);
    }

    #[test]
    fn predict_mixture() {
        let mut m = models(0.9, 0.99, 0.1);
        m.birth = BirthModel::default();
        let posterior = MbmDensity::new(vec![
            GlobalHypothesis::new(0.3, vec![comp(0.5)]),
            GlobalHypothesis::new(0.7, vec![comp(0.9)]),
        ]);
        let pred = mbm_predict(&posterior, &m, 20, &mut seeded(0)).unwrap();
        assert_eq!(pred.weights(), posterior.weights());
        assert!(pred.hypotheses.iter().all(|h| h.components.len() == 6));
        for b in 0..5 {
            assert!(Arc::ptr_eq(&pred.hypotheses[0].components[1 + b].cloud, &pred.hypotheses[1].components[1 + b].cloud));
            assert_eq!(pred.hypotheses[0].components[1 + b].existence, 0.01);
        }
        pred.validate().unwrap();

        let mut still = models(0.9, 1.0, 0.1);
        still.motion = MotionModel::new(1.0, [0.0; 2]);
        let pred = mbm_predict(&posterior, &still, 20, &mut seeded(0)).unwrap();
        for (a, b) in pred.hypotheses.iter().zip(&posterior.hypotheses) {
            assert_eq!(a.weight, b.weight);
            assert_eq!(a.components.len(), 1);
            assert_eq!(a.components[0].existence, b.components[0].existence);
            let moved = still.motion.transition_deterministic(&target());
            assert!(a.components[0].cloud.states().all(|s| *s == moved));
        }
    }

    #[test]
    fn weight_factorization_matches_direct_product() {
        let models = models(0.85, 0.99, 0.03);
        let mut rng = seeded(77);
        for _ in 0..50 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(0..=3);
            let comps: Vec<_> = (0..n)
                .map(|_| {
                    let center = State::new(rng.random_range(-5.0..5.0), 0.0, rng.random_range(20.0..25.0), 0.0);
                    let cloud = ParticleCloud::uniform((0..10).map(|_| {
                        center + State::new(rng.random_range(-1.0..1.0), 0.0, rng.random_range(-1.0..1.0), 0.0)
                    }));
                    BernoulliComponent::new(rng.random_range(0.05..0.95), cloud)
                })
                .collect();
            let zs: Vec<_> = (0..m).map(|_| Measurement::new(rng.random_range(19.0..26.0), rng.random_range(1.3..1.8))).collect();
            let w_h = rng.random_range(0.1..1.0);
            let hyp = GlobalHypothesis::new(w_h, comps.clone());
            let (cost, _) = build_cost_matrix(&hyp, &zs, &models, &mut rng).unwrap();
            let c = models.clutter.filter_density();
            for theta in exhaustive_associations(n, m).unwrap() {
                let mut direct = w_h;
                for (i, &j) in theta.0.iter().enumerate() {
                    let comp = &comps[i];
                    let np = comp.cloud.len() as f64;
                    direct *= if j == 0 {
                        1.0 - comp.existence + comp.existence / np * comp.cloud.states().map(|_| 1.0 - 0.85).sum::<f64>()
                    } else {
                        comp.existence * comp.cloud.states().map(|s| 0.85 * models.measurement.likelihood(&zs[j - 1], s)).sum::<f64>() / (np * c)
                    };
                }
                let via_cost = w_h.ln() + cost.log_weight(&theta);
                assert!((via_cost - direct.ln()).abs() < 1e-12, "{via_cost} vs {}", direct.ln());
            }
        }
    }
}
