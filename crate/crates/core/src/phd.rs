//! Sequential Monte-Carlo PHD filter used as the comparison baseline.
//!
//! The particle set carries unnormalized weights whose total is the expected
//! target count. Prediction thins by survival and adds birth particles;
//! the update is the standard PHD corrector
//! `w' = (1 - p_d) w + Σ_z p_d l(z|x) w / (c(z) + Σ_q p_d l(z|x_q) w_q)`.

use rand::Rng;

use crate::density::Particle;
use crate::error::Result;
use crate::models::{measure, ModelSet};
use crate::scalar::Scalar;
use crate::state::{Measurement, State};
use crate::weights::systematic_indices;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhdParams {
    /// Weight of every birth particle; a birth component carries
    /// `birth_weight * particles_per_target` of PHD mass.
    pub birth_weight: f64,
    /// Particles per birth component and per expected target after resampling.
    pub particles_per_target: usize,
    /// Upper bound on the expected-target multiplier used when resampling.
    pub max_targets: usize,
    /// k-means restarts for estimate extraction.
    pub kmeans_restarts: usize,
}

impl Default for PhdParams {
    fn default() -> Self {
        PhdParams { birth_weight: 1e-5, particles_per_target: 1000, max_targets: 50, kmeans_restarts: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhdParticleSet<T> {
    pub particles: Vec<Particle<T>>,
}

impl<T: Scalar> PhdParticleSet<T> {
    pub fn new(particles: Vec<Particle<T>>) -> Self {
        PhdParticleSet { particles }
    }

    /// Expected number of targets.
    pub fn mass(&self) -> T {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// Survival-thinned propagation plus `particles_per_target` birth particles
/// of weight `birth_weight` per birth component.
pub fn phd_predict<T: Scalar, R: Rng + ?Sized>(
    set: &PhdParticleSet<T>,
    models: &ModelSet<T>,
    params: &PhdParams,
    rng: &mut R,
) -> PhdParticleSet<T> {
    let mut particles: Vec<Particle<T>> = set
        .particles
        .iter()
        .map(|p| {
            let w = p.weight * models.probabilities.p_s(&p.state);
            Particle::new(models.motion.transition_sample(&p.state, rng), w)
        })
        .collect();
    let count = params.particles_per_target;
    let per_particle = T::of(params.birth_weight);
    for b in 0..models.birth.len() {
        let cloud = models.birth.sample_particles(b, &models.motion, count, rng);
        particles.extend(cloud.particles.into_iter().map(|p| Particle::new(p.state, per_particle)));
    }
    PhdParticleSet { particles }
}

/// PHD corrector with clutter density `models.clutter.filter_density()`.
pub fn phd_update<T: Scalar>(set: &PhdParticleSet<T>, zs: &[Measurement<T>], models: &ModelSet<T>) -> PhdParticleSet<T> {
    let c = models.clutter.filter_density();
    let pd: Vec<T> = set.particles.iter().map(|p| models.probabilities.p_d(&p.state)).collect();
    let predicted: Vec<Option<Measurement<T>>> = set.particles.iter().map(|p| measure(&p.state).ok()).collect();
    let mut weights: Vec<T> = set.particles.iter().zip(&pd).map(|(p, &d)| (T::one() - d) * p.weight).collect();
    let mut terms = vec![T::zero(); set.len()];
    for z in zs {
        let mut denom = c;
        for (k, p) in set.particles.iter().enumerate() {
            terms[k] = match &predicted[k] {
                Some(pred) if pd[k] > T::zero() && p.weight > T::zero() => {
                    pd[k] * models.measurement.log_likelihood_at(z, pred).exp() * p.weight
                }
                _ => T::zero(),
            };
            denom += terms[k];
        }
        if denom > T::zero() {
            for (w, t) in weights.iter_mut().zip(&terms) {
                *w += *t / denom;
            }
        }
    }
    PhdParticleSet {
        particles: set.particles.iter().zip(weights).map(|(p, w)| Particle::new(p.state, w)).collect(),
    }
}

/// Systematic resampling to `max(1, round(mass)) · particles_per_target`
/// particles (capped), each carrying `mass / count` so the total is kept.
pub fn phd_resample<T: Scalar, R: Rng + ?Sized>(
    set: &PhdParticleSet<T>,
    params: &PhdParams,
    rng: &mut R,
) -> Result<PhdParticleSet<T>> {
    let mass = set.mass();
    if set.is_empty() || !(mass > T::zero()) {
        return Ok(PhdParticleSet::default());
    }
    let targets = mass.round().to_usize().unwrap_or(1).clamp(1, params.max_targets.max(1));
    let count = targets * params.particles_per_target;
    let weights: Vec<T> = set.particles.iter().map(|p| p.weight).collect();
    let idx = systematic_indices(&weights, count, rng)?;
    let w = mass / T::from_usize(count).unwrap();
    Ok(PhdParticleSet { particles: idx.into_iter().map(|j| Particle::new(set.particles[j].state, w)).collect() })
}

fn sq_dist<T: Scalar>(a: (T, T), b: (T, T)) -> T {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

/// Weighted k-means on positions with k-means++ seeding. Returns the member
/// assignment and the weighted within-cluster sum of squares.
fn kmeans<T: Scalar, R: Rng + ?Sized>(
    points: &[(T, T)],
    weights: &[T],
    k: usize,
    rng: &mut R,
) -> (Vec<usize>, T) {
    let n = points.len();
    let mut centers: Vec<(T, T)> = Vec::with_capacity(k);
    let total: T = weights.iter().copied().sum();
    let first = pick_weighted(weights, total, rng);
    centers.push(points[first]);
    let mut d2: Vec<T> = points.iter().map(|&p| sq_dist(p, centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<T> = d2.iter().zip(weights).map(|(&d, &w)| d * w).collect();
        let s: T = scores.iter().copied().sum();
        let next = if s > T::zero() { pick_weighted(&scores, s, rng) } else { pick_weighted(weights, total, rng) };
        centers.push(points[next]);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, points[next]));
        }
    }
    let mut assign = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = sq_dist(p, centers[0]);
            for (c, &center) in centers.iter().enumerate().skip(1) {
                let d = sq_dist(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![(T::zero(), T::zero(), T::zero()); k];
        for ((&p, &w), &a) in points.iter().zip(weights).zip(&assign) {
            sums[a].0 += w * p.0;
            sums[a].1 += w * p.1;
            sums[a].2 += w;
        }
        for (center, s) in centers.iter_mut().zip(&sums) {
            if s.2 > T::zero() {
                *center = (s.0 / s.2, s.1 / s.2);
            }
        }
        if !changed {
            break;
        }
    }
    let sse = points.iter().zip(weights).zip(&assign).map(|((&p, &w), &a)| w * sq_dist(p, centers[a])).sum();
    (assign, sse)
}

fn pick_weighted<T: Scalar, R: Rng + ?Sized>(weights: &[T], total: T, rng: &mut R) -> usize {
    let target = T::unit_uniform(rng) * total;
    let mut acc = T::zero();
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > T::zero() {
            last = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// `round(mass)` state estimates: centroids of a weighted k-means clustering
/// of particle positions, best of `kmeans_restarts` seeded restarts.
pub fn phd_estimate<T: Scalar, R: Rng + ?Sized>(
    set: &PhdParticleSet<T>,
    params: &PhdParams,
    rng: &mut R,
) -> Vec<State<T>> {
    let live: Vec<&Particle<T>> = set.particles.iter().filter(|p| p.weight > T::zero()).collect();
    let k = set.mass().round().to_usize().unwrap_or(0).min(live.len());
    if k == 0 {
        return Vec::new();
    }
    let points: Vec<(T, T)> = live.iter().map(|p| (p.state.px(), p.state.py())).collect();
    let weights: Vec<T> = live.iter().map(|p| p.weight).collect();
    let mut best: Option<(Vec<usize>, T)> = None;
    for _ in 0..params.kmeans_restarts.max(1) {
        let run = kmeans(&points, &weights, k, rng);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (assign, _) = best.expect("at least one restart");
    let mut sums = vec![(State::zero(), T::zero()); k];
    for (p, &a) in live.iter().zip(&assign) {
        sums[a].0 = sums[a].0 + p.state * p.weight;
        sums[a].1 += p.weight;
    }
    sums.into_iter().filter(|(_, w)| *w > T::zero()).map(|(s, w)| s * (T::one() / w)).collect()
}
