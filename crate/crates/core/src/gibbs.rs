//! Association sampling for hypothesis truncation.
//!
//! Each prior hypothesis owns a [`CostMatrix`] of per-target contributions.
//! The sampler runs a fixed-order single-site Gibbs chain over associations
//! whose target distribution is proportional to the product of the selected
//! contributions.

use std::collections::HashSet;

use rand::Rng;

use crate::density::Association;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest association set [`exhaustive_associations`] will build.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Per-target contributions, stored as natural logarithms.
///
/// `log_detect[i][j]` is the log contribution of target `i` taking
/// measurement `j + 1`; `log_miss[i]` the log contribution of a miss.
/// `-inf` marks an infeasible pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    n: usize,
    m: usize,
    log_detect: Vec<T>,
    log_miss: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn from_log(log_detect: Vec<Vec<T>>, log_miss: Vec<T>) -> Self {
        let n = log_miss.len();
        assert_eq!(log_detect.len(), n, "one detection row per target");
        let m = log_detect.first().map_or(0, Vec::len);
        assert!(log_detect.iter().all(|r| r.len() == m), "ragged detection rows");
        CostMatrix { n, m, log_detect: log_detect.into_iter().flatten().collect(), log_miss }
    }

    /// Builds from linear-domain contributions (zero means infeasible).
    pub fn from_linear(detect: Vec<Vec<T>>, miss: Vec<T>) -> Self {
        Self::from_log(
            detect.into_iter().map(|row| row.into_iter().map(T::ln).collect()).collect(),
            miss.into_iter().map(T::ln).collect(),
        )
    }

    pub(crate) fn from_flat(n: usize, m: usize, log_detect: Vec<T>, log_miss: Vec<T>) -> Self {
        debug_assert_eq!(log_detect.len(), n * m);
        debug_assert_eq!(log_miss.len(), n);
        CostMatrix { n, m, log_detect, log_miss }
    }

    pub fn num_targets(&self) -> usize {
        self.n
    }

    pub fn num_measurements(&self) -> usize {
        self.m
    }

    /// Log contribution of target `i` under association value `j` (0 = miss).
    #[inline]
    pub fn log_entry(&self, i: usize, j: usize) -> T {
        if j == 0 {
            self.log_miss[i]
        } else {
            self.log_detect[i * self.m + j - 1]
        }
    }

    /// Linear contribution `C_{i,j}`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.log_entry(i, j).exp()
    }

    /// `Σ_i ln C_{i,θ(i)}`; the unnormalized log weight relative to the prior
    /// hypothesis weight.
    pub fn log_weight(&self, theta: &Association) -> T {
        theta.0.iter().enumerate().map(|(i, &j)| self.log_entry(i, j)).sum()
    }
}

/// How the sampler chooses its starting association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GibbsInit {
    /// Every target missed; always a valid association.
    #[default]
    AllMissed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConfig {
    /// `N_h`: posterior hypothesis budget; a prior of weight `w` runs
    /// `⌈N_h·w⌉` recorded sweeps.
    pub max_hypotheses: usize,
    /// Sweeps discarded before recording.
    pub burn_in: usize,
    pub init: GibbsInit,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { max_hypotheses: 100, burn_in: 0, init: GibbsInit::AllMissed }
    }
}

impl GibbsConfig {
    /// Recorded sweep count `⌈N_h·w⌉` (at least one) for a prior of weight `w`.
    pub fn sample_count<T: Scalar>(&self, weight: T) -> usize {
        let k = (T::from_usize(self.max_hypotheses).unwrap() * weight).ceil();
        k.to_usize().unwrap_or(1).max(1)
    }
}

/// Conditional distribution of `θ(i)` given the other entries of `theta`.
///
/// Entry `j` of the result is the probability of `θ(i) = j`; measurements held
/// by other targets get exactly zero.
pub fn gibbs_conditional<T: Scalar>(i: usize, theta: &Association, cost: &CostMatrix<T>) -> Result<Vec<T>> {
    let m = cost.num_measurements();
    let mut taken = vec![false; m + 1];
    for (k, &j) in theta.0.iter().enumerate() {
        if k != i && j > 0 {
            taken[j] = true;
        }
    }
    let mut logs = vec![T::neg_infinity(); m + 1];
    let mut max = T::neg_infinity();
    for (j, slot) in logs.iter_mut().enumerate() {
        if j == 0 || !taken[j] {
            *slot = cost.log_entry(i, j);
            max = max.max(*slot);
        }
    }
    if max == T::neg_infinity() {
        return Err(Error::NoFeasibleAssignment(i));
    }
    let mut probs: Vec<T> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: T = probs.iter().copied().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Draws `θ(i)` in place. Leaves it unchanged when no value is feasible.
fn resample_site<T: Scalar, R: Rng + ?Sized>(
    i: usize,
    theta: &mut [usize],
    owner: &mut [Option<usize>],
    cost: &CostMatrix<T>,
    scratch: &mut Vec<T>,
    rng: &mut R,
) {
    let m = cost.num_measurements();
    scratch.clear();
    let mut max = T::neg_infinity();
    for (j, held) in owner.iter().enumerate().take(m + 1) {
        let free = j == 0 || held.is_none_or(|o| o == i);
        let l = if free { cost.log_entry(i, j) } else { T::neg_infinity() };
        max = max.max(l);
        scratch.push(l);
    }
    if max == T::neg_infinity() {
        return;
    }
    let mut total = T::zero();
    for l in scratch.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    let target = T::unit_uniform(rng) * total;
    let mut acc = T::zero();
    let mut pick = 0;
    for (j, &p) in scratch.iter().enumerate() {
        if p > T::zero() {
            pick = j;
            acc += p;
            if target < acc {
                break;
            }
        }
    }
    let prev = theta[i];
    if prev > 0 {
        owner[prev] = None;
    }
    if pick > 0 {
        owner[pick] = Some(i);
    }
    theta[i] = pick;
}

/// Runs `burn_in + k` full sweeps from the all-missed association and returns
/// the distinct associations recorded after each of the last `k` sweeps, in
/// order of first discovery.
pub fn gibbs_sample<T: Scalar, R: Rng + ?Sized>(
    cost: &CostMatrix<T>,
    k: usize,
    config: &GibbsConfig,
    rng: &mut R,
) -> Vec<Association> {
    let n = cost.num_targets();
    let m = cost.num_measurements();
    let mut theta = match config.init {
        GibbsInit::AllMissed => vec![0usize; n],
    };
    let mut owner: Vec<Option<usize>> = vec![None; m + 1];
    let mut scratch = Vec::with_capacity(m + 1);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    if n == 0 {
        return vec![Association(Vec::new())];
    }
    for sweep in 0..config.burn_in + k.max(1) {
        for i in 0..n {
            resample_site(i, &mut theta, &mut owner, cost, &mut scratch, rng);
        }
        if sweep >= config.burn_in && seen.insert(theta.clone()) {
            out.push(Association(theta.clone()));
        }
    }
    out
}

/// `Σ_{j=0}^{min(n,m)} C(n,j)·C(m,j)·j!`, saturating.
pub fn association_count(n: usize, m: usize) -> u128 {
    let mut total: u128 = 0;
    // term_j = n!/(n-j)! · C(m, j)
    let mut falling: u128 = 1;
    let mut binom: u128 = 1;
    for j in 0..=n.min(m) {
        if j > 0 {
            falling = falling.saturating_mul((n - j + 1) as u128);
            binom = binom.saturating_mul((m - j + 1) as u128) / j as u128;
        }
        total = total.saturating_add(falling.saturating_mul(binom));
    }
    total
}

/// Every valid association of `n` targets to `m` measurements.
pub fn exhaustive_associations(n: usize, m: usize) -> Result<Vec<Association>> {
    let count = association_count(n, m);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::CombinatorialLimit { count, limit: EXHAUSTIVE_LIMIT });
    }
    fn recurse(i: usize, n: usize, m: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Association>) {
        if i == n {
            out.push(Association(cur.clone()));
            return;
        }
        for j in 0..=m {
            if j > 0 && used[j] {
                continue;
            }
            if j > 0 {
                used[j] = true;
            }
            cur.push(j);
            recurse(i + 1, n, m, cur, used, out);
            cur.pop();
            if j > 0 {
                used[j] = false;
            }
        }
    }
    let mut out = Vec::with_capacity(count as usize);
    recurse(0, n, m, &mut Vec::with_capacity(n), &mut vec![false; m + 1], &mut out);
    Ok(out)
}
