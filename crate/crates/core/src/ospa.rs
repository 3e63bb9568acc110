//! Optimal sub-pattern assignment (OSPA) distance between finite state sets.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::State;

#[derive(Debug, Clone, Copy)]
pub struct OspaParams<T> {
    /// Cutoff `c` (m).
    pub cutoff: T,
    /// Order `p ≥ 1`.
    pub order: T,
    /// Base distance; position-only Euclidean by default.
    pub base_distance: fn(&State<T>, &State<T>) -> T,
}

fn position_distance<T: Scalar>(a: &State<T>, b: &State<T>) -> T {
    a.position_distance(b)
}

impl<T: Scalar> Default for OspaParams<T> {
    fn default() -> Self {
        OspaParams { cutoff: T::of(10.0), order: T::of(2.0), base_distance: position_distance }
    }
}

impl<T: Scalar> OspaParams<T> {
    pub fn new(cutoff: T, order: T) -> Self {
        OspaParams { cutoff, order, ..Self::default() }
    }
}

/// OSPA value with its localization and cardinality parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ospa<T> {
    pub total: T,
    pub localization: T,
    pub cardinality: T,
}

/// Minimum-cost perfect matching of a square cost matrix (Hungarian method,
/// O(n³)). Returns `assignment[row] = column` and the total cost.
pub fn optimal_assignment<T: Scalar>(costs: &[Vec<T>]) -> Result<(Vec<usize>, T)> {
    let n = costs.len();
    for (row, r) in costs.iter().enumerate() {
        if r.len() != n {
            return Err(Error::NonSquare { rows: n, row, len: r.len() });
        }
    }
    if n == 0 {
        return Ok((Vec::new(), T::zero()));
    }
    let inf = T::infinity();
    // One-based potentials; column 0 is a virtual start.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
    Ok((assignment, total))
}

/// OSPA distance of order `p` with cutoff `c` between `x` and `y`.
///
/// With `|x| = n ≤ m = |y|` the value is
/// `((min_π Σ_i min(c, d(x_i, y_π(i)))^p + c^p (m - n)) / m)^{1/p}`; two empty
/// sets are at distance zero. The set sizes are swapped when `n > m`.
pub fn ospa_distance<T: Scalar>(x: &[State<T>], y: &[State<T>], params: &OspaParams<T>) -> Ospa<T> {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let n = small.len();
    let m = large.len();
    if m == 0 {
        return Ospa::default();
    }
    let c = params.cutoff;
    let p = params.order;
    let c_p = c.powf(p);
    // Dummy rows cost c^p against every column.
    let costs: Vec<Vec<T>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i < n { (params.base_distance)(&small[i], &large[j]).min(c).powf(p) } else { c_p })
                .collect()
        })
        .collect();
    let (assignment, _) = optimal_assignment(&costs).expect("square by construction");
    let loc_sum: T = (0..n).map(|i| costs[i][assignment[i]]).sum();
    let card_sum = c_p * T::from_usize(m - n).unwrap();
    let mf = T::from_usize(m).unwrap();
    let inv_p = T::one() / p;
    Ospa {
        total: ((loc_sum + card_sum) / mf).powf(inv_p),
        localization: (loc_sum / mf).powf(inv_p),
        cardinality: (card_sum / mf).powf(inv_p),
    }
}
