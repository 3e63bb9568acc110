//! Single-target motion and sensing models, clutter and birth.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::density::ParticleCloud;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::{wrap_angle, Measurement, State};

/// Smallest clutter density the filters divide by. Used when the configured
/// clutter rate is zero.
pub const CLUTTER_DENSITY_FLOOR: f64 = 1e-12;

/// Nearly-constant-velocity motion with independent white acceleration noise
/// on each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel<T> {
    /// Sampling period `T` in seconds.
    pub period: T,
    /// Acceleration noise variances for the x and y axes (m²/s⁴).
    pub accel_variances: [T; 2],
}

impl<T: Scalar> Default for MotionModel<T> {
    fn default() -> Self {
        MotionModel { period: T::one(), accel_variances: [T::of(4e-6); 2] }
    }
}

impl<T: Scalar> MotionModel<T> {
    pub fn new(period: T, accel_variances: [T; 2]) -> Self {
        MotionModel { period, accel_variances }
    }

    /// `F x` with `F = I₂ ⊗ [[1, T], [0, 1]]`.
    pub fn transition_deterministic(&self, s: &State<T>) -> State<T> {
        let t = self.period;
        State::new(s.px() + t * s.vx(), s.vx(), s.py() + t * s.vy(), s.vy())
    }

    /// `F x + G n` with `n ~ N(0, diag(accel_variances))` and
    /// `G = [[T²/2, 0], [T, 0], [0, T²/2], [0, T]]`.
    pub fn transition_sample<R: Rng + ?Sized>(&self, s: &State<T>, rng: &mut R) -> State<T> {
        let mut out = self.transition_deterministic(s);
        let t = self.period;
        let half_t2 = t * t / T::of(2.0);
        for axis in 0..2 {
            let var = self.accel_variances[axis];
            if var > T::zero() {
                let n = var.sqrt() * T::standard_normal(rng);
                out.0[2 * axis] += half_t2 * n;
                out.0[2 * axis + 1] += t * n;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > T::zero()) {
            return Err(Error::InvalidScenario(format!("motion.period must be > 0, got {}", self.period)));
        }
        if self.accel_variances.iter().any(|v| !(*v >= T::zero())) {
            return Err(Error::InvalidScenario("motion.accel_variances must be >= 0".into()));
        }
        Ok(())
    }
}

/// Noise-free range and four-quadrant bearing of a state's position.
pub fn measure<T: Scalar>(s: &State<T>) -> Result<Measurement<T>> {
    if s.px() == T::zero() && s.py() == T::zero() {
        return Err(Error::BearingUndefined);
    }
    Ok(Measurement::new(s.px().hypot(s.py()), s.py().atan2(s.px())))
}

/// Additive Gaussian noise on range (m²) and bearing (rad²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementModel<T> {
    pub range_variance: T,
    pub bearing_variance: T,
}

impl<T: Scalar> Default for MeasurementModel<T> {
    fn default() -> Self {
        MeasurementModel { range_variance: T::of(0.25), bearing_variance: T::of(0.09) }
    }
}

impl<T: Scalar> MeasurementModel<T> {
    pub fn new(range_variance: T, bearing_variance: T) -> Self {
        MeasurementModel { range_variance, bearing_variance }
    }

    /// `ln` of the normalizing constant `(2π)⁻¹ (σ_r² σ_b²)^{-1/2}`.
    pub fn log_norm(&self) -> T {
        -T::of((2.0 * PI).ln()) - T::of(0.5) * (self.range_variance * self.bearing_variance).ln()
    }

    /// Log density of `z` given the noise-free measurement `predicted`.
    /// The bearing residual is wrapped into `(-π, π]`.
    #[inline]
    pub fn log_likelihood_at(&self, z: &Measurement<T>, predicted: &Measurement<T>) -> T {
        let dr = z.range - predicted.range;
        let db = wrap_angle(z.bearing - predicted.bearing);
        self.log_norm() - T::of(0.5) * (dr * dr / self.range_variance + db * db / self.bearing_variance)
    }

    /// `l(z | x)`; zero when the state sits at the sensor origin.
    pub fn likelihood(&self, z: &Measurement<T>, state: &State<T>) -> T {
        match measure(state) {
            Ok(pred) => self.log_likelihood_at(z, &pred).exp(),
            Err(_) => T::zero(),
        }
    }

    /// Noisy measurement of `state`, bearing wrapped into `(-π, π]`.
    pub fn sample<R: Rng + ?Sized>(&self, state: &State<T>, rng: &mut R) -> Result<Measurement<T>> {
        let z = measure(state)?;
        let range = z.range + self.range_variance.sqrt() * T::standard_normal(rng);
        let bearing = wrap_angle(z.bearing + self.bearing_variance.sqrt() * T::standard_normal(rng));
        Ok(Measurement::new(range, bearing))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_variance > T::zero() && self.bearing_variance > T::zero()) {
            return Err(Error::InvalidScenario("measurement variances must be > 0".into()));
        }
        Ok(())
    }
}

/// `l(z | x)` under `model`.
pub fn measurement_likelihood<T: Scalar>(z: &Measurement<T>, state: &State<T>, model: &MeasurementModel<T>) -> T {
    model.likelihood(z, state)
}

/// Box in measurement space covering the image of the field of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementSupport<T> {
    pub range_min: T,
    pub range_max: T,
    /// Start of the bearing interval; the interval runs counter-clockwise.
    pub bearing_start: T,
    pub bearing_span: T,
}

impl<T: Scalar> MeasurementSupport<T> {
    pub fn volume(&self) -> T {
        (self.range_max - self.range_min) * self.bearing_span
    }

    pub fn contains(&self, z: &Measurement<T>) -> bool {
        if !(z.range >= self.range_min && z.range <= self.range_max) {
            return false;
        }
        let two_pi = T::of(2.0 * PI);
        let mut d = (z.bearing - self.bearing_start) % two_pi;
        if d < T::zero() {
            d += two_pi;
        }
        let tol = T::epsilon() * T::of(64.0);
        d <= self.bearing_span + tol || two_pi - d <= tol
    }
}

/// Poisson clutter, uniform over a rectangular Cartesian field of view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClutterModel<T> {
    pub fov_x: (T, T),
    pub fov_y: (T, T),
    /// Expected clutter points per unit Cartesian area (1/m²).
    pub area_intensity: T,
}

impl<T: Scalar> Default for ClutterModel<T> {
    fn default() -> Self {
        ClutterModel {
            fov_x: (T::of(-50.0), T::of(50.0)),
            fov_y: (T::zero(), T::of(100.0)),
            area_intensity: T::of(5e-4),
        }
    }
}

impl<T: Scalar> ClutterModel<T> {
    pub fn fov_area(&self) -> T {
        (self.fov_x.1 - self.fov_x.0) * (self.fov_y.1 - self.fov_y.0)
    }

    /// Expected clutter count per scan, `λ_c`.
    pub fn expected_count(&self) -> T {
        self.area_intensity * self.fov_area()
    }

    /// Range-bearing box spanned by the field of view.
    pub fn support(&self) -> MeasurementSupport<T> {
        let (x0, x1) = self.fov_x;
        let (y0, y1) = self.fov_y;
        let zero = T::zero();
        let cx = zero.max(x0).min(x1);
        let cy = zero.max(y0).min(y1);
        let range_min = cx.hypot(cy);
        let corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)];
        let range_max = corners.iter().map(|&(x, y)| x.hypot(y)).fold(zero, T::max);

        let inside = x0 < zero && zero < x1 && y0 < zero && zero < y1;
        if inside {
            let pi = T::of(PI);
            return MeasurementSupport { range_min, range_max, bearing_start: -pi, bearing_span: pi + pi };
        }
        // Unwrap to [0, 2π) when the box straddles the negative x-axis.
        let straddles_negative_x = x0 < zero && y0 < zero && zero < y1;
        let angles: Vec<T> = corners
            .iter()
            .filter(|&&(x, y)| !(x == zero && y == zero))
            .map(|&(x, y)| {
                let a = y.atan2(x);
                if straddles_negative_x && a < zero {
                    a + T::of(2.0 * PI)
                } else {
                    a
                }
            })
            .collect();
        let lo = angles.iter().copied().fold(T::infinity(), T::min);
        let hi = angles.iter().copied().fold(T::neg_infinity(), T::max);
        MeasurementSupport { range_min, range_max, bearing_start: wrap_angle(lo), bearing_span: hi - lo }
    }

    /// Uniform clutter intensity `c(z) = λ_c / V_z` on the support, zero outside.
    pub fn intensity(&self, z: &Measurement<T>) -> T {
        let support = self.support();
        if support.contains(z) {
            self.expected_count() / support.volume()
        } else {
            T::zero()
        }
    }

    /// Clutter density the filters divide by: the in-support value of `c(z)`
    /// for every measurement, floored at [`CLUTTER_DENSITY_FLOOR`].
    ///
    /// Target returns near the edge of the field of view can fall just outside
    /// the support because of measurement noise; they still get a finite
    /// clutter alternative.
    pub fn filter_density(&self) -> T {
        let support = self.support();
        let v = support.volume();
        let c = if v > T::zero() { self.expected_count() / v } else { T::zero() };
        c.max(T::of(CLUTTER_DENSITY_FLOOR))
    }

    /// Poisson number of points, each uniform over the Cartesian field of view
    /// and mapped into range-bearing.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Measurement<T>> {
        let lambda = self.expected_count().as_f64();
        if !(lambda > 0.0) {
            return Vec::new();
        }
        let count = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = self.fov_x.0 + (self.fov_x.1 - self.fov_x.0) * T::unit_uniform(rng);
            let y = self.fov_y.0 + (self.fov_y.1 - self.fov_y.0) * T::unit_uniform(rng);
            if let Ok(z) = measure(&State::new(x, T::zero(), y, T::zero())) {
                out.push(z);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_x.0 < self.fov_x.1 && self.fov_y.0 < self.fov_y.1) {
            return Err(Error::InvalidScenario("clutter field of view bounds must be increasing".into()));
        }
        if !(self.area_intensity >= T::zero()) {
            return Err(Error::InvalidScenario("clutter.area_intensity must be >= 0".into()));
        }
        Ok(())
    }
}

/// `c(z)` under `model`.
pub fn clutter_intensity<T: Scalar>(z: &Measurement<T>, model: &ClutterModel<T>) -> T {
    model.intensity(z)
}

/// Clutter set for one scan.
pub fn sample_clutter<T: Scalar, R: Rng + ?Sized>(model: &ClutterModel<T>, rng: &mut R) -> Vec<Measurement<T>> {
    model.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthComponent<T> {
    pub existence: T,
    pub seed_state: State<T>,
}

/// Multi-Bernoulli birth: one Bernoulli per entry, appended at every prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthModel<T> {
    pub components: Vec<BirthComponent<T>>,
}

/// Initial states of the five reference targets.
pub const REFERENCE_INITIAL_STATES: [[f64; 4]; 5] = [
    [-50.0, 1.65, 100.0, -1.65],
    [-50.0, 1.65, 0.0, 1.65],
    [-50.0, 0.875, 30.0, 0.875],
    [50.0, -1.16, 70.0, -1.16],
    [50.0, -1.65, 50.0, 0.0],
];

impl<T: Scalar> Default for BirthModel<T> {
    fn default() -> Self {
        BirthModel {
            components: REFERENCE_INITIAL_STATES
                .iter()
                .map(|s| BirthComponent { existence: T::of(0.01), seed_state: State::from_f64(*s) })
                .collect(),
        }
    }
}

impl<T: Scalar> BirthModel<T> {
    pub fn none() -> Self {
        BirthModel { components: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Equal-weight cloud of `count` draws from the transition density
    /// conditioned on the seed state of component `index`.
    pub fn sample_particles<R: Rng + ?Sized>(
        &self,
        index: usize,
        motion: &MotionModel<T>,
        count: usize,
        rng: &mut R,
    ) -> ParticleCloud<T> {
        let seed = self.components[index].seed_state;
        ParticleCloud::uniform((0..count).map(|_| motion.transition_sample(&seed, rng)))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if !(c.existence >= T::zero() && c.existence <= T::one()) {
                return Err(Error::InvalidScenario(format!("birth.components[{i}].existence must be in [0, 1]")));
            }
            if !c.seed_state.is_finite() {
                return Err(Error::InvalidScenario(format!("birth.components[{i}].seed_state must be finite")));
            }
        }
        Ok(())
    }
}

pub fn sample_birth_particles<T: Scalar, R: Rng + ?Sized>(
    index: usize,
    model: &BirthModel<T>,
    motion: &MotionModel<T>,
    count: usize,
    rng: &mut R,
) -> ParticleCloud<T> {
    model.sample_particles(index, motion, count, rng)
}

pub type StateFn<T> = Arc<dyn Fn(&State<T>) -> T + Send + Sync>;

/// State-dependent probability, e.g. of detection or survival.
#[derive(Clone)]
pub enum ProbabilityFn<T> {
    Constant(T),
    Function(StateFn<T>),
}

impl<T: Scalar> ProbabilityFn<T> {
    #[inline]
    pub fn eval(&self, s: &State<T>) -> T {
        match self {
            ProbabilityFn::Constant(p) => *p,
            ProbabilityFn::Function(f) => f(s).max(T::zero()).min(T::one()),
        }
    }

    pub fn constant(&self) -> Option<T> {
        match self {
            ProbabilityFn::Constant(p) => Some(*p),
            ProbabilityFn::Function(_) => None,
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ProbabilityFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbabilityFn::Constant(p) => write!(f, "Constant({p:?})"),
            ProbabilityFn::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionSurvival<T> {
    pub detection: ProbabilityFn<T>,
    pub survival: ProbabilityFn<T>,
}

impl<T: Scalar> Default for DetectionSurvival<T> {
    fn default() -> Self {
        DetectionSurvival::constant(T::of(0.9), T::of(0.99))
    }
}

impl<T: Scalar> DetectionSurvival<T> {
    pub fn constant(p_d: T, p_s: T) -> Self {
        DetectionSurvival { detection: ProbabilityFn::Constant(p_d), survival: ProbabilityFn::Constant(p_s) }
    }

    #[inline]
    pub fn p_d(&self, s: &State<T>) -> T {
        self.detection.eval(s)
    }

    #[inline]
    pub fn p_s(&self, s: &State<T>) -> T {
        self.survival.eval(s)
    }
}

/// Every model a filter or simulator needs.
#[derive(Debug, Clone)]
pub struct ModelSet<T> {
    pub motion: MotionModel<T>,
    pub measurement: MeasurementModel<T>,
    pub clutter: ClutterModel<T>,
    pub birth: BirthModel<T>,
    pub probabilities: DetectionSurvival<T>,
}

impl<T: Scalar> Default for ModelSet<T> {
    fn default() -> Self {
        ModelSet {
            motion: MotionModel::default(),
            measurement: MeasurementModel::default(),
            clutter: ClutterModel::default(),
            birth: BirthModel::default(),
            probabilities: DetectionSurvival::default(),
        }
    }
}

impl<T: Scalar> ModelSet<T> {
    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.measurement.validate()?;
        self.clutter.validate()?;
        self.birth.validate()?;
        for (name, p) in [("detection", &self.probabilities.detection), ("survival", &self.probabilities.survival)] {
            if let Some(v) = p.constant() {
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(Error::InvalidScenario(format!("{name} probability must be in [0, 1]")));
                }
            }
        }
        Ok(())
    }
}
