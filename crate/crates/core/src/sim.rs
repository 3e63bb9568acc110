//! Scenario definition, truth and measurement synthesis, and the seeded
//! Monte-Carlo benchmark.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{FilterParams, StateEstimate};
use crate::models::{
    BirthComponent, BirthModel, ClutterModel, DetectionSurvival, MeasurementModel, ModelSet, MotionModel,
};
use crate::ospa::{ospa_distance, OspaParams};
use crate::phd::PhdParams;
use crate::rng::{stream, SimRng};
use crate::scalar::Scalar;
use crate::state::{Measurement, State};
use crate::tracker::{MbmFilter, PhdFilter, Tracker};

const REFERENCE_SCENARIO: &str = include_str!("../scenarios/reference.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub initial_state: [f64; 4],
    /// First scan (one-based) at which the target exists.
    pub birth_time: usize,
    /// Last scan at which the target exists.
    pub death_time: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub period: f64,
    pub accel_variances: [f64; 2],
}

impl Default for MotionSpec {
    fn default() -> Self {
        MotionSpec { period: 1.0, accel_variances: [4e-6, 4e-6] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub range_variance: f64,
    pub bearing_variance: f64,
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        MeasurementSpec { range_variance: 0.25, bearing_variance: 0.09 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterSpec {
    pub fov_x: [f64; 2],
    pub fov_y: [f64; 2],
    pub area_intensity: f64,
}

impl Default for ClutterSpec {
    fn default() -> Self {
        ClutterSpec { fov_x: [-50.0, 50.0], fov_y: [0.0, 100.0], area_intensity: 5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthComponentSpec {
    pub existence: f64,
    pub seed_state: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirthSpec {
    pub components: Vec<BirthComponentSpec>,
}

fn default_pd() -> f64 {
    0.9
}

fn default_ps() -> f64 {
    0.99
}

/// Scenario file contents. Model sections are optional and default to the
/// reference values; a missing `birth` section places one birth component
/// with existence 0.01 at every target's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: usize,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub motion: MotionSpec,
    #[serde(default)]
    pub measurement: MeasurementSpec,
    #[serde(default)]
    pub clutter: ClutterSpec,
    #[serde(default = "default_pd")]
    pub detection_probability: f64,
    #[serde(default = "default_ps")]
    pub survival_probability: f64,
    #[serde(default)]
    pub birth: Option<BirthSpec>,
}

impl Scenario {
    /// The five-target, 100-scan reference scenario.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.targets.iter().enumerate() {
            if !(1 <= t.birth_time && t.birth_time <= t.death_time && t.death_time <= self.duration) {
                return Err(Error::InvalidScenario(format!(
                    "targets[{i}]: need 1 <= birth_time <= death_time <= duration, got {}..{} with duration {}",
                    t.birth_time, t.death_time, self.duration
                )));
            }
            if t.initial_state.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidScenario(format!("targets[{i}].initial_state must be finite")));
            }
        }
        for (name, p) in [
            ("detection_probability", self.detection_probability),
            ("survival_probability", self.survival_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidScenario(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        self.models::<f64>().validate()
    }

    pub fn birth_model<T: Scalar>(&self) -> BirthModel<T> {
        let components = match &self.birth {
            Some(spec) => spec
                .components
                .iter()
                .map(|c| BirthComponent { existence: T::of(c.existence), seed_state: State::from_f64(c.seed_state) })
                .collect(),
            None => self
                .targets
                .iter()
                .map(|t| BirthComponent { existence: T::of(0.01), seed_state: State::from_f64(t.initial_state) })
                .collect(),
        };
        BirthModel { components }
    }

    pub fn models<T: Scalar>(&self) -> ModelSet<T> {
        ModelSet {
            motion: MotionModel::new(T::of(self.motion.period), self.motion.accel_variances.map(T::of)),
            measurement: MeasurementModel::new(
                T::of(self.measurement.range_variance),
                T::of(self.measurement.bearing_variance),
            ),
            clutter: ClutterModel {
                fov_x: (T::of(self.clutter.fov_x[0]), T::of(self.clutter.fov_x[1])),
                fov_y: (T::of(self.clutter.fov_y[0]), T::of(self.clutter.fov_y[1])),
                area_intensity: T::of(self.clutter.area_intensity),
            },
            birth: self.birth_model(),
            probabilities: DetectionSurvival::constant(
                T::of(self.detection_probability),
                T::of(self.survival_probability),
            ),
        }
    }
}

/// Targets alive at one scan, as `(target id, state)` with one-based ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthFrame<T> {
    pub scan: usize,
    pub states: Vec<(usize, State<T>)>,
}

impl<T: Scalar> TruthFrame<T> {
    pub fn positions(&self) -> Vec<State<T>> {
        self.states.iter().map(|(_, s)| *s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanMeasurements<T> {
    pub scan: usize,
    pub measurements: Vec<Measurement<T>>,
}

/// Noise-free constant-velocity trajectories: each target starts at its
/// initial state on its birth scan and exists through its death scan.
pub fn generate_truth<T: Scalar>(scenario: &Scenario) -> Vec<TruthFrame<T>> {
    let motion: MotionModel<T> = scenario.models::<T>().motion;
    let mut frames: Vec<TruthFrame<T>> =
        (1..=scenario.duration).map(|scan| TruthFrame { scan, states: Vec::new() }).collect();
    for (id, target) in scenario.targets.iter().enumerate() {
        let mut state = State::from_f64(target.initial_state);
        for scan in target.birth_time..=target.death_time.min(scenario.duration) {
            frames[scan - 1].states.push((id + 1, state));
            state = motion.transition_deterministic(&state);
        }
    }
    frames
}

/// Detections thinned by `p_d` with Gaussian range-bearing noise, plus Poisson
/// clutter, shuffled per scan.
pub fn generate_measurements<T: Scalar, R: Rng + ?Sized>(
    truth: &[TruthFrame<T>],
    models: &ModelSet<T>,
    rng: &mut R,
) -> Vec<ScanMeasurements<T>> {
    truth
        .iter()
        .map(|frame| {
            let mut measurements = Vec::new();
            for (_, s) in &frame.states {
                if T::unit_uniform(rng) < models.probabilities.p_d(s) {
                    if let Ok(z) = models.measurement.sample(s, rng) {
                        measurements.push(z);
                    }
                }
            }
            measurements.extend(models.clutter.sample(rng));
            measurements.shuffle(rng);
            ScanMeasurements { scan: frame.scan, measurements }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterKind {
    #[default]
    Mbm,
    Phd,
}

/// Runs a filter over a measurement sequence and returns one estimate per scan.
pub fn run_filter<T: Scalar>(
    measurements: &[ScanMeasurements<T>],
    models: &ModelSet<T>,
    params: &FilterParams,
    phd: &PhdParams,
    kind: FilterKind,
    rng: SimRng,
) -> Result<Vec<StateEstimate<T>>> {
    let mut tracker: Box<dyn Tracker<T>> = match kind {
        FilterKind::Mbm => Box::new(MbmFilter::new(models.clone(), *params, rng)?),
        FilterKind::Phd => Box::new(PhdFilter::new(models.clone(), *phd, rng)),
    };
    measurements.iter().map(|scan| tracker.step(&scan.measurements)).collect()
}

/// Per-scan averages over the Monte-Carlo runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchRow {
    pub scan: usize,
    pub ospa_mbm: f64,
    pub ospa_loc_mbm: f64,
    pub ospa_card_mbm: f64,
    pub ospa_phd: f64,
    pub ospa_loc_phd: f64,
    pub ospa_card_phd: f64,
    pub card_mean_mbm: f64,
    pub card_mean_phd: f64,
    pub card_true: usize,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub params: FilterParams,
    pub phd: PhdParams,
    pub ospa: OspaParams<f64>,
    pub runs: usize,
    pub base_seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            params: FilterParams::default(),
            phd: PhdParams::default(),
            ospa: OspaParams::default(),
            runs: 100,
            base_seed: 0,
        }
    }
}

/// Everything one Monte-Carlo run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub truth: Vec<TruthFrame<f64>>,
    pub measurements: Vec<ScanMeasurements<f64>>,
    pub mbm: Vec<StateEstimate<f64>>,
    pub phd: Vec<StateEstimate<f64>>,
}

/// One simulated run with seed `seed`: stream 0 drives the simulation,
/// streams 1 and 2 the MBM and PHD filters.
pub fn run_single(scenario: &Scenario, config: &BenchConfig, seed: u64, filters: &[FilterKind]) -> Result<RunOutput> {
    let models = scenario.models::<f64>();
    let truth = generate_truth::<f64>(scenario);
    let measurements = generate_measurements(&truth, &models, &mut stream(seed, 0));
    let mut out = RunOutput { truth, measurements, mbm: Vec::new(), phd: Vec::new() };
    for &kind in filters {
        let (slot, id) = match kind {
            FilterKind::Mbm => (&mut out.mbm, 1),
            FilterKind::Phd => (&mut out.phd, 2),
        };
        *slot = run_filter(&out.measurements, &models, &config.params, &config.phd, kind, stream(seed, id))?;
    }
    Ok(out)
}

/// Runs `config.runs` seeded simulations (run `r` uses seed
/// `base_seed + r`) in parallel and averages OSPA and cardinality per scan.
/// Sums are taken in run order so the result does not depend on scheduling.
pub fn run_monte_carlo(scenario: &Scenario, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.runs == 0 {
        return Err(Error::Input("runs must be at least 1".into()));
    }
    let per_run: Vec<Vec<BenchRow>> = (0..config.runs)
        .into_par_iter()
        .map(|r| {
            let seed = config.base_seed.wrapping_add(r as u64);
            let out = run_single(scenario, config, seed, &[FilterKind::Mbm, FilterKind::Phd])?;
            Ok(out
                .truth
                .iter()
                .zip(&out.mbm)
                .zip(&out.phd)
                .map(|((frame, mbm), phd)| {
                    let truth = frame.positions();
                    let om = ospa_distance(&mbm.states, &truth, &config.ospa);
                    let op = ospa_distance(&phd.states, &truth, &config.ospa);
                    BenchRow {
                        scan: frame.scan,
                        ospa_mbm: om.total,
                        ospa_loc_mbm: om.localization,
                        ospa_card_mbm: om.cardinality,
                        ospa_phd: op.total,
                        ospa_loc_phd: op.localization,
                        ospa_card_phd: op.cardinality,
                        card_mean_mbm: mbm.cardinality() as f64,
                        card_mean_phd: phd.cardinality() as f64,
                        card_true: truth.len(),
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let runs = config.runs as f64;
    let mut rows: Vec<BenchRow> = per_run[0].iter().map(|r| BenchRow { scan: r.scan, card_true: r.card_true, ..BenchRow::default() }).collect();
    for run in &per_run {
        for (acc, r) in rows.iter_mut().zip(run) {
            acc.ospa_mbm += r.ospa_mbm;
            acc.ospa_loc_mbm += r.ospa_loc_mbm;
            acc.ospa_card_mbm += r.ospa_card_mbm;
            acc.ospa_phd += r.ospa_phd;
            acc.ospa_loc_phd += r.ospa_loc_phd;
            acc.ospa_card_phd += r.ospa_card_phd;
            acc.card_mean_mbm += r.card_mean_mbm;
            acc.card_mean_phd += r.card_mean_phd;
        }
    }
    for acc in &mut rows {
        acc.ospa_mbm /= runs;
        acc.ospa_loc_mbm /= runs;
        acc.ospa_card_mbm /= runs;
        acc.ospa_phd /= runs;
        acc.ospa_loc_phd /= runs;
        acc.ospa_card_phd /= runs;
        acc.card_mean_mbm /= runs;
        acc.card_mean_phd /= runs;
    }
    Ok(rows)
}
