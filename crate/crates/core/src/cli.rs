//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code: 0 on success, 2 for usage or
//! input errors, 1 for internal failures.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimation::{FilterParams, StateEstimate};
use crate::io::{self as csvio, StateFrame};
use crate::ospa::{ospa_distance, OspaParams};
use crate::phd::PhdParams;
use crate::rng::stream;
use crate::sim::{self, BenchConfig, FilterKind, Scenario};

const REFERENCE_VALUES: &str = "Reference parameters: N_h = 100, r^p = w^p = 1e-5, r^th = 0.5, p_d = 0.9, \
p_s = 0.99, n^p = 1000 particles per target, clutter 5e-4 per unit area, birth existence 0.01, \
PHD birth particle weight 1e-5, OSPA cut-off c = 10 and order p = 2.";

#[derive(Debug, Parser)]
#[command(
    name = "mbmtrack",
    version,
    about = "Particle multi-Bernoulli mixture tracking with an SMC-PHD baseline",
    after_help = REFERENCE_VALUES
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate ground truth and measurements for a scenario.
    #[command(after_help = REFERENCE_VALUES)]
    Simulate(SimulateArgs),
    /// Run a filter over a measurements file and write per-scan estimates.
    #[command(after_help = REFERENCE_VALUES)]
    Track(TrackArgs),
    /// Monte-Carlo comparison of the MBM and PHD filters.
    #[command(after_help = REFERENCE_VALUES)]
    Bench(BenchArgs),
    /// Per-scan OSPA between an estimates file and a truth file.
    #[command(after_help = REFERENCE_VALUES)]
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    Mbm,
    Phd,
}

impl From<FilterArg> for FilterKind {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Mbm => FilterKind::Mbm,
            FilterArg::Phd => FilterKind::Phd,
        }
    }
}

/// Scenario source and model overrides. Unset overrides keep the scenario's
/// values.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file [default: bundled five-target scenario]
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Number of scans [reference: 100]
    #[arg(long)]
    pub duration: Option<usize>,
    /// Detection probability p_d [reference: 0.9]
    #[arg(long)]
    pub pd: Option<f64>,
    /// Survival probability p_s [reference: 0.99]
    #[arg(long)]
    pub ps: Option<f64>,
    /// Clutter intensity per unit area [reference: 5e-4]
    #[arg(long)]
    pub clutter_intensity: Option<f64>,
    /// Range noise variance, m^2 [reference: 0.25]
    #[arg(long)]
    pub range_variance: Option<f64>,
    /// Bearing noise variance, rad^2 [reference: 0.09]
    #[arg(long)]
    pub bearing_variance: Option<f64>,
    /// Existence probability of every birth component [reference: 0.01]
    #[arg(long)]
    pub birth_existence: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// Maximum posterior hypotheses N_h
    #[arg(long, default_value_t = 100)]
    pub max_hypotheses: usize,
    /// Component pruning threshold r^p
    #[arg(long, default_value_t = 1e-5)]
    pub target_prune: f64,
    /// Hypothesis pruning threshold w^p
    #[arg(long, default_value_t = 1e-5)]
    pub hyp_prune: f64,
    /// Existence threshold r^th for reporting a target
    #[arg(long, default_value_t = 0.5)]
    pub extract_threshold: f64,
    /// Particles per target n^p (both filters)
    #[arg(long, default_value_t = 1000)]
    pub particles: usize,
    /// Gibbs sweeps discarded before recording
    #[arg(long, default_value_t = 0)]
    pub gibbs_burn_in: usize,
    /// PHD weight of each birth particle
    #[arg(long, default_value_t = 1e-5)]
    pub phd_birth_weight: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for truth.csv and measurements.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub filter_params: FilterArgs,
    /// Measurements CSV (`scan,range,bearing`)
    #[arg(long)]
    pub measurements: PathBuf,
    #[arg(long, value_enum, default_value_t = FilterArg::Mbm)]
    pub filter: FilterArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimates CSV [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub filter_params: FilterArgs,
    /// Monte-Carlo runs; run r uses seed `seed + r`
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// Base seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub threads: Option<usize>,
    /// OSPA cut-off c
    #[arg(long, default_value_t = 10.0)]
    pub cutoff: f64,
    /// OSPA order p
    #[arg(long, default_value_t = 2.0)]
    pub order: f64,
    /// Results CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimates CSV (`scan,target_index,px,vx,py,vy`)
    #[arg(long)]
    pub estimates: PathBuf,
    /// Truth CSV (`scan,target_id,px,vx,py,vy`)
    #[arg(long)]
    pub truth: PathBuf,
    /// OSPA cut-off c
    #[arg(long, default_value_t = 10.0)]
    pub cutoff: f64,
    /// OSPA order p
    #[arg(long, default_value_t = 2.0)]
    pub order: f64,
    /// Output CSV [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
                Scenario::from_json(&text)
                    .map_err(|e| Error::InvalidScenario(format!("{}: {}", path.display(), strip_prefix(&e))))?
            }
            None => Scenario::reference(),
        };
        if let Some(d) = self.duration {
            s.duration = d;
            for t in &mut s.targets {
                t.death_time = t.death_time.min(d);
            }
            s.targets.retain(|t| t.birth_time <= d);
        }
        if let Some(v) = self.pd {
            s.detection_probability = v;
        }
        if let Some(v) = self.ps {
            s.survival_probability = v;
        }
        if let Some(v) = self.clutter_intensity {
            s.clutter.area_intensity = v;
        }
        if let Some(v) = self.range_variance {
            s.measurement.range_variance = v;
        }
        if let Some(v) = self.bearing_variance {
            s.measurement.bearing_variance = v;
        }
        if let Some(v) = self.birth_existence {
            let mut birth = s.birth_model::<f64>();
            for c in &mut birth.components {
                c.existence = v;
            }
            s.birth = Some(sim::BirthSpec {
                components: birth
                    .components
                    .iter()
                    .map(|c| sim::BirthComponentSpec { existence: c.existence, seed_state: c.seed_state.to_f64() })
                    .collect(),
            });
        }
        s.validate()?;
        Ok(s)
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::InvalidScenario(m) => m.clone(),
        other => other.to_string(),
    }
}

impl FilterArgs {
    pub fn params(&self) -> Result<(FilterParams, PhdParams)> {
        let params = FilterParams {
            max_hypotheses: self.max_hypotheses,
            target_prune: self.target_prune,
            hyp_prune: self.hyp_prune,
            extract_threshold: self.extract_threshold,
            particles_per_target: self.particles,
            gibbs_burn_in: self.gibbs_burn_in,
        };
        params.validate().map_err(Error::Input)?;
        if !(self.phd_birth_weight.is_finite() && self.phd_birth_weight >= 0.0) {
            return Err(Error::Input(format!("phd birth weight must be nonnegative, got {}", self.phd_birth_weight)));
        }
        let phd = PhdParams {
            birth_weight: self.phd_birth_weight,
            particles_per_target: self.particles,
            ..PhdParams::default()
        };
        Ok((params, phd))
    }
}

fn ospa_params(cutoff: f64, order: f64) -> Result<OspaParams<f64>> {
    if !(cutoff.is_finite() && cutoff > 0.0 && order.is_finite() && order >= 1.0) {
        return Err(Error::Input(format!("need cutoff > 0 and order >= 1, got c={cutoff}, p={order}")));
    }
    Ok(OspaParams::new(cutoff, order))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    let models = scenario.models::<f64>();
    let truth = sim::generate_truth::<f64>(&scenario);
    let measurements = sim::generate_measurements(&truth, &models, &mut stream(args.seed, 0));
    fs::create_dir_all(&args.out).map_err(|e| Error::Input(format!("{}: {e}", args.out.display())))?;
    let frames: Vec<StateFrame> = truth.iter().map(StateFrame::from).collect();
    csvio::write_truth(create(&args.out.join("truth.csv"))?, &frames)?;
    csvio::write_measurements(create(&args.out.join("measurements.csv"))?, &measurements)?;
    Ok(())
}

fn estimate_frames(estimates: &[StateEstimate<f64>]) -> Vec<StateFrame> {
    estimates
        .iter()
        .enumerate()
        .map(|(k, e)| StateFrame { scan: k + 1, states: e.states.iter().copied().enumerate().collect() })
        .collect()
}

pub fn cmd_track(args: &TrackArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    let (params, phd) = args.filter_params.params()?;
    let measurements =
        csvio::read_measurements(open(&args.measurements)?).map_err(|e| in_file(&args.measurements, e))?;
    let kind = FilterKind::from(args.filter);
    let id = match kind {
        FilterKind::Mbm => 1,
        FilterKind::Phd => 2,
    };
    let estimates =
        sim::run_filter(&measurements, &scenario.models(), &params, &phd, kind, stream(args.seed, id))?;
    with_output(args.out.as_deref(), |w| csvio::write_estimates(w, &estimate_frames(&estimates)))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.runs == 0 {
        return Err(Error::Input("--runs must be at least 1".into()));
    }
    let scenario = args.scenario.load()?;
    let (params, phd) = args.filter_params.params()?;
    let config =
        BenchConfig { params, phd, ospa: ospa_params(args.cutoff, args.order)?, runs: args.runs, base_seed: args.seed };
    let rows = match args.threads {
        Some(0) => return Err(Error::Input("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Input(e.to_string()))?
            .install(|| sim::run_monte_carlo(&scenario, &config))?,
        None => sim::run_monte_carlo(&scenario, &config)?,
    };
    let mut out = create(&args.out)?;
    csvio::write_results(&mut out, &rows)?;
    out.flush()?;

    let n = rows.len().max(1) as f64;
    let mean_mbm = rows.iter().map(|r| r.ospa_mbm).sum::<f64>() / n;
    let mean_phd = rows.iter().map(|r| r.ospa_phd).sum::<f64>() / n;
    let better = rows.iter().filter(|r| r.ospa_mbm <= r.ospa_phd).count();
    println!("runs: {}, scans: {}", args.runs, rows.len());
    println!("mean OSPA mbm: {mean_mbm:.4}");
    println!("mean OSPA phd: {mean_phd:.4}");
    println!("scans with mbm <= phd: {better}/{}", rows.len());
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let params = ospa_params(args.cutoff, args.order)?;
    let estimates = csvio::read_estimates(open(&args.estimates)?).map_err(|e| in_file(&args.estimates, e))?;
    let truth = csvio::read_truth(open(&args.truth)?).map_err(|e| in_file(&args.truth, e))?;
    let est_scans: Vec<usize> = estimates.iter().map(|f| f.scan).collect();
    let truth_scans: Vec<usize> = truth.iter().map(|f| f.scan).collect();
    if est_scans != truth_scans {
        let missing_est: Vec<String> =
            truth_scans.iter().filter(|s| !est_scans.contains(s)).map(|s| s.to_string()).collect();
        let missing_truth: Vec<String> =
            est_scans.iter().filter(|s| !truth_scans.contains(s)).map(|s| s.to_string()).collect();
        return Err(Error::Input(format!(
            "scan mismatch: missing from estimates [{}], missing from truth [{}]",
            missing_est.join(", "),
            missing_truth.join(", ")
        )));
    }
    let rows: Vec<_> = estimates
        .iter()
        .zip(&truth)
        .map(|(e, t)| (e.scan, ospa_distance(&e.states(), &t.states(), &params)))
        .collect();
    with_output(args.out.as_deref(), |w| csvio::write_eval(w, &rows))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::InvalidScenario(_) | Error::Csv(_) | Error::Io(_) => 2,
        _ => 1,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Track(a) => cmd_track(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
