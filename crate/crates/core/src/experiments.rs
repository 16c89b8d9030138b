//! Random transversal circuits, depth sweeps, and CSV/JSON output.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codes::{build_code, StabilizerCode};
use crate::dense::{self, DensityMatrix, GadgetNoise, NoiseModel, StateVector, TOL_BRANCH};
use crate::error::{Result, VqedError};
use crate::exact::{self, CircuitSpec, GadgetSchedule, GadgetVariant, ScheduleMode};
use crate::rng;
use crate::sampling;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "VQED_THREADS";

/// CSV column order.
pub const CSV_HEADER: [&str; 11] =
    ["code", "L", "schedule", "circuit", "seed", "infidelity", "trace", "cost", "ratio", "variance", "shots"];

/// Gadget noise family; the strength is the gate noise `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GadgetNoiseMode {
    #[default]
    Off,
    SystemGadget,
    AncillaOnly,
}

impl GadgetNoiseMode {
    pub fn with_p(self, p: f64) -> GadgetNoise {
        match self {
            Self::Off => GadgetNoise::Off,
            Self::SystemGadget => GadgetNoise::SystemGadget { p },
            Self::AncillaOnly => GadgetNoise::AncillaOnly { p },
        }
    }
}

impl fmt::Display for GadgetNoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Off => "off",
            Self::SystemGadget => "system_gadget",
            Self::AncillaOnly => "ancilla_only",
        })
    }
}

impl FromStr for GadgetNoiseMode {
    type Err = VqedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Self::Off),
            "system_gadget" => Ok(Self::SystemGadget),
            "ancilla_only" => Ok(Self::AncillaOnly),
            other => Err(VqedError::Config(format!("unknown gadget noise mode `{other}`"))),
        }
    }
}

/// Exact density-matrix evaluation or a fixed number of shots per point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Exact,
    Shots(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = VqedError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(VqedError::Config(format!("unknown output format `{other}`"))),
        }
    }
}

/// Everything a sweep needs. Missing JSON fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: String,
    /// `None` selects the per-code default grid.
    pub depths: Option<Vec<usize>>,
    pub p: f64,
    pub gadget_noise: GadgetNoiseMode,
    pub variant: GadgetVariant,
    pub schedules: Vec<ScheduleMode>,
    pub circuits: usize,
    pub mode: RunMode,
    pub seed: u64,
    /// Add the unencoded single-qubit rows to infidelity sweeps.
    pub physical_baseline: bool,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            code: "code_412".into(),
            depths: None,
            p: 0.01,
            gadget_noise: GadgetNoiseMode::Off,
            variant: GadgetVariant::SingleControl,
            schedules: vec![
                ScheduleMode::None,
                ScheduleMode::LastGate,
                ScheduleMode::EveryM(20),
                ScheduleMode::EveryM(10),
                ScheduleMode::EveryGate,
            ],
            circuits: 20,
            mode: RunMode::Exact,
            seed: 0,
            physical_baseline: true,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

/// Default depth grid: `0, 10, …, 200`, or `0, 10, …, 100` for the 7-qubit code.
pub fn default_depths(code: &str) -> Vec<usize> {
    let max = if code == "code_713" { 100 } else { 200 };
    (0..=max).step_by(10).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| VqedError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Lays the keys of a JSON object over this config.
    pub fn overridden_by(&self, text: &str) -> Result<Self> {
        let patch: serde_json::Value = serde_json::from_str(text).map_err(|e| VqedError::Config(e.to_string()))?;
        let serde_json::Value::Object(patch) = patch else {
            return Err(VqedError::Config("config file must hold a JSON object".into()));
        };
        let mut base = serde_json::to_value(self)?;
        if let serde_json::Value::Object(map) = &mut base {
            map.extend(patch);
        }
        let cfg: Self = serde_json::from_value(base).map_err(|e| VqedError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolved_depths(&self) -> Vec<usize> {
        self.depths.clone().unwrap_or_else(|| default_depths(&self.code))
    }

    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.p, self.gadget_noise.with_p(self.p)).map_err(|e| VqedError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        build_code(&self.code).map_err(|e| VqedError::Config(e.to_string()))?;
        self.noise()?;
        let depths = self.resolved_depths();
        if depths.is_empty() {
            return Err(VqedError::Config("depth grid is empty".into()));
        }
        if depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VqedError::Config("depth grid must be strictly ascending".into()));
        }
        if self.circuits == 0 {
            return Err(VqedError::Config("at least one circuit per point is required".into()));
        }
        if self.schedules.is_empty() {
            return Err(VqedError::Config("no schedules given".into()));
        }
        if self.mode == RunMode::Shots(0) {
            return Err(VqedError::Config("shot count must be positive".into()));
        }
        Ok(())
    }
}

/// One output line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub code: String,
    #[serde(rename = "L")]
    pub depth: usize,
    pub schedule: String,
    pub circuit: usize,
    pub seed: u64,
    pub infidelity: Option<f64>,
    pub trace: Option<f64>,
    pub cost: Option<f64>,
    pub ratio: Option<f64>,
    pub variance: Option<f64>,
    pub shots: Option<usize>,
}

/// `L` gates drawn uniformly, with replacement, from the code's transversal set.
pub fn generate_random_circuit(code: &Arc<StabilizerCode>, depth: usize, seed: u64) -> Result<CircuitSpec> {
    let mut r = rng::stream(seed, 0);
    let count = code.transversal_gates().len();
    let gates = (0..depth).map(|_| r.random_range(0..count)).collect();
    CircuitSpec::with_logical_z(Arc::clone(code), gates, NoiseModel::gate_only(0.0)?)
}

/// Seed of random circuit `index` under `master`.
pub fn circuit_seed(master: u64, index: usize) -> u64 {
    rng::derive_seed(master, &[index as u64])
}

/// One unencoded qubit running the single-qubit version of the same gates,
/// with `ℰ_p` after each. Returns the infidelity after each requested depth.
pub fn physical_baseline(spec: &CircuitSpec, p: f64, depths: &[usize]) -> Result<Vec<f64>> {
    let gates = spec.code().transversal_gates();
    let mut rho = DensityMatrix::basis(1, 0)?;
    let mut psi = StateVector::from_element(2, num_complex::Complex64::new(0.0, 0.0));
    psi[0] = num_complex::Complex64::new(1.0, 0.0);
    let mut out = Vec::with_capacity(depths.len());
    let mut layer = 0;
    for &target in depths {
        while layer < target {
            let u = &gates[spec.gates()[layer]].matrix;
            rho.apply_gate1(u, 0)?;
            rho.depolarize(p, 0)?;
            dense::apply_gate1_vector(&mut psi, u, 1, 0);
            layer += 1;
        }
        out.push(1.0 - dense::fidelity_pure(&rho, &psi)?);
    }
    Ok(out)
}

struct Context {
    code: Arc<StabilizerCode>,
    depths: Vec<usize>,
    noise: NoiseModel,
}

impl Context {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { code: Arc::new(build_code(&cfg.code)?), depths: cfg.resolved_depths(), noise: cfg.noise()? })
    }

    fn circuit(&self, cfg: &ExperimentConfig, index: usize) -> Result<(u64, CircuitSpec)> {
        let seed = circuit_seed(cfg.seed, index);
        let max = *self.depths.last().unwrap_or(&0);
        let spec = generate_random_circuit(&self.code, max, seed)?.with_noise(NoiseModel::gate_only(self.noise.gate_p)?);
        Ok((seed, spec))
    }
}

fn blank_row(cfg: &ExperimentConfig, depth: usize, schedule: String, circuit: usize, seed: u64) -> SweepRow {
    SweepRow {
        code: cfg.code.clone(),
        depth,
        schedule,
        circuit,
        seed,
        infidelity: None,
        trace: None,
        cost: None,
        ratio: None,
        variance: None,
        shots: None,
    }
}

/// Exact rows for one circuit and schedule, one per depth.
fn exact_rows(
    cfg: &ExperimentConfig,
    ctx: &Context,
    circuit: usize,
    seed: u64,
    spec: &CircuitSpec,
    schedule: ScheduleMode,
) -> Result<Vec<SweepRow>> {
    let sched = GadgetSchedule::new(schedule).with_variant(cfg.variant);
    let snaps = exact::evolve_snapshots(spec, &sched, ctx.noise.gadget, &ctx.depths)?;
    let mut rows = Vec::with_capacity(snaps.len());
    for (&depth, snap) in ctx.depths.iter().zip(&snaps) {
        let mut row = blank_row(cfg, depth, schedule.to_string(), circuit, seed);
        let trace = snap.trace();
        row.trace = Some(trace);
        // annihilated points keep their trace and leave the rest empty
        if trace >= TOL_BRANCH {
            let psi = spec.prefix(depth).noiseless_state()?;
            row.infidelity = Some(exact::infidelity(snap, &psi)?);
            row.cost = Some(exact::vqed_sampling_cost(trace)?);
            row.ratio = Some(snap.pauli_expectation(spec.observable())? / trace);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Shot-mode rows for one circuit and schedule.
fn shot_rows(
    cfg: &ExperimentConfig,
    ctx: &Context,
    circuit: usize,
    seed: u64,
    spec: &CircuitSpec,
    schedule_index: usize,
    shots: usize,
) -> Result<Vec<SweepRow>> {
    let schedule = cfg.schedules[schedule_index];
    let sched = GadgetSchedule::new(schedule).with_variant(cfg.variant);
    ctx.depths
        .iter()
        .map(|&depth| {
            let shot_seed = rng::derive_seed(seed, &[depth as u64, schedule_index as u64]);
            let est = sampling::vqed_estimate(&spec.prefix(depth), &sched, &ctx.noise, shots, shot_seed)?;
            let mut row = blank_row(cfg, depth, schedule.to_string(), circuit, seed);
            row.trace = Some(est.a_mean);
            row.cost = (est.a_mean.abs() >= TOL_BRANCH).then(|| est.a_mean.powi(-2));
            row.ratio = est.ratio;
            row.variance = est.ratio_variance;
            row.shots = Some(shots);
            Ok(row)
        })
        .collect()
}

/// Runs every `(circuit, schedule)` job in parallel and returns rows sorted
/// by depth, then schedule (baseline last), then circuit.
fn sweep(cfg: &ExperimentConfig, with_baseline: bool) -> Result<Vec<SweepRow>> {
    let ctx = Context::new(cfg)?;
    let n_sched = cfg.schedules.len() + usize::from(with_baseline);
    let jobs: Vec<(usize, usize)> = (0..cfg.circuits).flat_map(|c| (0..n_sched).map(move |s| (c, s))).collect();
    let results: Vec<Vec<SweepRow>> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let (seed, spec) = ctx.circuit(cfg, c)?;
            if s == cfg.schedules.len() {
                let infid = physical_baseline(&spec, ctx.noise.gate_p, &ctx.depths)?;
                return Ok(ctx
                    .depths
                    .iter()
                    .zip(infid)
                    .map(|(&depth, f)| {
                        let mut row = blank_row(cfg, depth, "physical".into(), c, seed);
                        row.infidelity = Some(f);
                        row.trace = Some(1.0);
                        row.cost = Some(1.0);
                        row
                    })
                    .collect());
            }
            match cfg.mode {
                RunMode::Exact => exact_rows(cfg, &ctx, c, seed, &spec, cfg.schedules[s]),
                RunMode::Shots(n) => shot_rows(cfg, &ctx, c, seed, &spec, s, n),
            }
        })
        .collect::<Result<_>>()?;
    let per_job = ctx.depths.len();
    let mut rows = Vec::with_capacity(jobs.len() * per_job);
    for d in 0..per_job {
        for s in 0..n_sched {
            for job in results.iter().skip(s).step_by(n_sched) {
                rows.push(job[d].clone());
            }
        }
    }
    Ok(rows)
}

/// Infidelity of the detected state at every grid point, plus the
/// unencoded baseline when enabled. Requires exact mode.
pub fn run_infidelity_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    if cfg.mode != RunMode::Exact {
        return Err(VqedError::Config("infidelity sweeps need exact mode".into()));
    }
    sweep(cfg, cfg.physical_baseline)
}

/// `tr[ρ']` and its inverse square at every grid point. In shot mode the
/// trace column holds the estimated denominator.
pub fn run_cost_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    sweep(cfg, false)
}

/// Runs `f` on a pool of `threads` workers; `None` falls back to the
/// environment variable, then to rayon's default.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let threads = match threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| VqedError::Config(format!("{THREADS_ENV}=`{v}` is not a count")))?),
            Err(_) => None,
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| VqedError::Config(e.to_string()))?;
    Ok(pool.install(f))
}

// ---- output ---------------------------------------------------------------

/// `x` with 12 significant digits, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = trim(format!("{x:.decimals$}"));
        // rounding can carry into a new digit; that only adds a trailing zero
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        format!("{}e{}", trim(mant.to_string()), e)
    }
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.write_record([
            r.code.clone(),
            r.depth.to_string(),
            r.schedule.clone(),
            r.circuit.to_string(),
            r.seed.to_string(),
            opt(r.infidelity, format_sig),
            opt(r.trace, format_sig),
            opt(r.cost, format_sig),
            opt(r.ratio, format_sig),
            opt(r.variance, format_sig),
            opt(r.shots, |s| s.to_string()),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_rows<W: Write>(rows: &[SweepRow], format: OutputFormat, w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, w),
        OutputFormat::Json => write_json(rows, w),
    }
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit_rows(rows: &[SweepRow], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            write_rows(rows, format, &mut w)?;
            w.flush()?;
            Ok(())
        }
        None => write_rows(rows, format, io::stdout().lock()),
    }
}
