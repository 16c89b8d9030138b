use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vqed::codes::{build_code, BUILTIN_CODES};
use vqed::exact::ScheduleMode;
use vqed::experiments::{self, ExperimentConfig, GadgetNoiseMode, OutputFormat, RunMode};
use vqed::{Result, VqedError};

#[derive(Parser)]
#[command(name = "vqed", version, about = "Virtual quantum error detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infidelity against depth for each schedule, plus the unencoded baseline.
    SweepInfidelity(Common),
    /// Post-selection trace and sampling cost against depth.
    SweepCost(Common),
    /// Shot-mode VQED estimates at single points.
    Estimate(Common),
    /// Exact report (infidelity, trace, cost, mitigated ⟨Z_L⟩) at single points.
    Exact(Common),
    /// Print the built-in code registry.
    Codes {
        #[arg(long, value_parser = parse_format)]
        format: Option<OutputFormat>,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    code: Option<String>,
    /// Comma-separated depths, or `start:stop:step` (inclusive).
    #[arg(long, value_parser = parse_depths)]
    depths: Option<Depths>,
    /// Gate (and gadget) depolarizing probability.
    #[arg(long)]
    p: Option<f64>,
    /// none, last_gate, every_gate or every_<m>; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', value_parser = parse_schedule)]
    schedule: Vec<ScheduleMode>,
    /// off, system_gadget or ancilla_only.
    #[arg(long, value_parser = parse_gadget_noise)]
    gadget_noise: Option<GadgetNoiseMode>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    circuits: Option<usize>,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Worker threads (default: $VQED_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Debug)]
struct Depths(Vec<usize>);

fn parse_depths(s: &str) -> std::result::Result<Depths, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad depth `{t}`"));
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, st) = (num(start)?, num(stop)?, num(step)?);
            if st == 0 || a > b {
                return Err(format!("bad depth range `{s}`"));
            }
            Ok(Depths((a..=b).step_by(st).collect()))
        }
        [_] => s.split(',').map(num).collect::<std::result::Result<_, _>>().map(Depths),
        _ => Err(format!("bad depth range `{s}`")),
    }
}

fn parse_schedule(s: &str) -> std::result::Result<ScheduleMode, String> {
    s.parse().map_err(|e: VqedError| e.to_string())
}

fn parse_gadget_noise(s: &str) -> std::result::Result<GadgetNoiseMode, String> {
    s.parse().map_err(|e: VqedError| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    s.parse().map_err(|e: VqedError| e.to_string())
}

enum Kind {
    Infidelity,
    Cost,
    Estimate,
    Exact,
}

fn build_config(args: &Common, kind: &Kind) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if matches!(kind, Kind::Estimate | Kind::Exact) {
        cfg.circuits = 1;
        cfg.physical_baseline = false;
    }
    if matches!(kind, Kind::Estimate) {
        cfg.depths = Some(vec![10]);
        cfg.schedules = vec![ScheduleMode::EveryGate];
        cfg.mode = RunMode::Shots(10_000);
    }
    if let Some(code) = &args.code {
        cfg.code = code.clone();
    }
    if let Some(d) = &args.depths {
        cfg.depths = Some(d.0.clone());
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if !args.schedule.is_empty() {
        cfg.schedules = args.schedule.clone();
    }
    if let Some(g) = args.gadget_noise {
        cfg.gadget_noise = g;
    }
    if let Some(n) = args.shots {
        if !matches!(kind, Kind::Estimate | Kind::Cost) {
            return Err(VqedError::Config("--shots applies only to `estimate` and `sweep-cost`".into()));
        }
        cfg.mode = RunMode::Shots(n);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.circuits {
        cfg.circuits = c;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| VqedError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg = cfg.overridden_by(&text)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(args: &Common, kind: Kind) -> Result<()> {
    let cfg = build_config(args, &kind)?;
    let rows = experiments::with_threads(args.threads, || match kind {
        Kind::Infidelity => experiments::run_infidelity_sweep(&cfg),
        Kind::Cost | Kind::Estimate | Kind::Exact => experiments::run_cost_sweep(&cfg),
    })??;
    experiments::emit_rows(&rows, cfg.format, cfg.out.as_deref())
}

fn print_codes(format: OutputFormat) -> Result<()> {
    let mut descs = Vec::new();
    for name in BUILTIN_CODES {
        descs.push(build_code(name)?.description());
    }
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&descs)?),
        OutputFormat::Csv => {
            for d in descs {
                println!("{} [[{},{},{}]]", d.name, d.n, d.k, d.d);
                println!("  generators: {}", join(&d.generators));
                println!("  logical X:  {}", join(&d.logical_x));
                println!("  logical Z:  {}", join(&d.logical_z));
                println!("  transversal: {}", d.transversal.join(" "));
            }
        }
    }
    Ok(())
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn exit_code(err: &VqedError) -> u8 {
    match err {
        VqedError::Config(_) | VqedError::UnknownCode(_) | VqedError::Parse(_) | VqedError::InvalidProbability(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SweepInfidelity(a) => run_experiment(&a, Kind::Infidelity),
        Command::SweepCost(a) => run_experiment(&a, Kind::Cost),
        Command::Estimate(a) => run_experiment(&a, Kind::Estimate),
        Command::Exact(a) => run_experiment(&a, Kind::Exact),
        Command::Codes { format } => print_codes(format.unwrap_or_default()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
