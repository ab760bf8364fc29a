//! `bbdoa`: simulate array records, estimate directions, build bearing-time
//! records, run Monte Carlo benches and evaluate cable sensitivity.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bbdoa_core::cable::CableConfig;
use bbdoa_core::io::{
    bench_timing_csv, gnuplot_script, load_config, load_record, save_record, save_table, write_text, Manifest,
    PlotKind, RecordFormat,
};
use bbdoa_core::montecarlo::trial_record;
use bbdoa_core::{preset, rng, run_monte_carlo, AngleConvention, Error, EstimatorKind, ProcessingConfig, ScenarioConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bbdoa", version, about = "Broadband direction-of-arrival toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one trial of a scenario and write the array record.
    Simulate(SimulateArgs),
    /// Estimate source directions in a record; writes the spectrum table.
    Estimate(ProcessArgs),
    /// Build a bearing-time record from a time-domain record.
    Btr(ProcessArgs),
    /// Run a Monte Carlo accuracy and runtime bench.
    Bench(BenchArgs),
    /// Pressure sensitivity of a wound-fibre cable, in dB.
    CableSens(CableArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Scenario file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, replacing the scenario's.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match (&self.preset, &self.config) {
            (Some(name), _) => preset(name).map_err(as_config)?,
            (None, Some(path)) => load_config(path)?,
            (None, None) => unreachable!("clap requires one of --preset and --config"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Sweep point index, in table order.
    #[arg(long, default_value_t = 0)]
    point: usize,
    /// Trial index within the sweep point.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// SNR in dB, replacing the sweep point's.
    #[arg(long, allow_negative_numbers = true)]
    snr: Option<f64>,
    /// Output record; `.csv` selects the text format.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Broadside,
    Endfire,
}

#[derive(Args)]
struct ProcessArgs {
    /// Record to process (binary, or CSV with a .csv extension).
    record: PathBuf,
    /// Processing file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<EstimatorKind>,
    /// Number of sources.
    #[arg(long)]
    sources: Option<usize>,
    #[arg(long, value_enum)]
    convention: Option<Convention>,
    /// Grid step of the fixed-grid estimators, degrees.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Noise-term order of q-SPICE.
    #[arg(long)]
    q: Option<f64>,
    /// Final grid step of the refinement, degrees.
    #[arg(long)]
    target_step: Option<f64>,
    /// Output table.
    #[arg(long, short)]
    out: PathBuf,
}

impl ProcessArgs {
    fn load(&self) -> Result<ProcessingConfig, Error> {
        let mut cfg: ProcessingConfig = load_config(&self.config)?;
        if let Some(kind) = self.estimator {
            cfg.estimator = kind;
        }
        if let Some(k) = self.sources {
            cfg.sources = k;
        }
        if let Some(c) = self.convention {
            cfg.convention = match c {
                Convention::Broadside => AngleConvention::Broadside,
                Convention::Endfire => AngleConvention::Endfire,
            };
        }
        if let Some(step) = self.grid_step {
            cfg.settings.grid_step = step;
            cfg.settings.refine.initial_step = step;
        }
        if let Some(q) = self.q {
            cfg.settings.solver.q = q;
        }
        if let Some(step) = self.target_step {
            cfg.settings.refine.target_step = step;
        }
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Trials per sweep point, replacing the scenario's.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; all cores when absent.
    #[arg(long, env = "BBDOA_JOBS")]
    jobs: Option<usize>,
    /// Directory for the accuracy table, timing table and plot script.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CableArgs {
    /// Cable file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Invalid values found while checking a configuration are configuration
/// errors, whatever layer reported them.
fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(msg) | Error::Unsupported(msg) => Error::Config(msg),
        other => other,
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::InvalidArgument(_) | Error::DegenerateInput(_) | Error::Parse { .. } | Error::Io { .. } => 3,
        Error::Estimator(_) | Error::Unsupported(_) | Error::UndefinedSensitivity(_) => 4,
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Error> {
    let cfg = args.scenario.load()?;
    cfg.validate()?;
    let points = cfg.points();
    let mut point = *points.get(args.point).ok_or_else(|| {
        Error::Config(format!("sweep point {} out of range (scenario has {})", args.point, points.len()))
    })?;
    if let Some(snr) = args.snr {
        point.snr_db = snr;
    }
    let seed = rng::derive(cfg.seed, &[args.point as u64, args.trial as u64]);
    let (_, syn) = trial_record(&cfg, &point, seed)?;
    save_record(&syn.record, &args.out, RecordFormat::from_path(&args.out))?;
    println!(
        "wrote {}: {} channels x {} samples",
        args.out.display(),
        syn.record.channels(),
        syn.record.samples()
    );
    println!("truth_deg = {}", join(&syn.truth_deg));
    println!("snr_db = {} seed = {seed}", point.snr_db);
    Ok(())
}

fn estimate(args: &ProcessArgs) -> Result<(), Error> {
    let cfg = args.load()?;
    let record = load_record(&args.record, RecordFormat::from_path(&args.record))?;
    let est = cfg.estimate(&record)?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seed: 0,
        estimator: cfg.estimator.to_string(),
    };
    save_table(&est.spectrum, &manifest, &args.out)?;
    write_plot(&args.out, PlotKind::Spectrum)?;
    println!("angles_deg = {}", join(&est.angles));
    if est.shortfall {
        eprintln!("warning: fewer than {} peaks found", cfg.sources);
    }
    Ok(())
}

fn btr(args: &ProcessArgs) -> Result<(), Error> {
    let cfg = args.load()?;
    let record = load_record(&args.record, RecordFormat::from_path(&args.record))?;
    let out = cfg.btr(&record)?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seed: 0,
        estimator: cfg.estimator.to_string(),
    };
    save_table(&out, &manifest, &args.out)?;
    write_plot(&args.out, PlotKind::Btr)?;
    println!("{} frames x {} angles -> {}", out.times.len(), out.angles.len(), args.out.display());
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<(), Error> {
    let mut cfg = args.scenario.load()?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if args.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let result = run_monte_carlo(&cfg, args.jobs)?;
    let manifest = Manifest {
        config_hash: result.config_hash.clone(),
        seed: result.seed,
        estimator: cfg.estimators.iter().map(|k| k.name()).collect::<Vec<_>>().join("+"),
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    let accuracy = args.out_dir.join(format!("{}.csv", cfg.name));
    save_table(&result, &manifest, &accuracy)?;
    write_text(
        &args.out_dir.join(format!("{}_timing.csv", cfg.name)),
        &bench_timing_csv(&result, &manifest),
    )?;
    write_plot(&accuracy, PlotKind::Bench)?;
    println!("{:<12} {:>8} {:>10} {:>10} {:>9}", "estimator", "snr_db", "rmse_deg", "success%", "time_s");
    for r in &result.rows {
        println!(
            "{:<12} {:>8} {:>10.4} {:>10.1} {:>9.2e}",
            r.estimator.name(),
            r.point.snr_db,
            r.rmse_deg,
            r.success_pct,
            r.mean_runtime_s
        );
    }
    println!("wrote {}", accuracy.display());
    Ok(())
}

fn cable_sens(args: &CableArgs) -> Result<(), Error> {
    let cfg: CableConfig = load_config(&args.config)?;
    cfg.mandrel.validate().map_err(as_config)?;
    cfg.fiber.validate().map_err(as_config)?;
    println!("{:.4} dB re 1 rad/(uPa m)", cfg.sensitivity_db()?);
    Ok(())
}

/// Gnuplot script next to `table`, same stem.
fn write_plot(table: &Path, kind: PlotKind) -> Result<(), Error> {
    let name = table.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    write_text(&table.with_extension("gp"), &gnuplot_script(kind, &name))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Btr(a) => btr(a),
        Command::Bench(a) => bench(a),
        Command::CableSens(a) => cable_sens(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
