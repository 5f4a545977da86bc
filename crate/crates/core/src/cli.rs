//! `janus` command line: run scenarios, calibrate currents, analyze range
//! streams and optimize discovery parameters.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{
    contact_days, cumulative_exposure, dyad_stats, extract_contacts, participants, read_samples, write_contacts,
    write_dyads, write_exposure, AnalysisError, Band, ContactParams, DayWindow,
};
use crate::discovery::{optimize, OptimizeError};
use crate::energy::{calibrate, reference_duty_cycles, Battery, CalibrationReport, CurrentTable, EnergyError, BASELINE_MA};
use crate::sim::output::{input_hash, write_manifest, RunManifest, MANIFEST_SCHEMA};
use crate::sim::{run, Scenario, ScenarioError};
use crate::time::Span;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

pub const CONTACTS_CSV: &str = "contacts.csv";
pub const DYADS_CSV: &str = "dyads.csv";
pub const EXPOSURE_CSV: &str = "exposure.csv";

#[derive(Debug, Parser)]
#[command(name = "janus", version, about = "Dual-radio contact detection simulator and analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write CSV outputs plus a manifest.
    Run(RunArgs),
    /// Fit state currents to the reference measurements.
    Calibrate(CalibrateArgs),
    /// Extract contacts, dyads and exposure from a range CSV.
    Analyze(AnalyzeArgs),
    /// Pick scan length and advertisement interval for a latency target.
    Optimize(OptimizeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Runs seeds seed, seed+1, ... into out/seed-<n>/.
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Current table JSON (a calibration report or a bare table).
    #[arg(long)]
    pub currents: Option<PathBuf>,
    #[arg(long, default_value_t = crate::energy::DEFAULT_CAPACITY_MAH)]
    pub capacity_mah: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = BASELINE_MA)]
    pub baseline_ma: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub samples: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub open_threshold_m: f64,
    #[arg(long, default_value_t = 0.2)]
    pub tolerance_m: f64,
    #[arg(long, default_value_t = 90.0)]
    pub close_gap_s: f64,
    /// Time credited per sample in the exposure histogram.
    #[arg(long, default_value_t = 15.0)]
    pub period_s: f64,
    /// Exposure band edges, meters; the last band is open-ended.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 2.0, 4.0])]
    pub bands: Vec<f64>,
    /// Population for the possible-dyad count; defaults to the nodes seen.
    #[arg(long)]
    pub population: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub latency_s: f64,
    #[arg(long, default_value_t = 1)]
    pub density: u32,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Infeasible(EnergyError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) | CliError::Analysis(_) | CliError::Input(_) => EXIT_INPUT,
            CliError::Io { .. } => EXIT_IO,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn secs(s: f64, what: &str) -> Result<Span, CliError> {
    if !(s.is_finite() && s >= 0.0) {
        return Err(CliError::Input(format!("{what} must be a non-negative number of seconds")));
    }
    Ok(Span::from_nanos((s * 1e9).round() as u64))
}

/// Reads a current table from a calibration report or a bare table.
pub fn load_currents(path: &Path) -> Result<CurrentTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let table = match serde_json::from_str::<CalibrationReport>(&text) {
        Ok(r) => r.table,
        Err(_) => serde_json::from_str::<CurrentTable>(&text)
            .map_err(|e| CliError::Input(format!("{}: not a current table: {e}", path.display())))?,
    };
    if !table.is_valid() {
        return Err(CliError::Input(format!("{}: currents must be non-negative", path.display())));
    }
    Ok(table)
}

pub fn cmd_run(args: &RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let bytes = std::fs::read(&args.scenario)
        .map_err(|source| ScenarioError::Io { path: args.scenario.display().to_string(), source })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Input(format!("scenario is not UTF-8: {e}")))?;
    let base = Scenario::from_json(&text)?;
    let table = match &args.currents {
        Some(p) => load_currents(p)?,
        None => CurrentTable::default(),
    };
    if !(args.capacity_mah > 0.0) {
        return Err(CliError::Input("--capacity-mah must be positive".into()));
    }
    if args.replicates == 0 {
        return Err(CliError::Input("--replicates must be at least 1".into()));
    }
    let battery = Battery { capacity_mah: args.capacity_mah };
    let first = args.seed.unwrap_or(base.seed);
    let seeds: Vec<u64> = (0..args.replicates).map(|k| first.wrapping_add(k)).collect();

    let one = |seed: u64| -> Result<PathBuf, CliError> {
        let dir = if args.replicates == 1 { args.out.clone() } else { args.out.join(format!("seed-{seed}")) };
        let scenario = Scenario { seed, ..base.clone() };
        let out = run(&scenario)?;
        let outputs = out.write_csvs(&dir, &table, battery).map_err(io_err(&dir))?;
        let manifest = RunManifest {
            schema_version: MANIFEST_SCHEMA,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: args.scenario.display().to_string(),
            seed,
            config_hash: input_hash(&bytes, seed, &table),
            outputs,
        };
        write_manifest(&dir, &manifest).map_err(io_err(&dir))?;
        Ok(dir)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(format!("--jobs: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| one(s)).collect())
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<CalibrationReport, CliError> {
    if !(args.baseline_ma >= 0.0) {
        return Err(CliError::Input("--baseline-ma must be non-negative".into()));
    }
    let cases = reference_duty_cycles();
    let report = calibrate(&cases, args.baseline_ma).map_err(CliError::Infeasible)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&args.out, text + "\n").map_err(io_err(&args.out))?;
    Ok(report)
}

fn bands_from_edges(edges: &[f64]) -> Result<Vec<Band>, CliError> {
    if edges.is_empty() {
        return Err(CliError::Input("--bands needs at least one edge".into()));
    }
    let mut bands: Vec<Band> = edges.windows(2).map(|w| Band { lo: w[0], hi: w[1] }).collect();
    bands.push(Band { lo: edges[edges.len() - 1], hi: f64::INFINITY });
    Ok(bands)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let file = File::open(&args.samples).map_err(|e| CliError::Input(format!("{}: {e}", args.samples.display())))?;
    let samples = read_samples(BufReader::new(file))?;
    let params = ContactParams {
        open_threshold_m: args.open_threshold_m,
        tolerance_m: args.tolerance_m,
        close_gap: secs(args.close_gap_s, "--close-gap-s")?,
    };
    let period = secs(args.period_s, "--period-s")?;
    let bands = bands_from_edges(&args.bands)?;

    let contacts = extract_contacts(&samples, &params);
    let nodes = participants(&samples);
    let population = args.population.unwrap_or(nodes.len());
    let days: Vec<_> = contact_days(&contacts)
        .into_iter()
        .map(|d| (d, dyad_stats(&contacts, population, Some(DayWindow::day(d)))))
        .collect();
    let exposures = nodes
        .iter()
        .map(|&n| cumulative_exposure(&samples, n, period, &bands))
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> csv::Result<()>| -> Result<(), CliError> {
        let path = args.out.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        f(&mut w).map_err(|e| CliError::Io { path: path.display().to_string(), source: std::io::Error::other(e) })?;
        w.flush().map_err(io_err(&path))
    };
    write(CONTACTS_CSV, &|w| write_contacts(w, &contacts))?;
    write(DYADS_CSV, &|w| write_dyads(w, &days))?;
    write(EXPOSURE_CSV, &|w| write_exposure(w, &exposures))?;
    Ok(())
}

pub fn cmd_optimize(args: &OptimizeArgs) -> Result<String, CliError> {
    let latency = secs(args.latency_s, "--latency-s")?;
    let schedule = optimize(latency, args.density).map_err(|e: OptimizeError| CliError::Input(e.to_string()))?;
    let text = serde_json::to_string_pretty(&schedule).expect("schedule serializes") + "\n";
    if let Some(p) = &args.out {
        std::fs::write(p, &text).map_err(io_err(p))?;
    }
    Ok(text)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => {
            for dir in cmd_run(a)? {
                eprintln!("wrote {}", dir.display());
            }
        }
        Command::Calibrate(a) => {
            let r = cmd_calibrate(a)?;
            let worst = r.worst().expect("six cases");
            eprintln!("worst case {} at {:.2}% error; wrote {}", worst.case, worst.relative_error * 100.0, a.out.display());
        }
        Command::Analyze(a) => cmd_analyze(a)?,
        Command::Optimize(a) => {
            let text = cmd_optimize(a)?;
            if a.out.is_none() {
                print!("{text}");
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("janus: {e}");
            e.exit_code()
        }
    }
}
