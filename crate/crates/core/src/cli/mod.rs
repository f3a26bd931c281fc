//! Batch front end. Every command reads and writes plain files; exit codes are
//! 0 on success, 2 for input or configuration errors, 3 when the data fail a
//! precondition and 4 when a simulation diverges.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

pub use commands::{run_pipeline, RunReport};
pub use config::RunConfig;

use crate::dynamics::{fixture, spectral_radius, FixtureId};
use crate::error::{Error, Result};
use crate::io::{format_matrix_text, model_to_json, read_csv, read_model, write_text};
use commands::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::NotFound(_) | Error::Io { .. } | Error::Parse(_) | Error::Config(_) | Error::InvalidInput(_) => EXIT_INPUT,
        Error::NonFiniteState { .. } => EXIT_DIVERGED,
        Error::ZeroVariance { .. }
        | Error::LagOutOfRange { .. }
        | Error::InsufficientData(_)
        | Error::WindowTooSmall { .. }
        | Error::LengthMismatch { .. }
        | Error::DegenerateSegment(_)
        | Error::RankDeficient { .. }
        | Error::OverflowUnsafe { .. }
        | Error::NoScalingRegion
        | Error::ChannelMismatch { .. } => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(name = "attractor-recon", version, about = "Reconstruct forced linear state-space models from chaotic time series")]
pub struct Cli {
    /// Random seed for the genetic search (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for all written artifacts (overrides the config).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set ga.population=32`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Choose delay and dimension and write the delay embedding with diagnostics.
    Embed(EmbedArgs),
    /// Search for transforms between attractor segments and recommend a basis.
    Symmetry(SymmetryArgs),
    /// Fit A, B and C for the recommended forcing basis.
    Identify(IdentifyArgs),
    /// Iterate a model and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Compare a model against a reference record.
    Validate(ValidateArgs),
    /// Run every stage from a config file and write a run report.
    Pipeline(PipelineArgs),
    /// List the bundled published models, or dump them as model JSON.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Input CSV (one column per channel).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub channel: Option<usize>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SymmetryArgs {
    /// `embedding.json` written by `embed`.
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    /// `symmetry.json` written by `symmetry`.
    #[arg(long)]
    pub symmetry: PathBuf,
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Comma-separated source channels to fit as outputs.
    #[arg(long)]
    pub outputs: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "fixture")]
    pub model: Option<PathBuf>,
    /// Bundled fixture name (see `fixtures`).
    #[arg(long)]
    pub fixture: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Comma-separated initial state; zeros by default.
    #[arg(long)]
    pub x0: Option<String>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "trajectory.csv")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Sampling interval of the reference; defaults to the model's.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Config file; may also be given with the global `--config`.
    pub config_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    /// Write model JSON and matrix files for every fixture into the output directory.
    #[arg(long)]
    pub dump: bool,
    /// Restrict to one fixture.
    #[arg(long)]
    pub name: Option<String>,
}

fn base_config(cli: &Cli, path: Option<&Path>) -> Result<RunConfig> {
    let mut config = match path.or(cli.config.as_deref()) {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        let abs = std::path::absolute(dir).map_err(|e| Error::io(dir, e))?;
        config.out_dir = abs.display().to_string();
    }
    config.check()?;
    Ok(config)
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad {what} entry {v:?}"))))
        .collect()
}

fn cmd_embed(cli: &Cli, args: &EmbedArgs) -> Result<()> {
    let mut config = base_config(cli, None)?;
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(c) = args.channel {
        config.channel = c;
    }
    config.embedding.tau = args.tau.or(config.embedding.tau);
    config.embedding.m = args.m.or(config.embedding.m);
    config.check()?;
    let input = match &args.input {
        Some(p) => p.clone(),
        None => config.input_path()?,
    };
    let series = read_csv(&input, config.dt)?;
    let stage = stage_embed(&series, &config)?;
    let out = config.out_dir();
    write_embed_artifacts(&stage, &series, &out)?;
    let s = &stage.summary;
    println!("tau = {} ({}), m = {} ({}), {} states -> {}", s.tau, s.tau_method, s.m, s.m_method, s.states, out.display());
    for w in &s.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

fn cmd_symmetry(cli: &Cli, args: &SymmetryArgs) -> Result<()> {
    let mut config = base_config(cli, None)?;
    config.ga.window = args.window.or(config.ga.window);
    config.ga.stride = args.stride.or(config.ga.stride);
    config.check()?;
    let (_, embedding) = load_embedding(&args.embedding)?;
    let file = stage_symmetry(&embedding, &config)?;
    let path = config.out_dir().join("symmetry.json");
    write_text(&path, &commands::report_json(&file))?;
    let r = &file.report;
    println!(
        "{} segments, {} accepted of {} evaluated; dominant {:?} -> {}",
        file.segments,
        r.transforms.len(),
        file.evaluations,
        r.dominant_class,
        path.display()
    );
    Ok(())
}

fn cmd_identify(cli: &Cli, args: &IdentifyArgs) -> Result<()> {
    let mut config = base_config(cli, None)?;
    if let Some(r) = args.ridge {
        config.identify.ridge = r;
    }
    if let Some(o) = &args.outputs {
        config.set("output_channels", o)?;
    }
    let (file, embedding) = load_embedding(&args.embedding)?;
    config.channel = file.channel;
    config.check()?;
    let symmetry = read_symmetry(&args.symmetry)?;
    let (fitted, summary) = stage_identify(&embedding, &file.series, &symmetry, &config)?;
    let out = config.out_dir();
    write_text(&out.join("model.json"), &model_to_json(&fitted.model))?;
    write_text(&out.join("fit.json"), &commands::report_json(&summary))?;
    println!(
        "n = {}, p = {}, q = {}, one-step NRMSE {:?}, rho(A) = {:.6} -> {}",
        summary.n,
        summary.p,
        summary.q,
        summary.report.one_step_nrmse,
        summary.spectral_radius,
        out.join("model.json").display()
    );
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let config = base_config(cli, None)?;
    let model = load_model_or_fixture(args.model.as_deref(), args.fixture.as_deref())?;
    let x0 = match &args.x0 {
        Some(text) => {
            let v = parse_vector(text, "x0")?;
            if v.len() != model.n() {
                return Err(Error::InvalidInput(format!("x0 has {} entries, model state has {}", v.len(), model.n())));
            }
            DVector::from_vec(v)
        }
        None => DVector::zeros(model.n()),
    };
    let sim = simulate_csv(&model, &x0, args.steps).inspect_err(|e| {
        if let Error::NonFiniteState { step } = e {
            eprintln!("diverged at step {step}; spectral radius of A = {}", spectral_radius(model.a()));
        }
    })?;
    let path = config.out_dir().join(&args.output);
    write_text(&path, &sim.csv)?;
    println!("{} steps, rho(A) = {} -> {}", args.steps, sim.spectral_radius, path.display());
    Ok(())
}

fn cmd_validate(cli: &Cli, args: &ValidateArgs) -> Result<()> {
    let config = base_config(cli, None)?;
    let model = read_model(&args.model)?;
    let dt = args.dt.unwrap_or(model.dt());
    let series = read_csv(&args.reference, dt)?;
    let report = stage_validate(&series, &model, &config)?;
    let path = config.out_dir().join("validation.json");
    write_text(&path, &commands::report_json(&report))?;
    let nrmse = |c: &crate::validate::Comparison| c.channels.iter().map(|c| c.nrmse).collect::<Vec<_>>();
    println!(
        "one-step NRMSE {:?}, free-run NRMSE {:?}, bounded {} -> {}",
        nrmse(&report.one_step),
        report.free_run.as_ref().map(nrmse),
        report.free_run_bounded,
        path.display()
    );
    match report.free_run_divergence_step {
        Some(step) => Err(Error::NonFiniteState { step }),
        None => Ok(()),
    }
}

fn cmd_pipeline(cli: &Cli, args: &PipelineArgs) -> Result<()> {
    if args.config_file.is_none() && cli.config.is_none() {
        return Err(Error::Config("pipeline needs a config file".into()));
    }
    let config = base_config(cli, args.config_file.as_deref())?;
    let result = run_pipeline(&config)?;
    let r = &result.report;
    println!(
        "tau = {}, m = {}, dominant {:?}, basis {} term(s), one-step NRMSE {:?}, bounded {}, dD2 {:?} -> {}",
        r.embedding.tau,
        r.embedding.m,
        r.symmetry.report.dominant_class,
        r.fit.p,
        r.fit.report.one_step_nrmse,
        r.validation.free_run_bounded,
        r.validation.correlation_dimension_delta,
        result.out_dir.join("report.json").display()
    );
    match r.validation.free_run_divergence_step {
        Some(step) => Err(Error::NonFiniteState { step }),
        None => Ok(()),
    }
}

fn cmd_fixtures(cli: &Cli, args: &FixturesArgs) -> Result<()> {
    let config = base_config(cli, None)?;
    let ids: Vec<FixtureId> = match &args.name {
        Some(name) => vec![FixtureId::from_name(name)?],
        None => FixtureId::ALL.to_vec(),
    };
    for id in ids {
        let f = fixture(id)?;
        let m = &f.model;
        println!("{:<24} n = {:<2} p = {} q = {} rho(A) = {:.10}", id.name(), m.n(), m.p(), m.q(), spectral_radius(m.a()));
        if args.dump {
            let dir = config.out_dir();
            write_text(&dir.join(format!("{}.json", id.name())), &model_to_json(m))?;
            for (label, matrix) in [("a", m.a()), ("b", m.b()), ("c", m.c())] {
                write_text(&dir.join(format!("{}_{label}.txt", id.name())), &format_matrix_text(matrix))?;
            }
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Embed(a) => cmd_embed(cli, a),
        Command::Symmetry(a) => cmd_symmetry(cli, a),
        Command::Identify(a) => cmd_identify(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Validate(a) => cmd_validate(cli, a),
        Command::Pipeline(a) => cmd_pipeline(cli, a),
        Command::Fixtures(a) => cmd_fixtures(cli, a),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
