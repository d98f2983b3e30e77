//! Command-line front end: `classify`, `construct`, `verify`.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use config::{parse_grid, Format, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const THREADS_ENV: &str = "LOOPFLAT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "loopflat", version, about = "Loop-group constructions of reflective-submanifold deformations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Existence verdicts from the rank obstruction.
    Classify(RunArgs),
    /// Seed, lift, project and report.
    Construct(RunArgs),
    /// Re-run the invariant battery on a frame dump.
    Verify {
        dump: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub case: Option<String>,
    /// JSON file, or inline JSON starting with '{'.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long = "lambda", allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// L,h or L,h,r
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub force: bool,
}

impl RunArgs {
    /// Config file (if any) overridden by flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(c) if c.trim_start().starts_with('{') => RunConfig::from_json(c)?,
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{path}: {e}")))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(c) = &self.case {
            cfg.case = c.clone();
        }
        if !self.lambda.is_empty() {
            cfg.lambdas = self.lambda.clone();
        }
        if let Some(g) = &self.grid {
            cfg.grid = parse_grid(g)?;
        }
        if let Some(d) = self.degree {
            cfg.degree = d;
        }
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = Some(o.to_string_lossy().into_owned());
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        cfg.force |= self.force;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Parse(_) | Error::Io(_) | Error::Obstruction { .. } | Error::Domain { .. } => EXIT_CONFIG,
        Error::Validation(_) => EXIT_VERIFY,
        _ => EXIT_NUMERIC,
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    init_threads()?;
    match &cli.command {
        Command::Classify(a) => commands::classify(&a.resolve()?, a.case.as_deref()),
        Command::Construct(a) => commands::construct_cmd(&a.resolve()?),
        Command::Verify { dump, args } => {
            let cfg = args.resolve()?;
            let tol = args.config.is_some().then_some(&cfg.tolerances);
            commands::verify_cmd(dump, &cfg, tol)
        }
    }
}

/// Parse arguments, run, and map errors to exit codes.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
