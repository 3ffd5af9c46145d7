//! Command-line front end. Flags override the fields of an optional JSON
//! configuration file; the resolved configuration is embedded in every
//! report.
//!
//! Exit status: 0 success, 1 runtime failure, 2 incompatible conversion,
//! 3 resonance-refused uniqueness probe, 4 configuration or usage error.

pub mod commands;
pub mod config;
pub mod json;

pub use commands::{Outcome, EXIT_CONFIG, EXIT_FAILURE, EXIT_INCOMPATIBLE, EXIT_OK, EXIT_RESONANT};
pub use config::{DensityInput, RunConfig};

use crate::convert::ConversionMode;
use crate::error::{Error, Result};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LAYERCONV_THREADS";

#[derive(Debug, Parser)]
#[command(name = "layerconv", version, about = "Convert between Helmholtz double-layer and single-layer potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// sphere:R, ellipsoid:a,b,c or star:base,(l,m,c),...
    #[arg(long)]
    pub surface: Option<String>,
    /// Wavenumber
    #[arg(long)]
    pub k: Option<f64>,
    /// Grid resolution (number of polar nodes)
    #[arg(long)]
    pub res: Option<usize>,
    /// Seed for random densities
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report file (standard output when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add wall-clock timings to the report
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// dl2sl-int, sl2dl-int, dl2sl-ext or sl2dl-ext
    #[arg(long)]
    pub mode: Option<String>,
    /// harmonics:[(l,m,c),...], random:SEED[:LMAX] or csv:PATH
    #[arg(long)]
    pub density: Option<String>,
    /// Null-space threshold relative to the largest singular value
    #[arg(long)]
    pub null_threshold: Option<f64>,
    /// Compatibility tolerance relative to the right-hand side
    #[arg(long)]
    pub compat_tol: Option<f64>,
    /// Tolerance on the field-equality error
    #[arg(long)]
    pub verify_tol: Option<f64>,
    /// Solve through the factor B and Q0 instead of Q directly
    #[arg(long)]
    pub factorized: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble operators, report invariant diagnostics, optionally dump matrices
    Assemble {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated operators: Q, A, Aprime, Q0, Q1, B
        #[arg(long)]
        operator: Option<String>,
        /// Directory for binary matrix dumps
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Convert a density between layer representations
    Convert {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Also solve at a second resolution and by LU to witness uniqueness
        #[arg(long)]
        uniqueness_probe: bool,
    },
    /// Recompute the field-equality error of a stored conversion report
    Verify {
        /// Conversion report written by `convert`
        #[arg(long)]
        report: PathBuf,
        /// Tolerance on the recomputed error
        #[arg(long)]
        verify_tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timings: bool,
    },
    /// Locate resonant wavenumbers and confirm them by singular-value dips
    ResonanceScan {
        #[command(flatten)]
        common: CommonArgs,
        /// a:b
        #[arg(long)]
        k_range: Option<String>,
        /// Wavenumber offset of the dip comparison
        #[arg(long, default_value_t = 0.2)]
        dip_offset: f64,
        /// Profile step on surfaces without an oracle
        #[arg(long, default_value_t = 0.05)]
        k_step: f64,
    },
    /// Run a conversion over a resolution ladder and write a CSV table
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Comma-separated resolutions
        #[arg(long)]
        ladder: Option<String>,
    },
    /// Weighted singular values of one operator (B − I for the factor B)
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        operator: Option<String>,
    },
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut c = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &common.surface {
        c.surface = config::parse_surface(s)?;
    }
    if let Some(k) = common.k {
        c.k = k;
    }
    if let Some(r) = common.res {
        c.resolution = r;
    }
    if let Some(seed) = common.seed {
        c.seed = seed;
    }
    if let Some(out) = &common.out {
        c.output = Some(out.clone());
    }
    Ok(c)
}

fn apply_solve(c: &mut RunConfig, solve: &SolveArgs) -> Result<()> {
    if let Some(m) = &solve.mode {
        c.mode = Some(ConversionMode::parse(m).map_err(config::config_error)?);
    }
    if let Some(d) = &solve.density {
        c.density = Some(config::parse_density(d)?);
    }
    if let Some(v) = solve.null_threshold {
        c.null_threshold = v;
    }
    if let Some(v) = solve.compat_tol {
        c.compat_tol = v;
    }
    if let Some(v) = solve.verify_tol {
        c.verify_tol = v;
    }
    c.factorized |= solve.factorized;
    Ok(())
}

/// Run a parsed command. Returns the report text, its destination and the
/// exit status.
pub fn execute(command: &Command) -> Result<(Outcome, Option<PathBuf>)> {
    let resolved = |c: RunConfig| -> Result<RunConfig> {
        c.validate()?;
        Ok(c)
    };
    match command {
        Command::Assemble { common, operator, dump } => {
            let mut c = base_config(common)?;
            if let Some(ops) = operator {
                c.operators = config::parse_operators(ops)?;
            }
            let c = resolved(c)?;
            Ok((commands::assemble_cmd(&c, dump.as_deref(), common.timings)?, c.output))
        }
        Command::Convert { common, solve, uniqueness_probe } => {
            let mut c = base_config(common)?;
            apply_solve(&mut c, solve)?;
            let c = resolved(c)?;
            Ok((commands::convert_cmd(&c, *uniqueness_probe, common.timings)?, c.output))
        }
        Command::Verify { report, verify_tol, out, timings } => {
            Ok((commands::verify_cmd(report, *verify_tol, *timings)?, out.clone()))
        }
        Command::ResonanceScan { common, k_range, dip_offset, k_step } => {
            let mut c = base_config(common)?;
            if let Some(r) = k_range {
                c.k_range = Some(config::parse_k_range(r)?);
            }
            let c = resolved(c)?;
            Ok((commands::resonance_scan_cmd(&c, *dip_offset, *k_step, common.timings)?, c.output))
        }
        Command::Convergence { common, solve, ladder } => {
            let mut c = base_config(common)?;
            apply_solve(&mut c, solve)?;
            if let Some(l) = ladder {
                c.resolutions = config::parse_ladder(l)?;
            }
            let c = resolved(c)?;
            Ok((commands::convergence_cmd(&c, common.timings)?, c.output))
        }
        Command::Spectrum { common, operator } => {
            let mut c = base_config(common)?;
            if let Some(op) = operator {
                c.operators = config::parse_operators(op)?;
            }
            let c = resolved(c)?;
            Ok((commands::spectrum_cmd(&c, common.timings)?, c.output))
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::InvalidShape(_) => EXIT_CONFIG,
        Error::Resonant { .. } => EXIT_RESONANT,
        _ => EXIT_FAILURE,
    }
}

/// Apply `LAYERCONV_THREADS` to the rayon pool used by assembly and
/// evaluation. Dense factorizations run sequentially: their blocking depends
/// on the thread count, and reports must not.
pub fn configure_threads() -> Result<()> {
    faer::set_global_parallelism(faer::Par::Seq);
    let raw = match std::env::var(THREADS_ENV) {
        Ok(raw) if !raw.trim().is_empty() => raw,
        _ => return Ok(()),
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("rayon pool already initialised");
    }
    Ok(())
}

/// Parse arguments, run, write the report and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match execute(&cli.command) {
        Ok((outcome, dest)) => {
            let written = match dest {
                Some(path) => std::fs::write(&path, &outcome.text),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(outcome.text.as_bytes())
                }
            };
            if let Err(e) = written {
                eprintln!("error: cannot write report: {e}");
                return EXIT_FAILURE;
            }
            outcome.status
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
