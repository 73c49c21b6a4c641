//! Command-line front end for the harmonic-balance core: configuration,
//! job scheduling and CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod io;
pub mod output;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use config::RunConfig;

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Trace,
    Timesim,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Sweep => "sweep",
            Self::Trace => "trace",
            Self::Timesim => "timesim",
            Self::Compare => "compare",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 for configuration and I/O problems, 2 for
    /// numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => 2,
            Self::Config(_) | Self::Io { .. } => 1,
        }
    }
}

impl From<hbad_core::Error> for CliError {
    fn from(e: hbad_core::Error) -> Self {
        match e {
            hbad_core::Error::Config(m) => Self::Config(m),
            other => Self::Numerical(other.to_string()),
        }
    }
}

/// Result of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub index: usize,
    pub dir: PathBuf,
    /// `false` when the job ran but its solve or branch did not converge.
    pub converged: bool,
    pub summary: String,
}

/// Runs `command` for every job of `config` (one per variant, or a single
/// job without variants) on at most `jobs` threads. Every job's
/// configuration is validated before any job starts.
pub fn run(command: Command, config: &RunConfig, out: &Path, jobs: usize) -> Result<Vec<JobOutcome>, CliError> {
    config.validate()?;
    io::create_dir(out)?;
    let count = config.job_count();
    let dirs: Vec<PathBuf> = if config.variants.is_empty() {
        vec![out.to_path_buf()]
    } else {
        (0..count).map(|i| out.join(format!("job_{i:02}"))).collect()
    };
    for d in &dirs {
        io::create_dir(d)?;
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<JobOutcome, CliError>>>> = Mutex::new((0..count).map(|_| None).collect());
    let workers = jobs.clamp(1, count);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                log::info!("{} job {i} -> {}", command.name(), dirs[i].display());
                let r = commands::run_job(command, config, i, &dirs[i]);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("result lock");
    let mut outcomes = Vec::with_capacity(count);
    let mut first_err = None;
    for r in results.into_iter().map(|r| r.expect("every job ran")) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::error!("{e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    if !config.variants.is_empty() {
        output::write_job_index(out, command, config, &outcomes)?;
    }
    Ok(outcomes)
}
