//! The `kflow` command line: run configuration, commands and reports.

pub mod commands;
pub mod config;
pub mod report;

use commands::{run_command, Command, Output, RunError};
use config::RunConfig;
use std::path::{Path, PathBuf};

/// Parsed command-line invocation.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Caps the global thread pool at `KFLOW_THREADS` when set.
pub fn configure_threads() -> Result<(), RunError> {
    let Ok(v) = std::env::var("KFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        RunError::Config(config::ConfigError(format!("KFLOW_THREADS must be a positive integer, got {v:?}")))
    })?;
    // a pool built earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Loads the config, applies flag overrides and runs the command.
pub fn execute(inv: &Invocation) -> Result<report::Report, RunError> {
    let mut cfg = RunConfig::load(&inv.config)?;
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    let out_dir = inv.out.as_deref();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Output(format!("{}: {e}", dir.display())))?;
    }
    let report = run_command(inv.command, &cfg, &Output { dir: out_dir })?;
    let dir = out_dir.unwrap_or(Path::new("."));
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json()).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?;
    Ok(report)
}

/// Runs an invocation and returns the process exit code.
pub fn main_with(inv: &Invocation) -> i32 {
    if let Err(e) = configure_threads() {
        eprintln!("kflow: {e}");
        return e.exit_code();
    }
    match execute(inv) {
        Ok(report) => {
            print!("{}", report.summary());
            if report.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("kflow: {e}");
            e.exit_code()
        }
    }
}
