//! `hyptree` experiment runner.

mod args;
mod artifacts;
mod commands;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::artifacts::{clear_markers, write_failure, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    ExitCode::from(run(&cli.command, &cli.out_dir))
}

fn run(command: &Command, out_dir: &Path) -> u8 {
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return CliError::Io(e.to_string()).exit_code();
    }
    if let Err(e) = clear_markers(out_dir) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    match commands::execute(command, out_dir) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Err(w) = write_failure(out_dir, command, &e) {
                eprintln!("error: could not write failure marker: {w}");
            }
            e.exit_code()
        }
    }
}
