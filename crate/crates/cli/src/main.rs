//! `rlgame`: the command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage error, 3 I/O or model
//! file error, 4 numeric failure during learning.

mod args;
mod commands;
mod config;
mod manifest;

use std::ffi::OsString;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

/// Parses arguments; a repeated flag overrides its earlier occurrences.
pub fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let mut cmd = Cli::command().args_override_self(true);
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let matches = cmd.try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::InitModel(a) => commands::init_model(a),
        Command::Selfplay(a) => commands::selfplay(a),
        Command::Tutor(a) => commands::tutor(a),
        Command::Compare(a) => commands::compare(a),
        Command::Tournament(a) => commands::tournament(a),
        Command::Report(a) => commands::report(a),
        Command::Serve(a) => commands::serve(a),
        Command::Manifest(a) => manifest::run(a),
    }
}

fn run(argv: Vec<OsString>) -> i32 {
    let argv = match config::expand(argv) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}
