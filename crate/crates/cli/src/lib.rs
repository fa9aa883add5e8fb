//! The `percolab` command line.

pub mod args;
pub mod commands;
pub mod render;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use percolab::montecarlo::{Boundary, ExperimentKind};

use args::{Cli, Command};
use commands::{CliError, EXIT_INVALID};

/// Parses `argv` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return EXIT_INVALID;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    match dispatch(&cli.command, out, err) {
        Ok(()) => 0,
        Err(CliError { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> commands::CmdResult {
    use commands::experiment;
    match command {
        Command::Onearm {
            common,
            finite_only,
        } => experiment(
            ExperimentKind::OneArm,
            common,
            |s| s.finite_only = *finite_only,
            out,
            err,
        ),
        Command::DiamTail { common } => {
            experiment(ExperimentKind::DiamTail, common, |_| {}, out, err)
        }
        Command::RnScan {
            common,
            boundary,
            rho,
        } => experiment(
            ExperimentKind::RnScan,
            common,
            |s| {
                s.boundary = Boundary::from(*boundary);
                s.rho = *rho;
            },
            out,
            err,
        ),
        Command::RnCompare { common } => {
            experiment(ExperimentKind::RnCompare, common, |_| {}, out, err)
        }
        Command::Sn { common, rho } => {
            experiment(ExperimentKind::Sn, common, |s| s.rho = Some(*rho), out, err)
        }
        Command::Oracle(a) => commands::oracle(a, out, err),
        Command::Xi(a) => commands::xi(a, out, err),
        Command::Render(a) => commands::render(a, out, err),
    }
}
