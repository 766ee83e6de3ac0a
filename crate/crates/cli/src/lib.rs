//! Command-line surface: space files, versioned reports and one subcommand
//! per analysis.
//!
//! Exit codes: 0 success, 1 usage, 2 input or axiom failure, 3 failed
//! internal assertion.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::Cli;
pub use error::CliError;

/// Parses `argv` (program name first), runs the command and writes its report.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = commands::run(&cli).and_then(|outcome| {
        outcome.report.emit(cli.output.as_deref())?;
        Ok(outcome.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
