use std::process::ExitCode;

use clap::Parser;
use roughlab_cli::{run, Cli, EXIT_INPUT_ERROR};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT_ERROR);
        }
    };
    ExitCode::from(run(&cli))
}
