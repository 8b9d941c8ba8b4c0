use std::process::ExitCode;

use clap::Parser;
use graffmatch::cli::{run, Cli, EXIT_INPUT, EXIT_OK};

fn main() -> ExitCode {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            // Exit code 2 is reserved for failed verification.
            ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK })
        }
    }
}
