use std::process::ExitCode;

use clap::Parser;
use qkernel_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qkernel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
