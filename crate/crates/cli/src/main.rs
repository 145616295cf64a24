use std::io;
use std::process::ExitCode;

use clap::Parser;

use safezone_cli::app::{run, Cli};
use safezone_cli::exit;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli, &mut io::stdout().lock()) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
