use std::process::ExitCode;

use clap::Parser;
use fracevo::config::Cli;

fn main() -> ExitCode {
    match fracevo::run(Cli::parse()) {
        Ok(manifest) => {
            eprintln!("wrote {}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (code, msg) = fracevo::describe(&e);
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}
