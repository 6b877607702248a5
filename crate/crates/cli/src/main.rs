use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = gpig_cli::Cli::parse();
    let result = gpig_cli::run(&cli);
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    gpig_cli::exit_code(&result)
}
