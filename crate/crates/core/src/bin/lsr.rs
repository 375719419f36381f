use clap::Parser;
use lsr_core::cli::{exit_code, run, Cli};
use std::io::Write;

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
        }
        Err(e) => {
            eprintln!("lsr: {} error: {e}", e.category());
            std::process::exit(exit_code(&e));
        }
    }
}
