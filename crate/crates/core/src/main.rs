use clap::Parser;
use qgends::cli::{configure_threads, error_json, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("{}", error_json(&e));
        std::process::exit(e.exit_code());
    }
    std::process::exit(run(&cli));
}
