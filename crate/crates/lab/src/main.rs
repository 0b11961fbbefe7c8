use std::process::ExitCode;

use aleph_lab::cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = run(&cli);
    let text = report.to_json_string();
    print!("{text}");
    if let Some(path) = &cli.json_out {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(report.outcome.exit_code() as u8)
}
