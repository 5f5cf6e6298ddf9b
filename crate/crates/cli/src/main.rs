use std::process::ExitCode;

use clap::Parser;
use expcli::cli::{execute, Cli};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(manifest) => {
            for note in &manifest.notes {
                eprintln!("note: {note}");
            }
            eprintln!("{}: {} ({} files)", manifest.kind, manifest.status.name(), manifest.outputs.len());
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
