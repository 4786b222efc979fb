use std::process::ExitCode;

use clap::Parser;
use fracbn::cli::Cli;
use fracbn::output::Manifest;
use fracbn::run::{run, write_manifest};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let manifest = match cli.resolve() {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let mut m = Manifest {
                command: cli.command.map(|c| c.name().to_string()).unwrap_or_default(),
                status: e.kind().into(),
                exit_code: e.exit_code(),
                message: Some(e.to_string()),
                ..Manifest::default()
            };
            write_manifest(&cli.fallback_out_dir(), &mut m);
            m
        }
    };
    if let Some(msg) = &manifest.message {
        eprintln!("fracbn: {}: {msg}", manifest.status);
    }
    ExitCode::from(manifest.exit_code as u8)
}
