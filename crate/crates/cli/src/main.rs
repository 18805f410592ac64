use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use oatforge_cli::{run, Cli, EXIT_USER};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli.command) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) => {
            let _ = std::io::stdout().write_all(f.stdout.as_bytes());
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}
