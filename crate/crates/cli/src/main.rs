use std::process::ExitCode;

use anisofreq_cli::{run, Flags, RunConfig};
use clap::Parser;

fn main() -> ExitCode {
    let flags = Flags::parse();
    let code = match RunConfig::resolve(&flags).and_then(|cfg| run(&cfg)) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.all_passed == Some(false) {
                eprintln!("verification failed; see the report for failing entries");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
