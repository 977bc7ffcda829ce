use std::io::Write;

use amcs_cli::{execute, Cli};
use clap::Parser;

fn main() {
    let outcome = execute(Cli::parse());
    if !outcome.stdout.is_empty() {
        print!("{}", outcome.stdout);
    }
    if !outcome.stderr.is_empty() {
        let _ = write!(std::io::stderr(), "{}", outcome.stderr);
    }
    std::process::exit(outcome.code);
}
