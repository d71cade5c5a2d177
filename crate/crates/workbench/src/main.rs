use clap::Parser;
use cnu_workbench::cli::{error_code, run, Cli};

fn main() {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    if let Err(e) = run(Cli::parse()) {
        match error_code(&e) {
            Some(code) => eprintln!("error[{code}]: {e:#}"),
            None => eprintln!("error: {e:#}"),
        }
        std::process::exit(1);
    }
}
