use clap::Parser;
use tbnode_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(&cli) {
        eprintln!("{failure}");
        std::process::exit(failure.exit_code());
    }
}
