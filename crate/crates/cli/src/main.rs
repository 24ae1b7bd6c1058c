use clap::Parser;
use sota_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(err) = sota_cli::run(&cli) {
        eprintln!("{}", sota_cli::error_json(&err));
        std::process::exit(2);
    }
}
