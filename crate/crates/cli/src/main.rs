use clap::Parser;

fn main() {
    std::process::exit(diracloc_cli::run(diracloc_cli::Cli::parse()));
}
