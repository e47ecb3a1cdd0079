use clap::Parser;

fn main() {
    std::process::exit(jdisc::cli::run(jdisc::cli::Cli::parse()));
}
