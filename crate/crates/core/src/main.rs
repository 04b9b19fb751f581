use clap::Parser;
use kernel_embed::cli;

fn main() {
    let args = cli::Cli::parse();
    std::process::exit(cli::run(&args));
}
